mod conv;
mod elementwise;
mod matmul;
mod norm;
mod reduce;

pub use conv::{conv_output_size, conv_transpose_output_size};
pub use elementwise::broadcast_shape;
pub use norm::BatchStats;

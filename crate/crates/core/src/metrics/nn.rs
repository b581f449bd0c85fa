use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// The `k` corpus images closest to `query` in pixel-space L2 distance,
/// nearest first; ties go to the lower index.
pub fn nearest_neighbors(query: &Image, corpus: &[Image], k: usize) -> Result<Vec<Neighbor>> {
    if corpus.is_empty() {
        return Err(Error::Metric("corpus is empty".into()));
    }
    if k == 0 || k > corpus.len() {
        return Err(Error::Metric(format!(
            "k = {k} must lie in 1..={}",
            corpus.len()
        )));
    }
    let mut all = Vec::with_capacity(corpus.len());
    for (index, im) in corpus.iter().enumerate() {
        if !im.same_shape(query) {
            return Err(Error::Metric(format!(
                "corpus image {index} differs in shape from the query"
            )));
        }
        let d2: f64 = im
            .data
            .iter()
            .zip(&query.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        all.push(Neighbor {
            index,
            distance: d2.sqrt(),
        });
    }
    all.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.index.cmp(&b.index))
    });
    all.truncate(k);
    Ok(all)
}

//! Straightforward MS-SSIM on a single plane: full 2-D Gaussian windows,
//! explicit window sums, reflect-padded 2×2 averaging between scales.

pub fn ms_ssim(a: &[f64], b: &[f64], h: usize, w: usize) -> f64 {
    let raw = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let (c1, c2) = ((0.01f64 * 2.0).powi(2), (0.03f64 * 2.0).powi(2));
    let (mut a, mut b, mut h, mut w) = (a.to_vec(), b.to_vec(), h, w);
    let mut result = 1.0;
    for s in 0..5 {
        let size = 11.min(h).min(w);
        let sigma = 1.5 * size as f64 / 11.0;
        let c = (size as f64 - 1.0) / 2.0;
        let mut win = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                win[i * size + j] = (-r2 / (2.0 * sigma * sigma)).exp();
            }
        }
        let norm: f64 = win.iter().sum();
        win.iter_mut().for_each(|v| *v /= norm);
        let (mut ssim_sum, mut cs_sum, mut count) = (0.0, 0.0, 0.0);
        for y in 0..=h - size {
            for x in 0..=w - size {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..size {
                    for j in 0..size {
                        let k = win[i * size + j];
                        let (p, q) = (a[(y + i) * w + x + j], b[(y + i) * w + x + j]);
                        ma += k * p;
                        mb += k * q;
                        saa += k * p * p;
                        sbb += k * q * q;
                        sab += k * p * q;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                let cs = (2.0 * cov + c2) / (va + vb + c2);
                let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                ssim_sum += l * cs;
                cs_sum += cs;
                count += 1.0;
            }
        }
        if s == 4 {
            result *= (ssim_sum / count).max(0.0).powf(weights[s]);
        } else {
            result *= (cs_sum / count).max(0.0).powf(weights[s]);
            let down = |p: &[f64]| {
                // Reflect-pad one row and column, then average 2×2 blocks.
                let (ph, pw) = (h + h % 2, w + w % 2);
                let get = |y: usize, x: usize| p[y.min(h - 1) * w + x.min(w - 1)];
                let mut out = Vec::new();
                for y in (0..ph).step_by(2) {
                    for x in (0..pw).step_by(2) {
                        out.push(
                            (get(y, x) + get(y, x + 1) + get(y + 1, x) + get(y + 1, x + 1)) / 4.0,
                        );
                    }
                }
                out
            };
            a = down(&a);
            b = down(&b);
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
    }
    result
}

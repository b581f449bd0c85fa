use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    /// Aggregate value; the mean of `per_pair` when that is present.
    pub value: f64,
    pub pairs: Option<usize>,
    pub resize: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pair: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    metric: &'a str,
    value: f64,
    pairs: Option<usize>,
    resize: usize,
    seed: u64,
}

impl MetricReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Writes `metric,value,pairs,resize,seed` with a header row.
    pub fn write_csv(reports: &[MetricReport], path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in reports {
            w.serialize(CsvRow {
                metric: &r.metric,
                value: r.value,
                pairs: r.pairs,
                resize: r.resize,
                seed: r.seed,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let r = MetricReport {
            metric: "ms-ssim".into(),
            value: 0.25,
            pairs: Some(3),
            resize: 128,
            seed: 7,
            mode: None,
            per_pair: Some(vec![0.0, 0.25, 0.5]),
        };
        let j = dir.path().join("r.json");
        r.write_json(&j).unwrap();
        assert_eq!(MetricReport::read_json(&j).unwrap(), r);
        let c = dir.path().join("r.csv");
        MetricReport::write_csv(&[r], &c).unwrap();
        assert_eq!(
            std::fs::read_to_string(&c).unwrap(),
            "metric,value,pairs,resize,seed\nms-ssim,0.25,3,128,7\n"
        );
    }
}

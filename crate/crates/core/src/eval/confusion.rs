use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[predicted][actual]`; each column of `percent` is normalized to 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub percent: Vec<Vec<f64>>,
    /// Actual classes with no samples; their percent column is all zero.
    pub empty_columns: Vec<usize>,
}

pub fn confusion(preds: &[usize], actuals: &[usize], classes: &[String]) -> Result<ConfusionMatrix> {
    if preds.len() != actuals.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", preds.len(), actuals.len())));
    }
    let c = classes.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (&p, &a) in preds.iter().zip(actuals) {
        if p >= c || a >= c {
            return Err(Error::Shape(format!("class index out of range for {c} classes")));
        }
        counts[p][a] += 1;
    }
    let mut percent = vec![vec![0.0; c]; c];
    let mut empty_columns = Vec::new();
    for a in 0..c {
        let total: u64 = (0..c).map(|p| counts[p][a]).sum();
        if total == 0 {
            empty_columns.push(a);
            continue;
        }
        for p in 0..c {
            percent[p][a] = 100.0 * counts[p][a] as f64 / total as f64;
        }
    }
    Ok(ConfusionMatrix { classes: classes.to_vec(), counts, percent, empty_columns })
}

/// Diagonal of the column-normalized matrix: the recognition rate of each actual class.
pub fn per_class_rate(cm: &ConfusionMatrix) -> Vec<f64> {
    (0..cm.classes.len()).map(|c| cm.percent[c][c]).collect()
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Overall accuracy in percent.
    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.classes.len()).map(|c| self.counts[c][c]).sum();
        100.0 * diag as f64 / self.total() as f64
    }

    /// Header row of actual classes; first column holds the predicted class; cells to 1 dp.
    pub fn to_csv(&self) -> String {
        let quote = |s: &str| if s.contains([',', '"', '\n']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.to_string() };
        let mut out = String::from("predicted\\actual");
        for c in &self.classes {
            out.push(',');
            out.push_str(&quote(c));
        }
        out.push('\n');
        for (p, row) in self.percent.iter().enumerate() {
            out.push_str(&quote(&self.classes[p]));
            for v in row {
                let _ = write!(out, ",{v:.1}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

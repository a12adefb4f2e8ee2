//! Confusion matrices: rows are actual classes, columns predicted classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    /// counts[i][j] = number of samples of actual class i predicted as j.
    pub counts: Vec<Vec<usize>>,
}

pub fn confusion_matrix(actual: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::invalid(
            "confusion_matrix",
            format!("{} actual labels vs {} predictions", actual.len(), predicted.len()),
        ));
    }
    if n_classes == 0 {
        return Err(Error::invalid("confusion_matrix", "need at least one class"));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (t, (&a, &p)) in actual.iter().zip(predicted).enumerate() {
        if a >= n_classes || p >= n_classes {
            return Err(Error::invalid(
                "confusion_matrix",
                format!("sample {t}: label pair (actual {a}, predicted {p}) outside [0, {n_classes})"),
            ));
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> usize {
        self.counts.iter().map(|row| row[j]).sum()
    }

    /// Row-normalized matrix for plotting. Rows with zero support are left
    /// all-zero; their indices are returned alongside so callers can flag
    /// them instead of dividing by zero.
    pub fn normalized(&self) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut out = vec![vec![0.0; self.n_classes]; self.n_classes];
        let mut zero_rows = Vec::new();
        for i in 0..self.n_classes {
            let support = self.row_sum(i);
            if support == 0 {
                zero_rows.push(i);
                continue;
            }
            for j in 0..self.n_classes {
                out[i][j] = self.counts[i][j] as f64 / support as f64;
            }
        }
        (out, zero_rows)
    }
}

//! One-vs-rest ROC curves and AUC via a tie-aware threshold sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRoc {
    pub class: usize,
    /// (false positive rate, true positive rate), starting at (0,0) and
    /// ending at (1,1), monotone in both coordinates.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub per_class: Vec<ClassRoc>,
    /// Mean AUC over classes that had both positives and negatives.
    pub macro_auc: f64,
    /// Classes skipped for lacking positives or negatives.
    pub skipped: Vec<usize>,
}

/// Compute per-class one-vs-rest ROC curves from an `n x k` score matrix
/// (row t = class scores of sample t) and integer labels.
pub fn roc_auc(scores: &[Vec<f64>], actual: &[usize]) -> Result<RocCurve> {
    if scores.is_empty() {
        return Err(Error::invalid("roc_auc", "no samples"));
    }
    if scores.len() != actual.len() {
        return Err(Error::invalid(
            "roc_auc",
            format!("{} score rows vs {} labels", scores.len(), actual.len()),
        ));
    }
    let k = scores[0].len();
    if k == 0 {
        return Err(Error::invalid("roc_auc", "empty score rows"));
    }
    for (t, row) in scores.iter().enumerate() {
        if row.len() != k {
            return Err(Error::invalid(
                "roc_auc",
                format!("sample {t}: {} scores, expected {k}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "score", name: format!("sample {t}") });
        }
    }
    if let Some(&bad) = actual.iter().find(|&&a| a >= k) {
        return Err(Error::invalid("roc_auc", format!("label {bad} outside [0, {k})")));
    }

    let mut per_class = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..k {
        let positives = actual.iter().filter(|&&a| a == c).count();
        let negatives = actual.len() - positives;
        if positives == 0 || negatives == 0 {
            skipped.push(c);
            continue;
        }
        per_class.push(sweep_class(scores, actual, c, positives, negatives));
    }
    if per_class.is_empty() {
        return Err(Error::invalid(
            "roc_auc",
            "every class lacks positives or negatives; no curve is defined",
        ));
    }
    let macro_auc = per_class.iter().map(|r| r.auc).sum::<f64>() / per_class.len() as f64;
    Ok(RocCurve { per_class, macro_auc, skipped })
}

fn sweep_class(scores: &[Vec<f64>], actual: &[usize], c: usize, p: usize, n: usize) -> ClassRoc {
    // Sort samples by this class's score, descending; sweep the threshold
    // through each group of tied scores at once so ties contribute a single
    // diagonal segment (trapezoidal integration then awards half credit,
    // matching pair counting).
    let mut order: Vec<usize> = (0..actual.len()).collect();
    order.sort_by(|&a, &b| scores[b][c].partial_cmp(&scores[a][c]).expect("finite scores"));

    let mut points = Vec::with_capacity(actual.len() + 2);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let (mut last_fpr, mut last_tpr) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]][c];
        while i < order.len() && scores[order[i]][c] == threshold {
            if actual[order[i]] == c {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fpr = fp as f64 / n as f64;
        let tpr = tp as f64 / p as f64;
        auc += (fpr - last_fpr) * (tpr + last_tpr) / 2.0;
        points.push((fpr, tpr));
        last_fpr = fpr;
        last_tpr = tpr;
    }
    ClassRoc { class: c, points, auc }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_vs_rest_scores(s: &[f64]) -> Vec<Vec<f64>> {
        s.iter().map(|&v| vec![v, 1.0 - v]).collect()
    }

    #[test]
    fn perfect_separation_gives_auc_one() {
        let scores = one_vs_rest_scores(&[0.9, 0.8, 0.2, 0.1]);
        let actual = [0, 0, 1, 1];
        let roc = roc_auc(&scores, &actual).unwrap();
        assert_eq!(roc.per_class[0].auc, 1.0);
        assert_eq!(roc.per_class[1].auc, 1.0);
        assert_eq!(roc.macro_auc, 1.0);
    }

    #[test]
    fn all_tied_scores_give_half() {
        let scores = one_vs_rest_scores(&[0.5, 0.5, 0.5, 0.5]);
        let actual = [0, 1, 0, 1];
        let roc = roc_auc(&scores, &actual).unwrap();
        assert_eq!(roc.per_class[0].auc, 0.5);
        // A single tie group yields exactly one diagonal segment.
        assert_eq!(roc.per_class[0].points.len(), 2);
    }

    #[test]
    fn points_are_monotone_and_bracketed() {
        let scores = one_vs_rest_scores(&[0.9, 0.3, 0.5, 0.5, 0.1, 0.7]);
        let actual = [0, 1, 0, 1, 1, 0];
        let roc = roc_auc(&scores, &actual).unwrap();
        for class in &roc.per_class {
            assert_eq!(*class.points.first().unwrap(), (0.0, 0.0));
            assert_eq!(*class.points.last().unwrap(), (1.0, 1.0));
            for w in class.points.windows(2) {
                assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            assert!((0.0..=1.0).contains(&class.auc));
        }
    }

    #[test]
    fn degenerate_classes_are_skipped_and_reported() {
        // Class 2 never appears: skipped, others still evaluated.
        let scores = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.7, 0.1],
        ];
        let actual = [0, 1, 0, 1];
        let roc = roc_auc(&scores, &actual).unwrap();
        assert_eq!(roc.skipped, vec![2]);
        assert_eq!(roc.per_class.len(), 2);

        // Single-class labels leave nothing defined.
        assert!(roc_auc(&one_vs_rest_scores(&[0.2, 0.4]), &[0, 0]).is_err());
    }

    #[test]
    fn matches_pair_counting_on_a_tied_instance() {
        // Positives score {0.8, 0.5}, negatives {0.5, 0.2}:
        // pairs: (0.8 vs 0.5) win, (0.8 vs 0.2) win, (0.5 vs 0.5) half,
        // (0.5 vs 0.2) win -> (3 + 0.5) / 4 = 0.875.
        let scores = one_vs_rest_scores(&[0.8, 0.5, 0.5, 0.2]);
        let actual = [0, 0, 1, 1];
        let roc = roc_auc(&scores, &actual).unwrap();
        assert!((roc.per_class[0].auc - 0.875).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(roc_auc(&[], &[]).is_err());
        assert!(roc_auc(&one_vs_rest_scores(&[0.5]), &[0, 1]).is_err());
        assert!(roc_auc(&[vec![f64::NAN, 0.0]], &[0]).is_err());
        assert!(roc_auc(&[vec![0.5, 0.5], vec![0.5]], &[0, 1]).is_err());
        assert!(roc_auc(&[vec![0.5, 0.5], vec![0.5, 0.5]], &[0, 7]).is_err());
    }
}

//! Thresholded support classification and the two-step refit.
//!
//! Given an estimate vector and a threshold `t` from a bound calculator,
//! coordinates with `s_hat[i] > t` are declared active; when the smallest
//! nonzero index `s_min` is known, coordinates with
//! `s_hat[i] < s_min - t` are declared inactive. Everything else —
//! including coordinates caught by both rules when `s_min > 2t`, which
//! signals that the error event failed — stays undecided, so the three
//! classes always partition `1..=p`. Ties at a cutoff go to undecided.
//!
//! The refit re-estimates the declared support by unpenalized least
//! squares on the same observations.

use std::collections::BTreeSet;

use serde_json::{json, Value};
use thiserror::Error;

use crate::design::DesignMatrix;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("threshold must be nonnegative, got {got}")]
    NegativeThreshold { got: f64 },
    #[error("support contains {index}, outside 1..={p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("support size {size} exceeds the number of rows {n}")]
    SupportTooLarge { size: usize, n: usize },
    #[error("restricted design is rank-deficient: pivot ratio {pivot_ratio:.3e} at column {column}")]
    RankDeficient { column: usize, pivot_ratio: f64 },
    #[error("observations have length {got}, design has {expected} rows")]
    LengthMismatch { expected: usize, got: usize },
}

/// Confusion counts of a recovered support against the truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SupportComparison {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `recovered == truth`.
    pub exact: bool,
}

/// Outcome of thresholding an estimate vector (1-based variable indices).
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport<F> {
    pub threshold: F,
    /// `{i : s_hat[i] > t}`, minus any overlap with the rejection rule.
    pub support: BTreeSet<usize>,
    /// `{i : s_hat[i] < s_min - t}` when `s_min` was supplied, minus any
    /// overlap with the support rule; empty otherwise.
    pub rejected: BTreeSet<usize>,
    pub undecided: BTreeSet<usize>,
    /// Least-squares re-estimates on the support (dense, zeros off it).
    pub refit_values: Option<Vec<F>>,
    pub truth_comparison: Option<SupportComparison>,
}

impl<F: Real> RecoveryReport<F> {
    pub fn with_refit(mut self, values: Vec<F>) -> Self {
        self.refit_values = Some(values);
        self
    }

    pub fn with_truth(mut self, comparison: SupportComparison) -> Self {
        self.truth_comparison = Some(comparison);
        self
    }

    /// JSON form: threshold, sorted index sets, refit as sparse
    /// `[index, value]` pairs, truth counts when present.
    pub fn to_json(&self) -> Value {
        let sets = |set: &BTreeSet<usize>| -> Value { json!(set.iter().collect::<Vec<_>>()) };
        let mut map = serde_json::Map::new();
        map.insert(
            "threshold".into(),
            json!(self.threshold.to_f64().unwrap_or(f64::NAN)),
        );
        map.insert("support".into(), sets(&self.support));
        map.insert("rejected".into(), sets(&self.rejected));
        map.insert("undecided".into(), sets(&self.undecided));
        if let Some(refit) = &self.refit_values {
            let sparse: Vec<Value> = refit
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != F::zero())
                .map(|(i, v)| json!([i + 1, v.to_f64().unwrap_or(f64::NAN)]))
                .collect();
            map.insert("refit".into(), Value::Array(sparse));
        }
        if let Some(truth) = &self.truth_comparison {
            map.insert(
                "truth_comparison".into(),
                json!({
                    "true_positives": truth.true_positives,
                    "false_positives": truth.false_positives,
                    "false_negatives": truth.false_negatives,
                    "exact": truth.exact,
                }),
            );
        }
        Value::Object(map)
    }
}

/// Classifies coordinates by the two threshold rules.
pub fn threshold_support<F: Real>(
    s_hat: &[F],
    t: F,
    s_min: Option<F>,
) -> Result<RecoveryReport<F>, RecoveryError> {
    if !(t >= F::zero()) {
        return Err(RecoveryError::NegativeThreshold {
            got: t.to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut support = BTreeSet::new();
    let mut rejected = BTreeSet::new();
    let mut undecided = BTreeSet::new();
    for (pos, &v) in s_hat.iter().enumerate() {
        let index = pos + 1;
        let is_active = v > t;
        let is_rejected = s_min.map_or(false, |m| v < m - t);
        match (is_active, is_rejected) {
            (true, false) => {
                support.insert(index);
            }
            (false, true) => {
                rejected.insert(index);
            }
            // both rules firing means the error event failed; neither
            // rule firing is the usual gap
            _ => {
                undecided.insert(index);
            }
        }
    }
    Ok(RecoveryReport {
        threshold: t,
        support,
        rejected,
        undecided,
        refit_values: None,
        truth_comparison: None,
    })
}

/// Unpenalized least squares restricted to `support` (1-based), solved
/// through the normal equations with a Cholesky factorization. Returns a
/// dense length-`p` vector with zeros off the support.
pub fn refit_least_squares<F: Real>(
    observations: &[F],
    design: &DesignMatrix,
    support: &BTreeSet<usize>,
) -> Result<Vec<F>, RecoveryError> {
    let n = design.n();
    let p = design.p();
    if observations.len() != n {
        return Err(RecoveryError::LengthMismatch {
            expected: n,
            got: observations.len(),
        });
    }
    for &i in support {
        if i == 0 || i > p {
            return Err(RecoveryError::IndexOutOfRange { index: i, p });
        }
    }
    if support.len() > n {
        return Err(RecoveryError::SupportTooLarge {
            size: support.len(),
            n,
        });
    }
    let mut out = vec![F::zero(); p];
    if support.is_empty() {
        return Ok(out);
    }
    let cols: Vec<usize> = support.iter().map(|&i| i - 1).collect();
    let k = cols.len();

    // normal equations: gram in exact integer arithmetic, rhs in F
    let mut gram = vec![F::zero(); k * k];
    for a in 0..k {
        for b in a..k {
            let dot: i64 = (0..n)
                .map(|j| i64::from(design.entry(j, cols[a])) * i64::from(design.entry(j, cols[b])))
                .sum();
            gram[a * k + b] = F::cast(dot);
            gram[b * k + a] = F::cast(dot);
        }
    }
    let mut rhs = vec![F::zero(); k];
    for (a, &col) in cols.iter().enumerate() {
        rhs[a] = (0..n)
            .map(|j| F::cast(design.entry(j, col)) * observations[j])
            .sum();
    }

    // in-place Cholesky with a pivot-ratio diagnostic
    let max_diag = (0..k)
        .map(|a| gram[a * k + a])
        .fold(F::zero(), |m, v| m.max(v));
    let tol = F::cast(1e-12) * max_diag.max(F::one());
    let mut chol = gram;
    for a in 0..k {
        for b in 0..=a {
            let mut sum = chol[a * k + b];
            for c in 0..b {
                sum -= chol[a * k + c] * chol[b * k + c];
            }
            if a == b {
                if sum <= tol {
                    return Err(RecoveryError::RankDeficient {
                        column: cols[a] + 1,
                        pivot_ratio: (sum / max_diag.max(F::one()))
                            .to_f64()
                            .unwrap_or(f64::NAN),
                    });
                }
                chol[a * k + a] = sum.sqrt();
            } else {
                chol[a * k + b] = sum / chol[b * k + b];
            }
        }
    }
    // forward then backward substitution
    let mut y = rhs;
    for a in 0..k {
        for b in 0..a {
            let scaled = chol[a * k + b] * y[b];
            y[a] -= scaled;
        }
        y[a] /= chol[a * k + a];
    }
    for a in (0..k).rev() {
        for b in (a + 1)..k {
            let scaled = chol[b * k + a] * y[b];
            y[a] -= scaled;
        }
        y[a] /= chol[a * k + a];
    }
    for (a, &col) in cols.iter().enumerate() {
        out[col] = y[a];
    }
    Ok(out)
}

/// Set arithmetic between a recovered support and the truth.
pub fn compare_support(
    recovered: &BTreeSet<usize>,
    truth: &BTreeSet<usize>,
) -> SupportComparison {
    let true_positives = recovered.intersection(truth).count();
    let false_positives = recovered.len() - true_positives;
    let false_negatives = truth.len() - true_positives;
    SupportComparison {
        true_positives,
        false_positives,
        false_negatives,
        exact: recovered == truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{sample_design, DesignScheme};

    #[test]
    fn threshold_rule_examples() {
        let report = threshold_support(&[0.5, 0.01, -0.02], 0.1, None).unwrap();
        assert_eq!(report.support, [1].into_iter().collect());
        assert!(report.rejected.is_empty());
        assert_eq!(report.undecided, [2, 3].into_iter().collect());

        // t = 0: support is the strictly positive coordinates
        let report = threshold_support(&[0.5, 0.0, -0.02], 0.0, None).unwrap();
        assert_eq!(report.support, [1].into_iter().collect());
    }

    #[test]
    fn rejection_rule_with_s_min() {
        // s_min = 0.4, t = 0.1: reject below 0.3
        let report = threshold_support(&[0.5, 0.05, 0.32], 0.1, Some(0.4)).unwrap();
        assert_eq!(report.support, [1, 3].into_iter().collect());
        assert_eq!(report.rejected, [2].into_iter().collect());
        assert!(report.undecided.is_empty());
    }

    #[test]
    fn overlapping_rules_go_undecided() {
        // s_min = 1.0, t = 0.1: a value in (0.1, 0.9) satisfies both rules
        let report = threshold_support(&[0.5], 0.1, Some(1.0)).unwrap();
        assert!(report.support.is_empty());
        assert!(report.rejected.is_empty());
        assert_eq!(report.undecided, [1].into_iter().collect());
    }

    #[test]
    fn classes_partition() {
        let s_hat: Vec<f64> = (0..40).map(|i| (i as f64 - 20.0) / 25.0).collect();
        let report = threshold_support(&s_hat, 0.15, Some(0.5)).unwrap();
        let mut all = BTreeSet::new();
        all.extend(&report.support);
        all.extend(&report.rejected);
        all.extend(&report.undecided);
        assert_eq!(all, (1..=40).collect());
        assert_eq!(
            report.support.len() + report.rejected.len() + report.undecided.len(),
            40
        );
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(matches!(
            threshold_support(&[0.5], -0.1, None),
            Err(RecoveryError::NegativeThreshold { .. })
        ));
    }

    #[test]
    fn refit_empty_support_is_zero() {
        let design = sample_design(DesignScheme::Rademacher, 5, 8, 0).unwrap();
        let e = [1.0; 5];
        let refit = refit_least_squares(&e, &design, &BTreeSet::new()).unwrap();
        assert_eq!(refit, vec![0.0; 8]);
    }

    #[test]
    fn refit_recovers_noiseless_truth() {
        let design = sample_design(DesignScheme::Rademacher, 12, 20, 3).unwrap();
        let truth: Vec<f64> = {
            let mut s = vec![0.0; 20];
            s[1] = 0.7;
            s[4] = -0.3;
            s[9] = 0.1;
            s
        };
        let e: Vec<f64> = (0..12)
            .map(|j| {
                (0..20)
                    .map(|i| f64::from(design.entry(j, i)) * truth[i])
                    .sum()
            })
            .collect();
        let support: BTreeSet<usize> = [2, 5, 10].into_iter().collect();
        let refit = refit_least_squares(&e, &design, &support).unwrap();
        for i in 0..20 {
            assert!(
                (refit[i] - truth[i]).abs() < 1e-10,
                "coordinate {i}: {} vs {}",
                refit[i],
                truth[i]
            );
        }
    }

    #[test]
    fn refit_rejects_bad_supports() {
        let design = sample_design(DesignScheme::Rademacher, 3, 8, 1).unwrap();
        let e = [1.0, 0.0, -1.0];
        let too_large: BTreeSet<usize> = [1, 2, 3, 4].into_iter().collect();
        assert!(matches!(
            refit_least_squares(&e, &design, &too_large),
            Err(RecoveryError::SupportTooLarge { size: 4, n: 3 })
        ));
        let out_of_range: BTreeSet<usize> = [9].into_iter().collect();
        assert!(matches!(
            refit_least_squares(&e, &design, &out_of_range),
            Err(RecoveryError::IndexOutOfRange { index: 9, p: 8 })
        ));
    }

    #[test]
    fn refit_detects_rank_deficiency() {
        // two identical columns
        let design = crate::design::DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            3,
            2,
            vec![1, 1, 1, 1, 0, 0],
        )
        .unwrap();
        let e = [1.0, 1.0, 0.0];
        let both: BTreeSet<usize> = [1, 2].into_iter().collect();
        assert!(matches!(
            refit_least_squares(&e, &design, &both),
            Err(RecoveryError::RankDeficient { .. })
        ));
    }

    #[test]
    fn compare_support_examples() {
        let a: BTreeSet<usize> = [1, 2, 3].into_iter().collect();
        let cmp = compare_support(&a, &a);
        assert!(cmp.exact);
        assert_eq!(cmp.true_positives, 3);

        let partial: BTreeSet<usize> = [1, 2].into_iter().collect();
        let cmp = compare_support(&partial, &a);
        assert_eq!(cmp.false_negatives, 1);
        assert_eq!(cmp.false_positives, 0);
        assert!(!cmp.exact);

        let empty = BTreeSet::new();
        assert!(compare_support(&empty, &empty).exact);
    }

    #[test]
    fn bounded_perturbation_support_property() {
        // if ||s_hat - s||_inf <= t, the support rule only picks true
        // actives and misses only entries with s_i <= 2t
        let truth: Vec<f64> = vec![0.0, 0.5, 0.0, 0.12, 0.38, 0.0];
        let t = 0.05;
        for trial in 0..50 {
            let mut rng = crate::rng::stream_rng(77, 0x21, trial);
            let s_hat: Vec<f64> = truth
                .iter()
                .map(|&v| v + (f64::uniform01(&mut rng) * 2.0 - 1.0) * t)
                .collect();
            let report = threshold_support(&s_hat, t, None).unwrap();
            for &i in &report.support {
                assert!(truth[i - 1] > 0.0, "false positive at {i}");
            }
            for (pos, &v) in truth.iter().enumerate() {
                if v > 2.0 * t {
                    assert!(
                        report.support.contains(&(pos + 1)),
                        "missed strong coordinate {}",
                        pos + 1
                    );
                }
            }
        }
    }

    #[test]
    fn json_shape() {
        let report = threshold_support(&[0.5, 0.01], 0.1, None)
            .unwrap()
            .with_refit(vec![0.48, 0.0])
            .with_truth(compare_support(
                &[1].into_iter().collect(),
                &[1].into_iter().collect(),
            ));
        let value = report.to_json();
        assert_eq!(value["support"], json!([1]));
        assert_eq!(value["refit"], json!([[1, 0.48]]));
        assert_eq!(value["truth_comparison"]["exact"], json!(true));
    }
}

//! Quantile selection over a grid of α values.

use serde::{Deserialize, Serialize};

use super::corpus::{ensure_disjoint, CorpusImage};
use super::eval::{calibrate, check_hygiene, classify, score_labeled, CalibrationOptions};
use crate::backend::Reconstructor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub tau: f64,
    pub estimation_acc: f64,
    pub evaluation_acc: f64,
    pub avg_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepReport {
    pub backend_id: String,
    pub rows: Vec<AlphaRow>,
    pub best_alpha: f64,
}

impl AlphaSweepReport {
    pub fn best(&self) -> &AlphaRow {
        self.rows
            .iter()
            .find(|r| r.alpha == self.best_alpha)
            .expect("best_alpha comes from rows")
    }
}

/// Picks the row with the highest average accuracy; ties go to the smaller α.
pub fn select_best(rows: &[AlphaRow]) -> Option<f64> {
    rows.iter()
        .min_by(|a, b| {
            b.avg_acc
                .total_cmp(&a.avg_acc)
                .then(a.alpha.total_cmp(&b.alpha))
        })
        .map(|r| r.alpha)
}

/// Calibrates on `est_belonging` at each α, then measures accuracy on the
/// estimation split (the calibration images plus `non_belonging_est`) and on
/// the held-out evaluation split.
pub fn sweep_alpha<R: Reconstructor + ?Sized>(
    backend: &R,
    est_belonging: &[CorpusImage],
    eval_belonging: &[CorpusImage],
    non_belonging_est: &[CorpusImage],
    non_belonging_eval: &[CorpusImage],
    grid: &[f64],
    opts: &CalibrationOptions,
) -> Result<AlphaSweepReport> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("alpha grid is empty".into()));
    }
    if eval_belonging.is_empty() || non_belonging_est.is_empty() || non_belonging_eval.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let ids = |c: &[CorpusImage]| c.iter().map(|x| x.id.clone()).collect::<Vec<_>>();
    let est_ids = [ids(est_belonging), ids(non_belonging_est)].concat();
    let eval_ids = [ids(eval_belonging), ids(non_belonging_eval)].concat();
    ensure_disjoint(
        est_ids.iter().map(String::as_str),
        eval_ids.iter().map(String::as_str),
    )?;

    let first = CalibrationOptions {
        alpha: grid[0],
        ..opts.clone()
    };
    let (base, cal_records) = calibrate(backend, est_belonging, &first)?;
    check_hygiene(backend, &base, &[eval_belonging, non_belonging_eval])?;

    let mut est_scored = score_labeled(backend, &[], non_belonging_est, &opts.scoring)?;
    est_scored.splice(
        0..0,
        cal_records
            .into_iter()
            .map(|record| super::eval::ScoredImage {
                record,
                truth: crate::threshold::Decision::Belonging,
            }),
    );
    let eval_scored = score_labeled(backend, eval_belonging, non_belonging_eval, &opts.scoring)?;

    let mut rows = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let model = base.with_alpha(alpha)?;
        let est = classify(&model, &est_scored).accuracy;
        let eval = classify(&model, &eval_scored).accuracy;
        rows.push(AlphaRow {
            alpha,
            tau: model.tau,
            estimation_acc: est,
            evaluation_acc: eval,
            avg_acc: 0.5 * (est + eval),
        });
    }
    let best_alpha = select_best(&rows).expect("grid is nonempty");
    Ok(AlphaSweepReport {
        backend_id: backend.id().to_string(),
        rows,
        best_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alpha: f64, avg: f64) -> AlphaRow {
        AlphaRow {
            alpha,
            tau: 0.0,
            estimation_acc: avg,
            evaluation_acc: avg,
            avg_acc: avg,
        }
    }

    #[test]
    fn best_prefers_accuracy_then_smaller_alpha() {
        assert_eq!(select_best(&[row(0.05, 0.9)]), Some(0.05));
        assert_eq!(
            select_best(&[row(0.01, 0.8), row(0.05, 0.9), row(0.1, 0.85)]),
            Some(0.05)
        );
        assert_eq!(
            select_best(&[row(0.1, 0.9), row(0.02, 0.9), row(0.05, 0.9)]),
            Some(0.02)
        );
        assert_eq!(select_best(&[]), None);
    }
}

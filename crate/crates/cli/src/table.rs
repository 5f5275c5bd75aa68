//! Plain-text renderings for `--pretty`.

use std::fmt::Write;

use aedr::harness::{
    AblationReport, AlphaSweepReport, BenchReport, ChainStudyReport, ConfusionReport, DeskReport,
    SignalSummary,
};
use aedr::{ChainRecord, Decision, ReconstructionRecord, SignalKind, ThresholdModel};
use serde::Serialize;

/// Threshold fields worth printing after calibration; samples are omitted.
#[derive(Serialize)]
pub struct ThresholdSummary {
    backend_id: String,
    metric: aedr::LossMetric,
    signal: SignalKind,
    alpha: f64,
    bandwidth: f64,
    tau: f64,
    samples: usize,
}

impl ThresholdSummary {
    pub fn new(m: &ThresholdModel) -> Self {
        Self {
            backend_id: m.backend_id.clone(),
            metric: m.metric,
            signal: m.signal,
            alpha: m.alpha,
            bandwidth: m.bandwidth,
            tau: m.tau,
            samples: m.samples.len(),
        }
    }
}

pub fn attribution(
    image: &str,
    r: &ReconstructionRecord,
    signal: SignalKind,
    tau: f64,
    verdict: Decision,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "image        {image}");
    let _ = writeln!(s, "L1           {:.6e}", r.l1);
    let _ = writeln!(s, "L2           {:.6e}", r.l2);
    let _ = writeln!(s, "ratio        {:.4}", r.ratio);
    let _ = writeln!(s, "homogeneity  {:.4}", r.homogeneity);
    let _ = writeln!(s, "calibrated   {:.4}", r.calibrated);
    let _ = writeln!(s, "tau          {tau:.4} ({})", signal.name());
    if r.degenerate {
        let _ = writeln!(s, "degenerate   yes");
    }
    let _ = writeln!(s, "verdict      {}", verdict.as_str());
    s
}

pub fn confusion(r: &ConfusionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "backend {}  loss {}  signal {}",
        r.backend_id,
        r.metric,
        r.signal.name()
    );
    let _ = writeln!(s, "alpha {}  tau {:.4}", r.alpha, r.tau);
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>6} {:>6} {:>8}",
        "TP", "FP", "TN", "FN", "Acc"
    );
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>6} {:>6} {:>7.2}%",
        r.tp,
        r.fp,
        r.tn,
        r.fn_,
        100.0 * r.accuracy
    );
    s
}

pub fn sweep(r: &AlphaSweepReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>8} {:>11} {:>11} {:>9}",
        "alpha", "Estimation", "Evaluation", "Avg Acc"
    );
    for row in &r.rows {
        let mark = if row.alpha == r.best_alpha { " *" } else { "" };
        let _ = writeln!(
            s,
            "{:>8} {:>10.2}% {:>10.2}% {:>8.2}%{mark}",
            row.alpha,
            100.0 * row.estimation_acc,
            100.0 * row.evaluation_acc,
            100.0 * row.avg_acc
        );
    }
    s
}

pub fn chain(r: &ChainRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>14} {:>16}",
        "step", "Single Loss", "Cumulative Loss"
    );
    for k in 0..r.steps {
        let _ = writeln!(
            s,
            "{:>5} {:>14.6e} {:>16.6e}",
            k + 1,
            r.single_losses[k],
            r.cumulative_losses[k]
        );
    }
    s
}

pub fn bench(r: &BenchReport) -> String {
    format!(
        "backend {}  loss {}\nimages {}  calls {}\ntotal {:.3} s  mean {:.6} s/image\n",
        r.backend_id,
        r.metric,
        r.images,
        r.reconstruct_calls,
        r.total_seconds,
        r.mean_seconds_per_image
    )
}

fn summary_rows(s: &mut String, rows: &[&SignalSummary]) {
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>5} {:>5} {:>5} {:>5} {:>8} {:>7}",
        "signal", "tau", "TP", "FP", "TN", "FN", "Acc", "FNR"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>10.4e} {:>5} {:>5} {:>5} {:>5} {:>7.2}% {:>7.4}",
            r.signal.name(),
            r.tau,
            r.tp,
            r.fp,
            r.tn,
            r.fn_,
            100.0 * r.accuracy,
            r.false_negative_rate
        );
    }
}

pub fn desk(r: &DeskReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "target  {}\nforeign {}",
        r.target_backend, r.foreign_backend
    );
    summary_rows(&mut s, &[&r.calibrated, &r.ratio, &r.single_loss]);
    s
}

pub fn ablation(r: &AblationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "target {}", r.target_backend);
    summary_rows(&mut s, &[&r.uncalibrated, &r.calibrated]);
    s
}

pub fn chain_study(r: &ChainStudyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "target {}  images {}", r.target_backend, r.config.images);
    let _ = writeln!(
        s,
        "{:>5} {:>14} {:>16}",
        "step", "Single Loss", "Cumulative Loss"
    );
    for (k, (a, c)) in r
        .mean_single_losses
        .iter()
        .zip(&r.mean_cumulative_losses)
        .enumerate()
    {
        let _ = writeln!(s, "{:>5} {:>14.6e} {:>16.6e}", k + 1, a, c);
    }
    let _ = writeln!(
        s,
        "L1 > L2 on {:.1}% of images; later steps within {:.2}% of their mean",
        100.0 * r.first_exceeds_second,
        100.0 * r.tail_max_relative_deviation
    );
    s
}

//! Evaluation metrics and multi-seed summaries.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("AUC needs both classes among the labels")]
    SingleClass,
    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("summary needs at least 2 values, got {0}")]
    TooFewSamples(usize),
    #[error("unsupported confidence level {0}")]
    UnsupportedLevel(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// 1-based ranks with tied values sharing their mean rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let mid = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mid;
        }
        start = end;
    }
    ranks
}

/// Mann–Whitney AUC with mid-rank ties.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricsError::NonFinite("scores"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let ranks = mid_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(pred, truth)?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn pearson(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
    }
    if sxx == 0.0 {
        return Err(MetricsError::ZeroVariance("predictions"));
    }
    if syy == 0.0 {
        return Err(MetricsError::ZeroVariance("targets"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided 95% Student-t critical values t(0.975, df), df = 1..=40.
const T975: [f64; 40] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, //
    2.201, 2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, //
    2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042, //
    2.040, 2.037, 2.035, 2.032, 2.030, 2.028, 2.026, 2.024, 2.023, 2.021,
];

/// t(0.975, df): table for df ≤ 40, Cornish–Fisher expansion beyond.
pub fn t_quantile_975(df: usize) -> f64 {
    assert!(df >= 1, "t quantile needs df ≥ 1");
    if df <= T975.len() {
        return T975[df - 1];
    }
    let z: f64 = 1.959_963_984_540_054;
    let v = df as f64;
    let (z3, z5, z7) = (z.powi(3), z.powi(5), z.powi(7));
    z + (z3 + z) / (4.0 * v)
        + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * v * v)
        + (3.0 * z7 + 19.0 * z5 + 17.0 * z3 - 15.0 * z) / (384.0 * v * v * v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub std: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl MetricSummary {
    pub fn half_width(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / 2.0
    }
}

pub fn summarize(values: &[f64], level: f64) -> Result<MetricSummary, MetricsError> {
    if level != 0.95 {
        return Err(MetricsError::UnsupportedLevel(level));
    }
    let n = values.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite("summary values"));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let std = var.sqrt();
    let half = t_quantile_975(n - 1) * std / nf.sqrt();
    Ok(MetricSummary {
        values: values.to_vec(),
        mean,
        std,
        ci_lo: mean - half,
        ci_hi: mean + half,
    })
}

/// `metric,seed,value` rows followed by `mean`, `std`, `ci_lo`, `ci_hi`,
/// `ci_half` summary rows per metric. Seeds pair with values by position.
pub fn format_report(entries: &[(&str, &[u64], &MetricSummary)]) -> String {
    let mut out = String::from("metric,seed,value\n");
    for (name, seeds, summary) in entries {
        for (seed, v) in seeds.iter().zip(&summary.values) {
            let _ = writeln!(out, "{name},{seed},{v:?}");
        }
        for (tag, v) in [
            ("mean", summary.mean),
            ("std", summary.std),
            ("ci_lo", summary.ci_lo),
            ("ci_hi", summary.ci_hi),
            ("ci_half", summary.half_width()),
        ] {
            let _ = writeln!(out, "{name},{tag},{v:?}");
        }
    }
    out
}

pub fn write_report(path: &Path, entries: &[(&str, &[u64], &MetricSummary)]) -> io::Result<()> {
    fs::write(path, format_report(entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[0.9, 0.1], &[true, false]), Ok(1.0));
        assert_eq!(
            auc_roc(&[0.3; 6], &[true, false, true, false, false, true]),
            Ok(0.5)
        );
        assert_eq!(auc_roc(&[0.1, 0.9], &[true, false]), Ok(0.0));
        assert_eq!(
            auc_roc(&[0.1, 0.2], &[true, true]),
            Err(MetricsError::SingleClass)
        );
    }

    #[test]
    fn mid_rank_ties() {
        assert_eq!(mid_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), Ok(0.0));
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]), Ok(12.5f64.sqrt()));
        assert_eq!(
            rmse(&[0.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &y), Ok(1.0));
        assert_eq!(pearson(&x, &neg), Ok(-1.0));
        assert_eq!(
            pearson(&x, &[4.0; 10]),
            Err(MetricsError::ZeroVariance("targets"))
        );
    }

    #[test]
    fn summary_edge_cases() {
        let s = summarize(&[0.7; 5], 0.95).unwrap();
        assert_eq!(s.ci_lo, s.ci_hi);
        assert_eq!(s.std, 0.0);
        assert_eq!(summarize(&[1.0], 0.95), Err(MetricsError::TooFewSamples(1)));
        assert!(summarize(&[1.0, 2.0], 0.9).is_err());
    }

    #[test]
    fn t_table_and_tail() {
        assert_eq!(t_quantile_975(19), 2.093);
        assert_eq!(t_quantile_975(1), 12.706);
        // t(0.975, 60) = 2.0003, t(0.975, 120) = 1.9799
        assert!((t_quantile_975(60) - 2.0003).abs() < 5e-4);
        assert!((t_quantile_975(120) - 1.9799).abs() < 5e-4);
        assert!(t_quantile_975(41) < t_quantile_975(40));
    }

    #[test]
    fn report_layout() {
        let s = summarize(&[0.5, 0.7], 0.95).unwrap();
        let text = format_report(&[("auc", &[0, 1], &s)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "metric,seed,value");
        assert_eq!(lines[1], "auc,0,0.5");
        assert_eq!(lines[3], "auc,mean,0.6");
        assert_eq!(lines.len(), 8);
    }
}

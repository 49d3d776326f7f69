//! Metric serialization: the shared CSV schema, flat key-value reports, and
//! small-sample interval statistics for arm comparisons.

use std::io::Write;
use std::path::Path;

use super::training::TrialResult;
use super::ExpError;

pub const METRICS_CSV_HEADER: &str = "arm,seed,fold,epoch,loss,val_loss,accuracy,kappa";

/// One row of the shared metrics schema. `epoch` is 1-based for training
/// history; drivers that report without epochs use 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub arm: String,
    pub seed: u64,
    pub fold: usize,
    pub epoch: usize,
    pub loss: f64,
    pub val_loss: f64,
    pub accuracy: f64,
    pub kappa: f64,
}

/// Renders rows under the fixed header. Float fields use shortest-roundtrip
/// formatting, so equal values always serialize to equal bytes.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        debug_assert!(!r.arm.contains(','), "arm name {:?} breaks the schema", r.arm);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.arm, r.seed, r.fold, r.epoch, r.loss, r.val_loss, r.accuracy, r.kappa
        ));
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), ExpError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(metrics_csv(rows).as_bytes())?;
    Ok(())
}

/// Expands a training history into per-epoch rows.
pub fn rows_from_trial(arm: &str, seed: u64, fold: usize, trial: &TrialResult) -> Vec<MetricsRow> {
    trial
        .history
        .iter()
        .map(|e| MetricsRow {
            arm: arm.to_string(),
            seed,
            fold,
            epoch: e.epoch,
            loss: e.train_loss,
            val_loss: e.val_loss,
            accuracy: e.val_accuracy,
            kappa: e.val_kappa,
        })
        .collect()
}

/// Writes a flat `key = value` report, one pair per line.
pub fn write_kv_report(path: &Path, pairs: &[(String, String)]) -> Result<(), ExpError> {
    let mut f = std::fs::File::create(path)?;
    for (k, v) in pairs {
        writeln!(f, "{k} = {v}")?;
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of an empty sample");
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-sided 95% t quantiles for 1..=30 degrees of freedom; larger samples
/// use the normal quantile.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

/// Small-sample 95% confidence interval for the mean (t distribution). A
/// single observation has no spread estimate and collapses to a point.
pub fn ci95(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let n = xs.len();
    if n < 2 {
        return (m, m);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let t = if n - 1 <= 30 { T_975[n - 2] } else { 1.96 };
    (m - t * se, m + t * se)
}

pub fn intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(arm: &str, epoch: usize) -> MetricsRow {
        MetricsRow {
            arm: arm.to_string(),
            seed: 3,
            fold: 1,
            epoch,
            loss: 0.5,
            val_loss: 0.25,
            accuracy: 0.75,
            kappa: 1.0 / 3.0,
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let text = metrics_csv(&[row("baseline", 1), row("baseline", 2)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "arm,seed,fold,epoch,loss,val_loss,accuracy,kappa");
        assert_eq!(lines[1], "baseline,3,1,1,0.5,0.25,0.75,0.3333333333333333");
        assert_eq!(lines.len(), 3);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_bytes_are_deterministic() {
        let rows = vec![row("a", 1), row("b", 2)];
        assert_eq!(metrics_csv(&rows), metrics_csv(&rows));
    }

    #[test]
    fn ci95_brackets_the_mean_and_degenerates_to_a_point() {
        let xs = [0.4, 0.5, 0.6, 0.5, 0.5];
        let (lo, hi) = ci95(&xs);
        let m = mean(&xs);
        assert!(lo < m && m < hi);
        // n=5, sd ~ 0.0707, se ~ 0.0316, t_4 = 2.776.
        assert!((hi - m - 2.776 * 0.070710678 / 5f64.sqrt()).abs() < 1e-6);
        assert_eq!(ci95(&[0.7]), (0.7, 0.7));
    }

    #[test]
    fn interval_overlap_is_symmetric_and_edge_inclusive() {
        assert!(intervals_overlap((0.0, 1.0), (0.5, 2.0)));
        assert!(intervals_overlap((0.5, 2.0), (0.0, 1.0)));
        assert!(intervals_overlap((0.0, 1.0), (1.0, 2.0)));
        assert!(!intervals_overlap((0.0, 1.0), (1.1, 2.0)));
    }
}

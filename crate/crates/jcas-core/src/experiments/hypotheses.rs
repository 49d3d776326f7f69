//! The five hypothesis drivers. Each consumes prepared spectrogram frames,
//! runs a seeded arm comparison, and emits per-epoch rows plus summary
//! statistics.
//!
//! 1. Domain shift: in-domain splits vs leave-one-TX-beam-out, on a
//!    beam-clutter scenario and on a clean control.
//! 2. Motion sensitivity: class separability of a one-motion corpus vs a
//!    multi-motion corpus, scored by a training-free centroid classifier.
//! 3. Data volume: a learning curve over growing training fractions.
//! 4. Sample dilution: stacked multi-antenna frames vs per-antenna frames.
//! 5. Reported rate: identical samples under different nominal rates.

use super::metrics::Metrics;
use super::report::{intervals_overlap, mean, rows_from_trial, MetricsRow};
use super::split::{split_dataset, SplitSpec};
use super::training::{evaluate, train_with_early_stopping, LabeledSet, TrainConfig};
use super::ExpError;
use crate::models::{Model, ModelConfig, ModelFamily};
use crate::nn::Tensor4;
use crate::preprocess::DfsFrame;

/// Motion-class cardinality; class ids are dense in `0..CLASSES`.
const CLASSES: usize = 4;

/// Replication protocol shared by all drivers.
#[derive(Clone, Debug)]
pub struct HypothesisConfig {
    /// One full replicate (split, init, shuffle) per seed.
    pub seeds: Vec<u64>,
    /// Single-run protocol: one replicate at the default split seed.
    pub paper_protocol: bool,
    pub train: TrainConfig,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        HypothesisConfig {
            seeds: (0..5).collect(),
            paper_protocol: false,
            train: TrainConfig::default(),
        }
    }
}

impl HypothesisConfig {
    pub fn validate(&self) -> Result<(), ExpError> {
        self.train.validate()?;
        if !self.paper_protocol && self.seeds.is_empty() {
            return Err(ExpError::Config("replication needs at least one seed".into()));
        }
        Ok(())
    }

    fn runs(&self) -> Vec<u64> {
        if self.paper_protocol {
            vec![SplitSpec::default().seed]
        } else {
            self.seeds.clone()
        }
    }
}

/// A small fixed architecture sized for desk-scale experiment runs.
pub fn desk_model(input: [usize; 3], classes: usize, family: ModelFamily) -> ModelConfig {
    ModelConfig {
        family,
        classes,
        input,
        first_filters: input[2].max(4),
        first_kernel: (5, 5),
        first_pool: (2, 2),
        depth: 2,
        expansion: 2,
        residual: false,
        se_rate: 0.25,
        repetitions: 0,
        block_pool: (2, 2),
        final_kernel: (3, 3),
        classifier_depth: 1,
        classifier_width: 32,
        attn_a_kernel: (5, 5),
        attn_b_pool: (2, 2),
        attn_b_stride: (2, 2),
        attn_b_depth: 1,
        attn_b_width: 32,
        decoder_kernel: (5, 5),
        batch_norm: true,
    }
}

/// Per-arm test-set outcomes across replicates.
#[derive(Clone, Debug)]
pub struct ArmStats {
    pub arm: String,
    pub seeds: Vec<u64>,
    pub kappas: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub losses: Vec<f64>,
    /// Replicates whose training aborted numerically.
    pub failed: usize,
}

impl ArmStats {
    fn new(arm: impl Into<String>) -> Self {
        ArmStats {
            arm: arm.into(),
            seeds: Vec::new(),
            kappas: Vec::new(),
            accuracies: Vec::new(),
            losses: Vec::new(),
            failed: 0,
        }
    }

    fn push(&mut self, seed: u64, m: &Metrics) {
        self.seeds.push(seed);
        self.kappas.push(m.kappa);
        self.accuracies.push(m.accuracy);
        self.losses.push(m.loss);
    }

    pub fn kappa_mean(&self) -> f64 {
        mean(&self.kappas)
    }

    pub fn kappa_ci95(&self) -> (f64, f64) {
        super::report::ci95(&self.kappas)
    }

    pub fn accuracy_mean(&self) -> f64 {
        mean(&self.accuracies)
    }
}

/// Outcome of one driver: arm summaries, the full row log, and derived
/// key-value findings.
#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub id: u8,
    pub arms: Vec<ArmStats>,
    /// Epoch rows from every trial plus one `epoch = 0` test-set row per
    /// replicate.
    pub rows: Vec<MetricsRow>,
    pub notes: Vec<(String, String)>,
}

impl HypothesisReport {
    pub fn arm(&self, name: &str) -> Option<&ArmStats> {
        self.arms.iter().find(|a| a.arm == name)
    }

    /// Flattens the report for the key-value serializer.
    pub fn kv_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![("hypothesis".to_string(), self.id.to_string())];
        for a in &self.arms {
            pairs.push((format!("{}.replicates", a.arm), a.seeds.len().to_string()));
            pairs.push((format!("{}.failed", a.arm), a.failed.to_string()));
            if !a.kappas.is_empty() {
                let (lo, hi) = a.kappa_ci95();
                pairs.push((format!("{}.kappa_mean", a.arm), a.kappa_mean().to_string()));
                pairs.push((format!("{}.kappa_ci95", a.arm), format!("{lo} {hi}")));
                pairs.push((
                    format!("{}.accuracy_mean", a.arm),
                    a.accuracy_mean().to_string(),
                ));
            }
        }
        pairs.extend(self.notes.iter().cloned());
        pairs
    }
}

fn subset<'a>(frames: &'a [DfsFrame], idx: &[usize]) -> Vec<&'a DfsFrame> {
    idx.iter().map(|&i| &frames[i]).collect()
}

fn set_from(frames: &[DfsFrame], idx: &[usize]) -> Result<LabeledSet<f32>, ExpError> {
    LabeledSet::from_frames(&subset(frames, idx), CLASSES)
}

fn frame_input(frames: &[DfsFrame]) -> Result<[usize; 3], ExpError> {
    let Some(f) = frames.first() else {
        return Err(ExpError::EmptyDataset("no frames supplied".into()));
    };
    Ok([f.b, f.t, f.a])
}

/// Trains one replicate and evaluates it on the held-out set. History rows
/// join the log along with an `epoch = 0` row carrying the test metrics; a
/// numerically failed trial is counted and still evaluated at whatever
/// parameters were restored.
#[allow(clippy::too_many_arguments)]
fn train_and_test(
    seed: u64,
    fold: usize,
    model_cfg: &ModelConfig,
    train: &LabeledSet<f32>,
    val: &LabeledSet<f32>,
    test: &LabeledSet<f32>,
    target_pool: Option<&Tensor4<f32>>,
    tcfg: &TrainConfig,
    rows: &mut Vec<MetricsRow>,
    stats: &mut ArmStats,
) -> Result<(), ExpError> {
    let model = Model::build(model_cfg)?;
    let mut store = model.init_params::<f32>(seed);
    let trial = train_with_early_stopping(
        &model,
        &mut store,
        train,
        val,
        target_pool,
        &TrainConfig { seed, ..*tcfg },
    )?;
    if !trial.completed() {
        stats.failed += 1;
    }
    rows.extend(rows_from_trial(&stats.arm, seed, fold, &trial));
    let m = evaluate(&model, &store, test, tcfg.batch_size)?;
    rows.push(MetricsRow {
        arm: stats.arm.clone(),
        seed,
        fold,
        epoch: 0,
        loss: 0.0,
        val_loss: m.loss,
        accuracy: m.accuracy,
        kappa: m.kappa,
    });
    stats.push(seed, &m);
    Ok(())
}

/// Distinct TX beams present, in ascending order.
fn tx_beams(frames: &[DfsFrame]) -> Vec<u32> {
    let mut beams: Vec<u32> = frames.iter().map(|f| f.meta.domain.tx_beam).collect();
    beams.sort_unstable();
    beams.dedup();
    beams
}

/// Domain shift: for each replicate, an in-domain record split and a
/// leave-one-TX-beam-out split (the held-out beam rotates with the
/// replicate index and lands in the `fold` column).
pub fn run_h1(
    shifted: &[DfsFrame],
    control: &[DfsFrame],
    cfg: &HypothesisConfig,
) -> Result<HypothesisReport, ExpError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut arms = Vec::new();
    let mut notes = Vec::new();
    for (name, frames) in [("shift", shifted), ("control", control)] {
        let (in_arm, cross_arm) = h1_pair(name, frames, cfg, &mut rows)?;
        notes.push((
            format!("{name}.kappa_gap"),
            (in_arm.kappa_mean() - cross_arm.kappa_mean()).to_string(),
        ));
        notes.push((
            format!("{name}.kappa_ci_overlap"),
            intervals_overlap(in_arm.kappa_ci95(), cross_arm.kappa_ci95()).to_string(),
        ));
        arms.push(in_arm);
        arms.push(cross_arm);
    }
    Ok(HypothesisReport { id: 1, arms, rows, notes })
}

fn h1_pair(
    prefix: &str,
    frames: &[DfsFrame],
    cfg: &HypothesisConfig,
    rows: &mut Vec<MetricsRow>,
) -> Result<(ArmStats, ArmStats), ExpError> {
    let model_cfg = desk_model(frame_input(frames)?, CLASSES, ModelFamily::Standard);
    let beams = tx_beams(frames);
    if beams.len() < 2 {
        return Err(ExpError::TooFewDomains(format!(
            "{prefix}: beam holdout needs at least 2 TX beams, found {}",
            beams.len()
        )));
    }
    let mut in_arm = ArmStats::new(format!("{prefix}_in_domain"));
    let mut cross_arm = ArmStats::new(format!("{prefix}_cross_domain"));
    let base = SplitSpec::default();
    for (i, &seed) in cfg.runs().iter().enumerate() {
        let split = split_dataset(frames.len(), &SplitSpec { seed, ..base })?;
        train_and_test(
            seed,
            0,
            &model_cfg,
            &set_from(frames, &split.train)?,
            &set_from(frames, &split.val)?,
            &set_from(frames, &split.test)?,
            None,
            &cfg.train,
            rows,
            &mut in_arm,
        )?;

        let held = beams[i % beams.len()];
        let test_idx: Vec<usize> = (0..frames.len())
            .filter(|&j| frames[j].meta.domain.tx_beam == held)
            .collect();
        let rest: Vec<usize> = (0..frames.len())
            .filter(|&j| frames[j].meta.domain.tx_beam != held)
            .collect();
        // The held-out beam becomes the test set; the remainder re-splits
        // into train/val at the same relative proportions.
        let t_frac = base.train / (base.train + base.val);
        let sub = split_dataset(
            rest.len(),
            &SplitSpec { train: t_frac, val: 1.0 - t_frac, test: 0.0, seed, ..base },
        )?;
        let train_idx: Vec<usize> = sub.train.iter().map(|&j| rest[j]).collect();
        let val_idx: Vec<usize> = sub.val.iter().map(|&j| rest[j]).collect();
        train_and_test(
            seed,
            held as usize,
            &model_cfg,
            &set_from(frames, &train_idx)?,
            &set_from(frames, &val_idx)?,
            &set_from(frames, &test_idx)?,
            None,
            &cfg.train,
            rows,
            &mut cross_arm,
        )?;
    }
    Ok((in_arm, cross_arm))
}

/// Per-frame Doppler profile: mean magnitude per Doppler bin over antennas
/// and time, L2-normalized. Scale-free, so frame-level gain drops out.
fn doppler_profile(f: &DfsFrame) -> Vec<f64> {
    let mut d = vec![0.0f64; f.b];
    for a in 0..f.a {
        for b in 0..f.b {
            for t in 0..f.t {
                d[b] += f.at(a, b, t);
            }
        }
    }
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut d {
            *x /= norm;
        }
    }
    d
}

/// Training-free separability score: fit per-class profile centroids on the
/// training records, classify the test records by nearest centroid, and
/// report the resulting agreement metrics. `loss` carries the mean squared
/// distance to the winning centroid.
fn centroid_metrics(
    frames: &[DfsFrame],
    train_idx: &[usize],
    test_idx: &[usize],
) -> Result<Metrics, ExpError> {
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(ExpError::EmptyDataset("centroid scoring needs both subsets".into()));
    }
    let b = frames[train_idx[0]].b;
    let mut sums = vec![vec![0.0f64; b]; CLASSES];
    let mut counts = vec![0usize; CLASSES];
    for &i in train_idx {
        let c = frames[i].meta.class.id() as usize;
        for (s, v) in sums[c].iter_mut().zip(doppler_profile(&frames[i])) {
            *s += v;
        }
        counts[c] += 1;
    }
    let fitted: Vec<usize> = (0..CLASSES).filter(|&c| counts[c] > 0).collect();
    if fitted.is_empty() {
        return Err(ExpError::EmptyDataset("no fitted centroids".into()));
    }
    for &c in &fitted {
        for s in &mut sums[c] {
            *s /= counts[c] as f64;
        }
    }

    let mut confusion = super::metrics::Confusion::new(CLASSES);
    let mut dist_sum = 0.0;
    for &i in test_idx {
        let p = doppler_profile(&frames[i]);
        let mut best = fitted[0];
        let mut best_d = f64::INFINITY;
        for &c in &fitted {
            let d: f64 = p.iter().zip(&sums[c]).map(|(x, m)| (x - m) * (x - m)).sum();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        dist_sum += best_d;
        confusion.record(frames[i].meta.class.id() as usize, best);
    }
    let accuracy = confusion.accuracy();
    let kappa = super::metrics::cohen_kappa(&confusion)?;
    Ok(Metrics { loss: dist_sum / test_idx.len() as f64, accuracy, kappa, confusion })
}

/// Motion sensitivity: centroid separability of a one-motion corpus vs a
/// multi-motion corpus under the same replicated splits.
pub fn run_h2(
    single_motion: &[DfsFrame],
    multi_motion: &[DfsFrame],
    cfg: &HypothesisConfig,
) -> Result<HypothesisReport, ExpError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut arms = Vec::new();
    for (name, frames) in [("single_motion", single_motion), ("multi_motion", multi_motion)] {
        if frames.is_empty() {
            return Err(ExpError::EmptyDataset(format!("{name}: no frames supplied")));
        }
        let mut arm = ArmStats::new(name);
        for &seed in &cfg.runs() {
            let split =
                split_dataset(frames.len(), &SplitSpec { seed, ..SplitSpec::default() })?;
            let m = centroid_metrics(frames, &split.train, &split.test)?;
            rows.push(MetricsRow {
                arm: arm.arm.clone(),
                seed,
                fold: 0,
                epoch: 0,
                loss: 0.0,
                val_loss: m.loss,
                accuracy: m.accuracy,
                kappa: m.kappa,
            });
            arm.push(seed, &m);
        }
        arms.push(arm);
    }
    let notes = vec![(
        "separability_gap".to_string(),
        (arms[1].kappa_mean() - arms[0].kappa_mean()).to_string(),
    )];
    Ok(HypothesisReport { id: 2, arms, rows, notes })
}

/// Data volume: learning curve over nested training fractions of each
/// replicate's shuffled training subset.
pub fn run_h3(frames: &[DfsFrame], cfg: &HypothesisConfig) -> Result<HypothesisReport, ExpError> {
    cfg.validate()?;
    let model_cfg = desk_model(frame_input(frames)?, CLASSES, ModelFamily::Standard);
    let fractions = [0.25, 0.5, 0.75, 1.0];
    let mut arms: Vec<ArmStats> = fractions
        .iter()
        .map(|f| ArmStats::new(format!("train_{:.0}", f * 100.0)))
        .collect();
    let mut rows = Vec::new();
    for &seed in &cfg.runs() {
        let split = split_dataset(frames.len(), &SplitSpec { seed, ..SplitSpec::default() })?;
        let val = set_from(frames, &split.val)?;
        let test = set_from(frames, &split.test)?;
        for (fi, &frac) in fractions.iter().enumerate() {
            // The split's train order is already shuffled; a prefix is a
            // uniform subsample, and fractions nest.
            let k = ((split.train.len() as f64 * frac).round() as usize).max(1);
            let train = set_from(frames, &split.train[..k])?;
            train_and_test(
                seed,
                0,
                &model_cfg,
                &train,
                &val,
                &test,
                None,
                &cfg.train,
                &mut rows,
                &mut arms[fi],
            )?;
        }
    }
    let notes = vec![(
        "kappa_gain_full_vs_quarter".to_string(),
        (arms[3].kappa_mean() - arms[0].kappa_mean()).to_string(),
    )];
    Ok(HypothesisReport { id: 3, arms, rows, notes })
}

/// Sample dilution: stacked multi-antenna frames vs per-antenna frames of
/// the same recordings, trained under the same protocol.
pub fn run_h4(
    stacked: &[DfsFrame],
    unstacked: &[DfsFrame],
    cfg: &HypothesisConfig,
) -> Result<HypothesisReport, ExpError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut arms = Vec::new();
    for (name, frames) in [("stacked", stacked), ("unstacked", unstacked)] {
        let model_cfg = desk_model(frame_input(frames)?, CLASSES, ModelFamily::Standard);
        let mut arm = ArmStats::new(name);
        for &seed in &cfg.runs() {
            let split =
                split_dataset(frames.len(), &SplitSpec { seed, ..SplitSpec::default() })?;
            train_and_test(
                seed,
                0,
                &model_cfg,
                &set_from(frames, &split.train)?,
                &set_from(frames, &split.val)?,
                &set_from(frames, &split.test)?,
                None,
                &cfg.train,
                &mut rows,
                &mut arm,
            )?;
        }
        arms.push(arm);
    }
    let gap = arms[0].kappa_mean() - arms[1].kappa_mean();
    let notes = vec![
        ("stacked_minus_unstacked_kappa".to_string(), gap.to_string()),
        ("unstacked_no_better".to_string(), (gap >= 0.0).to_string()),
    ];
    Ok(HypothesisReport { id: 4, arms, rows, notes })
}

/// Reported rate: the same samples under two nominal rates. The spectrogram
/// values are rate-independent, so paired replicates must coincide; the
/// notes record whether they did.
pub fn run_h5(
    low_rate: &[DfsFrame],
    high_rate: &[DfsFrame],
    cfg: &HypothesisConfig,
) -> Result<HypothesisReport, ExpError> {
    cfg.validate()?;
    if low_rate.len() != high_rate.len() {
        return Err(ExpError::Config(format!(
            "paired corpora differ in size: {} vs {}",
            low_rate.len(),
            high_rate.len()
        )));
    }
    if low_rate.is_empty() {
        return Err(ExpError::EmptyDataset("no frames supplied".into()));
    }
    let tensors_identical = low_rate.iter().zip(high_rate).all(|(l, h)| {
        (l.a, l.b, l.t) == (h.a, h.b, h.t) && l.values() == h.values()
    });

    let mut rows = Vec::new();
    let mut arms = Vec::new();
    for (name, frames) in [("low_rate", low_rate), ("high_rate", high_rate)] {
        let model_cfg = desk_model(frame_input(frames)?, CLASSES, ModelFamily::Standard);
        let mut arm = ArmStats::new(name);
        for &seed in &cfg.runs() {
            let split =
                split_dataset(frames.len(), &SplitSpec { seed, ..SplitSpec::default() })?;
            train_and_test(
                seed,
                0,
                &model_cfg,
                &set_from(frames, &split.train)?,
                &set_from(frames, &split.val)?,
                &set_from(frames, &split.test)?,
                None,
                &cfg.train,
                &mut rows,
                &mut arm,
            )?;
        }
        arms.push(arm);
    }
    let metrics_identical = arms[0].kappas == arms[1].kappas
        && arms[0].accuracies == arms[1].accuracies
        && arms[0].losses == arms[1].losses;
    let notes = vec![
        ("reported_fs_low".to_string(), low_rate[0].reported_fs.to_string()),
        ("reported_fs_high".to_string(), high_rate[0].reported_fs.to_string()),
        ("tensors_identical".to_string(), tensors_identical.to_string()),
        ("metrics_identical".to_string(), metrics_identical.to_string()),
    ];
    Ok(HypothesisReport { id: 5, arms, rows, notes })
}

/// Frame corpora for one hypothesis run.
#[derive(Clone, Debug)]
pub enum HypothesisInput<'a> {
    DomainShift { shifted: &'a [DfsFrame], control: &'a [DfsFrame] },
    MotionSensitivity { single_motion: &'a [DfsFrame], multi_motion: &'a [DfsFrame] },
    DataVolume { frames: &'a [DfsFrame] },
    SampleDilution { stacked: &'a [DfsFrame], unstacked: &'a [DfsFrame] },
    ReportedRate { low_rate: &'a [DfsFrame], high_rate: &'a [DfsFrame] },
}

impl HypothesisInput<'_> {
    pub fn id(&self) -> u8 {
        match self {
            HypothesisInput::DomainShift { .. } => 1,
            HypothesisInput::MotionSensitivity { .. } => 2,
            HypothesisInput::DataVolume { .. } => 3,
            HypothesisInput::SampleDilution { .. } => 4,
            HypothesisInput::ReportedRate { .. } => 5,
        }
    }
}

pub fn run_hypothesis_suite(
    input: &HypothesisInput,
    cfg: &HypothesisConfig,
) -> Result<HypothesisReport, ExpError> {
    match input {
        HypothesisInput::DomainShift { shifted, control } => run_h1(shifted, control, cfg),
        HypothesisInput::MotionSensitivity { single_motion, multi_motion } => {
            run_h2(single_motion, multi_motion, cfg)
        }
        HypothesisInput::DataVolume { frames } => run_h3(frames, cfg),
        HypothesisInput::SampleDilution { stacked, unstacked } => {
            run_h4(stacked, unstacked, cfg)
        }
        HypothesisInput::ReportedRate { low_rate, high_rate } => {
            run_h5(low_rate, high_rate, cfg)
        }
    }
}

//! Successive-halving hyperparameter search with checkpointed resumption.
//!
//! One bracket samples `n0` architectures, trains every survivor a few more
//! epochs each rung, ranks by validation loss, and keeps the top `1/eta`:
//! cheap rungs eliminate most candidates before anyone gets expensive.
//! Candidate parameters round-trip through checkpoint files between rungs,
//! and every rung appends to an audit log that makes the spent epoch budget
//! recountable.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::experiments::{
    train_with_early_stopping, ExpError, LabeledSet, TrainConfig, TrialStatus,
};
use crate::models::{Model, ModelConfig, ModelFamily, SearchSpace};
use crate::nn::{load_checkpoint_into, save_checkpoint, NnError};

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("all candidates failed")]
    AllFailed,
    #[error(transparent)]
    Exp(#[from] ExpError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("tuner i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Bracket geometry: `n0` initial candidates culled by `eta` per rung over
/// `iterations` rungs, each granting `min(cap, r0 * eta^i)` further epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbandConfig {
    pub n0: usize,
    pub eta: usize,
    pub iterations: usize,
    pub r0: usize,
    pub cap: usize,
    pub seed: u64,
}

impl Default for HyperbandConfig {
    fn default() -> Self {
        HyperbandConfig { n0: 27, eta: 3, iterations: 5, r0: 2, cap: 100, seed: 42 }
    }
}

impl HyperbandConfig {
    pub fn validate(&self) -> Result<(), TuneError> {
        if self.n0 == 0 {
            return Err(TuneError::Config("need at least one candidate".into()));
        }
        if self.eta < 2 {
            return Err(TuneError::Config(format!(
                "culling factor must be at least 2, got {}",
                self.eta
            )));
        }
        if self.iterations == 0 {
            return Err(TuneError::Config("need at least one iteration".into()));
        }
        if self.r0 == 0 || self.cap == 0 {
            return Err(TuneError::Config("epoch budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Candidates trained per rung: `n0`, then `floor(prev / eta)` clamped to 1.
pub fn survivor_schedule(cfg: &HyperbandConfig) -> Vec<usize> {
    let mut counts = Vec::with_capacity(cfg.iterations);
    let mut n = cfg.n0;
    for _ in 0..cfg.iterations {
        counts.push(n);
        n = (n / cfg.eta).max(1);
    }
    counts
}

/// Additional epochs granted at each rung: `min(cap, r0 * eta^i)`.
pub fn rung_epochs(cfg: &HyperbandConfig) -> Vec<usize> {
    (0..cfg.iterations)
        .map(|i| {
            cfg.r0
                .saturating_mul(cfg.eta.saturating_pow(i as u32))
                .min(cfg.cap)
        })
        .collect()
}

/// Upper bound on epochs a full bracket may spend.
pub fn planned_budget(cfg: &HyperbandConfig) -> usize {
    survivor_schedule(cfg)
        .iter()
        .zip(rung_epochs(cfg))
        .map(|(&n, r)| n * r)
        .sum()
}

/// Draws `n` architectures from the space, deterministically in `seed`.
/// Candidate ids are positions in the returned vector.
pub fn sample_configs(
    space: &SearchSpace,
    family: ModelFamily,
    classes: usize,
    input: [usize; 3],
    n: usize,
    seed: u64,
) -> Vec<ModelConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| space.sample(family, classes, input, &mut rng)).collect()
}

pub const AUDIT_CSV_HEADER: &str =
    "iteration,candidate_id,epochs_total,val_loss,accuracy,kappa,status";

/// One rung of one candidate in the audit log. `epochs_total` is the
/// candidate's cumulative count of epochs actually trained, which can sit
/// below the granted budget when early stopping fires.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub iteration: usize,
    pub candidate_id: usize,
    pub epochs_total: usize,
    pub val_loss: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub status: TrialStatus,
}

impl AuditRow {
    fn status_str(&self) -> &'static str {
        match self.status {
            TrialStatus::Completed => "ok",
            TrialStatus::Failed(_) => "failed",
        }
    }
}

pub fn audit_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(AUDIT_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration,
            r.candidate_id,
            r.epochs_total,
            r.val_loss,
            r.accuracy,
            r.kappa,
            r.status_str()
        ));
    }
    out
}

pub fn write_audit_csv(path: &Path, rows: &[AuditRow]) -> Result<(), TuneError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(audit_csv(rows).as_bytes())?;
    Ok(())
}

/// Final standing of one candidate.
#[derive(Clone, Debug)]
pub struct CandidateOutcome {
    pub id: usize,
    pub config: ModelConfig,
    pub epochs_total: usize,
    pub val_loss: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub status: TrialStatus,
}

/// Result of one bracket: the winner, the full audit, and the budget
/// accounting.
#[derive(Clone, Debug)]
pub struct TuneOutcome {
    pub best: CandidateOutcome,
    pub audit: Vec<AuditRow>,
    pub configs: Vec<ModelConfig>,
    pub planned_budget: usize,
    pub spent_epochs: usize,
}

/// What one candidate's rung of training produced.
struct RungReport {
    epochs_ran: usize,
    val_loss: f64,
    accuracy: f64,
    kappa: f64,
    status: TrialStatus,
}

#[derive(Clone, Debug)]
struct Standing {
    id: usize,
    val_loss: f64,
    failed: bool,
}

/// Orders candidates for culling: completed before failed, then ascending
/// validation loss (non-finite losses last among completed), ties broken by
/// candidate index.
fn rank(mut standings: Vec<Standing>) -> Vec<Standing> {
    standings.sort_by(|a, b| {
        a.failed
            .cmp(&b.failed)
            .then_with(|| {
                let la = if a.val_loss.is_finite() { a.val_loss } else { f64::INFINITY };
                let lb = if b.val_loss.is_finite() { b.val_loss } else { f64::INFINITY };
                la.partial_cmp(&lb).unwrap()
            })
            .then_with(|| a.id.cmp(&b.id))
    });
    standings
}

/// The bracket scheduler, independent of how a rung is trained. `trainer`
/// is called as `(candidate_id, iteration, granted_epochs)`; failed rungs
/// rank behind every completed one and their candidates never reappear.
fn run_bracket<F>(
    cfg: &HyperbandConfig,
    mut trainer: F,
) -> Result<(Vec<AuditRow>, Option<usize>, usize), TuneError>
where
    F: FnMut(usize, usize, usize) -> Result<RungReport, TuneError>,
{
    let counts = survivor_schedule(cfg);
    let epochs = rung_epochs(cfg);
    let mut alive: Vec<usize> = (0..cfg.n0).collect();
    let mut cum_epochs = vec![0usize; cfg.n0];
    let mut audit = Vec::new();
    let mut spent = 0usize;

    for (it, (&count, &grant)) in counts.iter().zip(&epochs).enumerate() {
        alive.truncate(count);
        if alive.is_empty() {
            break;
        }
        let mut standings = Vec::with_capacity(alive.len());
        for &id in &alive {
            let rep = trainer(id, it, grant)?;
            cum_epochs[id] += rep.epochs_ran;
            spent += rep.epochs_ran;
            standings.push(Standing {
                id,
                val_loss: rep.val_loss,
                failed: rep.status != TrialStatus::Completed,
            });
            audit.push(AuditRow {
                iteration: it,
                candidate_id: id,
                epochs_total: cum_epochs[id],
                val_loss: rep.val_loss,
                accuracy: rep.accuracy,
                kappa: rep.kappa,
                status: rep.status,
            });
        }
        alive = rank(standings)
            .into_iter()
            .filter(|s| !s.failed)
            .map(|s| s.id)
            .collect();
    }
    Ok((audit, alive.first().copied(), spent))
}

fn candidate_paths(run_dir: &Path, id: usize) -> (PathBuf, PathBuf) {
    (
        run_dir.join(format!("candidate_{id:04}.cfg")),
        run_dir.join(format!("candidate_{id:04}.ckpt")),
    )
}

/// Mixes a stream id into the bracket seed (splitmix-style) so every
/// candidate and rung trains under a distinct but reproducible seed.
fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one successive-halving bracket over real training.
///
/// Rung `i` trains each survivor `rung_epochs[i]` further epochs (early
/// stopping can cut that short), resuming from the candidate's checkpoint
/// file; optimizer moments restart at each resumption since checkpoints
/// carry values only. Sampled configs and per-candidate checkpoints land in
/// `run_dir`. Every candidate failing numerically yields `AllFailed`.
#[allow(clippy::too_many_arguments)]
pub fn hyperband_run(
    space: &SearchSpace,
    family: ModelFamily,
    classes: usize,
    train: &LabeledSet<f32>,
    val: &LabeledSet<f32>,
    tcfg: &TrainConfig,
    cfg: &HyperbandConfig,
    run_dir: &Path,
) -> Result<TuneOutcome, TuneError> {
    cfg.validate()?;
    tcfg.validate()?;
    std::fs::create_dir_all(run_dir)?;

    let configs = sample_configs(
        space,
        family,
        classes,
        train.input_dims(),
        cfg.n0,
        cfg.seed,
    );
    for (id, c) in configs.iter().enumerate() {
        let (cfg_path, _) = candidate_paths(run_dir, id);
        std::fs::write(&cfg_path, c.to_text())?;
    }

    let mut trained = vec![false; cfg.n0];
    let (audit, winner, spent) = run_bracket(cfg, |id, it, grant| {
        let model = Model::build(&configs[id])?;
        let mut store = model.init_params::<f32>(mix_seed(cfg.seed, id as u64, u64::MAX));
        let (_, ckpt) = candidate_paths(run_dir, id);
        if trained[id] {
            load_checkpoint_into(&ckpt, &mut store)?;
        }
        let trial = train_with_early_stopping(
            &model,
            &mut store,
            train,
            val,
            None,
            &TrainConfig {
                max_epochs: grant,
                seed: mix_seed(cfg.seed, id as u64, it as u64),
                ..*tcfg
            },
        )?;
        save_checkpoint(&store, &ckpt)?;
        trained[id] = true;
        let (accuracy, kappa) = if trial.best_epoch > 0 {
            let e = &trial.history[trial.best_epoch - 1];
            (e.val_accuracy, e.val_kappa)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(RungReport {
            epochs_ran: trial.history.len(),
            val_loss: trial.best_val_loss,
            accuracy,
            kappa,
            status: trial.status,
        })
    })?;

    let Some(winner) = winner else {
        return Err(TuneError::AllFailed);
    };
    let last: BTreeMap<usize, &AuditRow> =
        audit.iter().map(|r| (r.candidate_id, r)).collect();
    let w = last[&winner];
    let planned = planned_budget(cfg);
    debug_assert!(spent <= planned);
    Ok(TuneOutcome {
        best: CandidateOutcome {
            id: winner,
            config: configs[winner].clone(),
            epochs_total: w.epochs_total,
            val_loss: w.val_loss,
            accuracy: w.accuracy,
            kappa: w.kappa,
            status: w.status.clone(),
        },
        audit,
        configs,
        planned_budget: planned,
        spent_epochs: spent,
    })
}

/// Multi-bracket variant: bracket `k` shrinks the candidate count by
/// `eta^k` and raises the first rung's grant by the same factor, trading
/// breadth for per-candidate depth. Each bracket writes under
/// `run_dir/bracket_<k>`.
#[allow(clippy::too_many_arguments)]
pub fn hyperband_multibracket(
    space: &SearchSpace,
    family: ModelFamily,
    classes: usize,
    train: &LabeledSet<f32>,
    val: &LabeledSet<f32>,
    tcfg: &TrainConfig,
    cfg: &HyperbandConfig,
    run_dir: &Path,
    brackets: usize,
) -> Result<Vec<TuneOutcome>, TuneError> {
    if brackets == 0 {
        return Err(TuneError::Config("need at least one bracket".into()));
    }
    let mut outcomes = Vec::with_capacity(brackets);
    for k in 0..brackets {
        let shrink = cfg.eta.saturating_pow(k as u32);
        let bracket_cfg = HyperbandConfig {
            n0: (cfg.n0 / shrink).max(1),
            r0: cfg.r0.saturating_mul(shrink).min(cfg.cap),
            iterations: cfg.iterations.saturating_sub(k).max(1),
            seed: mix_seed(cfg.seed, k as u64, 0x6272_6163),
            ..*cfg
        };
        let dir = run_dir.join(format!("bracket_{k}"));
        outcomes.push(hyperband_run(
            space, family, classes, train, val, tcfg, &bracket_cfg, &dir,
        )?);
    }
    Ok(outcomes)
}

//! `jcas tune`: successive-halving architecture search over a DFS archive.
//! Candidate configs, per-rung checkpoints, the audit CSV, and the winner's
//! config land under <run>/tune/<name>/.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use jcas_core::experiments::{split_dataset, SplitSpec, TrainConfig};
use jcas_core::models::{ModelFamily, SearchSpace};
use jcas_core::tuning::{
    hyperband_multibracket, hyperband_run, write_audit_csv, HyperbandConfig, TuneOutcome,
};

use crate::error::CliError;
use crate::manifest::Manifest;

use super::train::{family_name, parse_family};
use super::DfsCorpus;

#[derive(Args, Debug)]
pub struct TuneArgs {
    /// Run directory.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// DFS archive directory (default: <run>/dfs).
    #[arg(long, value_name = "DIR")]
    pub dfs: Option<PathBuf>,

    /// Model family: standard, indep, or adapt.
    #[arg(long, default_value = "standard", value_parser = parse_family)]
    pub model: ModelFamily,

    /// Output name under <run>/tune/ (default: the family name).
    #[arg(long)]
    pub name: Option<String>,

    /// Initial candidate count (first rung width).
    #[arg(long, default_value_t = 27)]
    pub candidates: usize,

    /// Survivor divisor between rungs.
    #[arg(long, default_value_t = 3)]
    pub eta: usize,

    /// Number of rungs.
    #[arg(long, default_value_t = 5)]
    pub iterations: usize,

    /// Epoch grant at the first rung.
    #[arg(long, default_value_t = 2)]
    pub r0: usize,

    /// Ceiling on any rung's epoch grant.
    #[arg(long, default_value_t = 100)]
    pub cap: usize,

    /// Run several brackets, each trading breadth for rung depth.
    #[arg(long, default_value_t = 1)]
    pub brackets: usize,

    /// Architecture interval set: paper or tiny.
    #[arg(long, default_value = "paper")]
    pub space: String,

    /// Seed for candidate sampling, inits, and batch order.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = 12)]
    pub batch: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    #[arg(long, default_value_t = 5)]
    pub patience: usize,

    /// Accepted for interface symmetry; trials run sequentially.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Shrunk intervals for smoke runs on small frames: every dimension stays
/// buildable down to 8x8 inputs.
fn tiny_space(input_channels: usize) -> SearchSpace {
    SearchSpace {
        first_filters: (input_channels.max(2), input_channels.max(4)),
        first_kernel: (2, 4),
        first_pool: (2, 2),
        depth: (2, 2),
        expansion: (2, 2),
        se_rate: (0.3, 0.6),
        repetitions: (0, 1),
        block_pool: (2, 2),
        final_kernel: (2, 2),
        classifier_depth: (1, 2),
        classifier_width: (8, 16),
        attn_a_kernel: (2, 4),
        attn_b_pool: (2, 2),
        attn_b_stride: (2, 2),
        attn_b_depth: (1, 1),
        attn_b_width: (8, 8),
        decoder_kernel: (2, 4),
    }
}

/// Per-candidate config and checkpoint files the search dropped under the
/// output directory (and bracket subdirectories), sorted for the manifest.
fn candidate_files(dir: &std::path::Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let mut dirs = vec![dir.to_path_buf()];
    while let Some(d) = dirs.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
            let Some(name) = name else { continue };
            if path.is_dir() && name.starts_with("bracket_") {
                dirs.push(path);
            } else if name.starts_with("candidate_") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn run(args: &TuneArgs) -> Result<(), CliError> {
    let dfs_dir = args.dfs.clone().unwrap_or_else(|| args.run.join("dfs"));
    let corpus = DfsCorpus::load(&dfs_dir)?;
    let classes = corpus.classes();

    let split = split_dataset(
        corpus.rows.len(),
        &SplitSpec { seed: args.seed, ..SplitSpec::default() },
    )?;
    let train_set = corpus.labeled_subset(&split.train, classes)?;
    let val_set = corpus.labeled_subset(&split.val, classes)?;

    let input_channels = train_set.input_dims()[2];
    let space = match args.space.as_str() {
        "paper" => SearchSpace::for_input_channels(input_channels),
        "tiny" => tiny_space(input_channels),
        other => {
            return Err(CliError::Spec(format!(
                "unknown space `{other}`, expected paper or tiny"
            )))
        }
    };

    let tcfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        max_epochs: 1,
        patience: args.patience,
        min_delta: 0.0,
        seed: args.seed,
    };
    let cfg = HyperbandConfig {
        n0: args.candidates,
        eta: args.eta,
        iterations: args.iterations,
        r0: args.r0,
        cap: args.cap,
        seed: args.seed,
    };

    let name = args.name.clone().unwrap_or_else(|| family_name(args.model).to_string());
    let dir = args.run.join("tune").join(&name);
    fs::create_dir_all(&dir)?;

    let outcomes: Vec<TuneOutcome> = if args.brackets <= 1 {
        vec![hyperband_run(
            &space, args.model, classes, &train_set, &val_set, &tcfg, &cfg, &dir,
        )?]
    } else {
        hyperband_multibracket(
            &space,
            args.model,
            classes,
            &train_set,
            &val_set,
            &tcfg,
            &cfg,
            &dir,
            args.brackets,
        )?
    };

    // Across brackets the lowest validation loss wins.
    let best_bracket = outcomes
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.best.val_loss.partial_cmp(&b.best.val_loss).unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(k, _)| k)
        .unwrap_or(0);
    let best = &outcomes[best_bracket].best;

    let audit_path = dir.join("audit.csv");
    let all_rows: Vec<_> = outcomes.iter().flat_map(|o| o.audit.iter().cloned()).collect();
    write_audit_csv(&audit_path, &all_rows)?;
    fs::write(dir.join("winner.cfg"), best.config.to_text())?;

    let planned: usize = outcomes.iter().map(|o| o.planned_budget).sum();
    let spent: usize = outcomes.iter().map(|o| o.spent_epochs).sum();

    let mut m = Manifest::new("tune");
    m.param("model", family_name(args.model));
    m.param("name", &name);
    m.param("space", &args.space);
    m.param("candidates", args.candidates);
    m.param("eta", args.eta);
    m.param("iterations", args.iterations);
    m.param("r0", args.r0);
    m.param("cap", args.cap);
    m.param("brackets", args.brackets);
    m.param("seed", args.seed);
    m.input(&args.run, &dfs_dir.join(crate::index::INDEX_FILE))?;
    m.artifact(&args.run, &audit_path)?;
    m.artifact(&args.run, &dir.join("winner.cfg"))?;
    for path in candidate_files(&dir)? {
        m.artifact(&args.run, &path)?;
    }
    m.write(&args.run, &format!("tune_{name}"))?;

    println!("winner_id = {}", best.id);
    println!("winner_bracket = {best_bracket}");
    println!("val_loss = {}", best.val_loss);
    println!("accuracy = {}", best.accuracy);
    println!("kappa = {}", best.kappa);
    println!("planned_budget = {planned}");
    println!("spent_epochs = {spent}");
    println!("audit = {}", audit_path.display());
    Ok(())
}

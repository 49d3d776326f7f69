//! `jcas hypothesis`: run one of the five mechanism studies over DFS
//! archives and write a key-value report plus the per-run metrics CSV.
//!
//! Studies 1, 2, 4, and 5 compare two corpora, supplied as `--dfs` and
//! `--dfs-alt` in the order named by the study: shifted/control,
//! single/multi motion, stacked/unstacked, low/high reported rate. Study 3
//! consumes a single corpus.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use jcas_core::experiments::{
    run_hypothesis_suite, write_kv_report, write_metrics_csv, HypothesisConfig, HypothesisInput,
    TrainConfig,
};

use crate::error::CliError;
use crate::manifest::Manifest;

use super::DfsCorpus;

#[derive(Args, Debug)]
pub struct HypothesisArgs {
    /// Study number, 1 through 5.
    #[arg(value_name = "ID")]
    pub id: u8,

    /// Run directory.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// First (or only) DFS archive directory (default: <run>/dfs).
    #[arg(long, value_name = "DIR")]
    pub dfs: Option<PathBuf>,

    /// Second DFS archive directory for the paired studies.
    #[arg(long, value_name = "DIR")]
    pub dfs_alt: Option<PathBuf>,

    /// Replicate seeds, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,

    /// Single-split protocol instead of seed replication.
    #[arg(long)]
    pub paper_protocol: bool,

    #[arg(long, default_value_t = 100)]
    pub epochs: usize,

    #[arg(long, default_value_t = 12)]
    pub batch: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    #[arg(long, default_value_t = 5)]
    pub patience: usize,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Accepted for interface symmetry; runs are sequential.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub fn run(args: &HypothesisArgs) -> Result<(), CliError> {
    if !(1..=5).contains(&args.id) {
        return Err(CliError::Spec(format!("study id must be 1..=5, got {}", args.id)));
    }
    let needs_alt = args.id != 3;
    let dfs_dir = args.dfs.clone().unwrap_or_else(|| args.run.join("dfs"));
    let alt_dir = match (&args.dfs_alt, needs_alt) {
        (Some(d), true) => Some(d.clone()),
        (None, true) => {
            return Err(CliError::Spec(format!(
                "study {} compares two corpora; pass --dfs-alt DIR",
                args.id
            )))
        }
        (Some(_), false) => {
            return Err(CliError::Spec("study 3 takes a single corpus; drop --dfs-alt".into()))
        }
        (None, false) => None,
    };

    let first = DfsCorpus::load(&dfs_dir)?;
    let alt = alt_dir.as_ref().map(|d| DfsCorpus::load(d)).transpose()?;

    let cfg = HypothesisConfig {
        seeds: args.seeds.clone(),
        paper_protocol: args.paper_protocol,
        train: TrainConfig {
            learning_rate: args.lr,
            batch_size: args.batch,
            max_epochs: args.epochs,
            patience: args.patience,
            min_delta: 0.0,
            seed: args.seed,
        },
    };

    let a = first.frames.as_slice();
    let b = alt.as_ref().map(|c| c.frames.as_slice());
    let input = match args.id {
        1 => HypothesisInput::DomainShift { shifted: a, control: b.unwrap() },
        2 => HypothesisInput::MotionSensitivity { single_motion: a, multi_motion: b.unwrap() },
        3 => HypothesisInput::DataVolume { frames: a },
        4 => HypothesisInput::SampleDilution { stacked: a, unstacked: b.unwrap() },
        _ => HypothesisInput::ReportedRate { low_rate: a, high_rate: b.unwrap() },
    };
    let report = run_hypothesis_suite(&input, &cfg)?;

    let reports = args.run.join("reports");
    fs::create_dir_all(&reports)?;
    let kv_path = reports.join(format!("h{}.txt", args.id));
    let csv_path = reports.join(format!("h{}_metrics.csv", args.id));
    let pairs = report.kv_pairs();
    write_kv_report(&kv_path, &pairs)?;
    write_metrics_csv(&csv_path, &report.rows)?;

    let mut m = Manifest::new("hypothesis");
    m.param("id", args.id);
    m.param("seeds", args.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","));
    m.param("paper_protocol", args.paper_protocol);
    m.param("epochs", args.epochs);
    m.input(&args.run, &dfs_dir.join(crate::index::INDEX_FILE))?;
    if let Some(d) = &alt_dir {
        m.input(&args.run, &d.join(crate::index::INDEX_FILE))?;
    }
    m.artifact(&args.run, &kv_path)?;
    m.artifact(&args.run, &csv_path)?;
    m.write(&args.run, &format!("hypothesis_{}", args.id))?;

    for (k, v) in &pairs {
        println!("{k} = {v}");
    }
    println!("report = {}", kv_path.display());
    Ok(())
}

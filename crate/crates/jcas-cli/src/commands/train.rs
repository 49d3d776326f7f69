//! `jcas train`: fit one model on a DFS archive and persist everything a
//! later `eval` needs: the architecture text, the weight checkpoint, the
//! split, and the metrics CSV whose epoch-0 row is the held-out test result.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use jcas_core::experiments::{
    evaluate, split_dataset, train_with_early_stopping, MetricsRow, SplitSpec, TrainConfig,
    TrialStatus,
};
use jcas_core::models::{Model, ModelConfig, ModelFamily};
use jcas_core::nn::save_checkpoint;

use crate::error::CliError;
use crate::manifest::Manifest;

use super::{model_dir, write_split, DfsCorpus};

pub fn parse_family(s: &str) -> Result<ModelFamily, String> {
    match s {
        "standard" => Ok(ModelFamily::Standard),
        "indep" => Ok(ModelFamily::DomainIndependent),
        "adapt" => Ok(ModelFamily::DomainAdaptation),
        _ => Err(format!("unknown model `{s}`, expected standard, indep, or adapt")),
    }
}

pub fn family_name(family: ModelFamily) -> &'static str {
    match family {
        ModelFamily::Standard => "standard",
        ModelFamily::DomainIndependent => "indep",
        ModelFamily::DomainAdaptation => "adapt",
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run directory.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// DFS archive directory (default: <run>/dfs).
    #[arg(long, value_name = "DIR")]
    pub dfs: Option<PathBuf>,

    /// Model family: standard, indep, or adapt.
    #[arg(long, default_value = "standard", value_parser = parse_family)]
    pub model: ModelFamily,

    /// Architecture description file; defaults to the desk-scale reference
    /// architecture for the chosen family.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output name under <run>/models/ (default: the family name).
    #[arg(long)]
    pub name: Option<String>,

    /// Seed for the split, the weight init, and batch shuffling.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = 100)]
    pub epochs: usize,

    #[arg(long, default_value_t = 12)]
    pub batch: usize,

    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,

    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 5)]
    pub patience: usize,

    /// Accepted for interface symmetry; training is single-threaded.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let dfs_dir = args.dfs.clone().unwrap_or_else(|| args.run.join("dfs"));
    let corpus = DfsCorpus::load(&dfs_dir)?;
    let classes = corpus.classes();

    let split = split_dataset(
        corpus.rows.len(),
        &SplitSpec { seed: args.seed, ..SplitSpec::default() },
    )?;
    let train_set = corpus.labeled_subset(&split.train, classes)?;
    let val_set = corpus.labeled_subset(&split.val, classes)?;
    let test_set = corpus.labeled_subset(&split.test, classes)?;

    let cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            ModelConfig::from_text(&text)?
        }
        None => jcas_core::experiments::desk_model(train_set.input_dims(), classes, args.model),
    };
    let model = Model::build(&cfg)?;

    let tcfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        max_epochs: args.epochs,
        patience: args.patience,
        min_delta: 0.0,
        seed: args.seed,
    };
    let mut store = model.init_params::<f32>(args.seed);
    let trial = train_with_early_stopping(&model, &mut store, &train_set, &val_set, None, &tcfg)?;

    if let TrialStatus::Failed(reason) = &trial.status {
        return Err(CliError::Numerical(format!("training diverged: {reason}")));
    }

    let test = evaluate(&model, &store, &test_set, args.batch)?;

    let name = args.name.clone().unwrap_or_else(|| family_name(args.model).to_string());
    let dir = model_dir(&args.run, &name);
    fs::create_dir_all(&dir)?;

    fs::write(dir.join("model.cfg"), cfg.to_text())?;
    save_checkpoint(&store, &dir.join("model.ckpt"))?;
    write_split(&dir, &split)?;

    let mut rows = vec![MetricsRow {
        arm: name.clone(),
        seed: args.seed,
        fold: 0,
        epoch: 0,
        loss: 0.0,
        val_loss: test.loss,
        accuracy: test.accuracy,
        kappa: test.kappa,
    }];
    rows.extend(jcas_core::experiments::rows_from_trial(&name, args.seed, 0, &trial));
    jcas_core::experiments::write_metrics_csv(&dir.join("metrics.csv"), &rows)?;

    let mut m = Manifest::new("train");
    m.param("model", family_name(args.model));
    m.param("name", &name);
    m.param("seed", args.seed);
    m.param("epochs", args.epochs);
    m.param("batch", args.batch);
    m.param("lr", args.lr);
    m.param("patience", args.patience);
    m.param("classes", classes);
    m.input(&args.run, &dfs_dir.join(crate::index::INDEX_FILE))?;
    if let Some(path) = &args.config {
        m.input(&args.run, path)?;
    }
    for file in ["model.cfg", "model.ckpt", super::SPLIT_FILE, "metrics.csv"] {
        m.artifact(&args.run, &dir.join(file))?;
    }
    m.write(&args.run, &format!("train_{name}"))?;

    println!("name = {name}");
    println!("best_epoch = {}", trial.best_epoch);
    println!("epochs_ran = {}", trial.history.len());
    println!("val_loss = {}", trial.best_val_loss);
    println!("test_loss = {}", test.loss);
    println!("accuracy = {}", test.accuracy);
    println!("kappa = {}", test.kappa);
    Ok(())
}

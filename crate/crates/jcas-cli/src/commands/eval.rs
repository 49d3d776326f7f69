//! `jcas eval`: reload a trained model and report metrics on a stored split
//! subset. Prints the same numbers the training run wrote into its metrics
//! CSV, recomputed from the checkpoint rather than copied.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use jcas_core::experiments::evaluate;
use jcas_core::models::{Model, ModelConfig};
use jcas_core::nn::load_checkpoint;

use crate::error::CliError;

use super::{model_dir, read_split, DfsCorpus};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run directory.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// DFS archive directory (default: <run>/dfs).
    #[arg(long, value_name = "DIR")]
    pub dfs: Option<PathBuf>,

    /// Model name under <run>/models/.
    #[arg(long, default_value = "standard")]
    pub name: String,

    /// Subset to score: train, val, or test.
    #[arg(long, default_value = "test")]
    pub subset: String,

    #[arg(long, default_value_t = 12)]
    pub batch: usize,
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let dfs_dir = args.dfs.clone().unwrap_or_else(|| args.run.join("dfs"));
    let corpus = DfsCorpus::load(&dfs_dir)?;
    let dir = model_dir(&args.run, &args.name);

    let cfg_path = dir.join("model.cfg");
    let text = std::fs::read_to_string(&cfg_path)
        .map_err(|e| CliError::Data(format!("{}: {e}", cfg_path.display())))?;
    let cfg = ModelConfig::from_text(&text)?;
    let model = Model::build(&cfg)?;

    let mut store = model.init_params::<f32>(0);
    let tensors = load_checkpoint(&dir.join("model.ckpt"))?;
    let mut values: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    for (name, dims, value) in tensors {
        if !store.contains(&name) {
            return Err(CliError::Data(format!(
                "checkpoint tensor `{name}` is not part of the configured model"
            )));
        }
        if store.get(&name).dims != dims {
            return Err(CliError::Data(format!(
                "checkpoint tensor `{name}` has dims {dims:?}, model expects {:?}",
                store.get(&name).dims
            )));
        }
        values.insert(name, value);
    }
    if values.len() != store.len() {
        return Err(CliError::Data(format!(
            "checkpoint holds {} tensors, model has {}",
            values.len(),
            store.len()
        )));
    }
    store.restore(&values);

    let split = read_split(&dir)?;
    let idx = match args.subset.as_str() {
        "train" => &split.train,
        "val" => &split.val,
        "test" => &split.test,
        other => {
            return Err(CliError::Spec(format!(
                "unknown subset `{other}`, expected train, val, or test"
            )))
        }
    };
    let max = idx.iter().copied().max().unwrap_or(0);
    if max >= corpus.rows.len() {
        return Err(CliError::Data(format!(
            "split references sample {max}, archive holds {}",
            corpus.rows.len()
        )));
    }
    let set = corpus.labeled_subset(idx, cfg.classes)?;

    let metrics = evaluate(&model, &store, &set, args.batch)?;
    println!("subset = {}", args.subset);
    println!("samples = {}", set.len());
    println!("loss = {}", metrics.loss);
    println!("accuracy = {}", metrics.accuracy);
    println!("kappa = {}", metrics.kappa);
    Ok(())
}

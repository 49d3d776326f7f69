//! `jcas simulate`: expand a scenario grid into per-frame channel captures.
//!
//! Writes one `CSI1` archive per grid frame plus the index sidecar, a spec
//! snapshot, and the run manifest. The SNR gate is applied here because the
//! capture hardware applies it before anything downstream sees the data.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use jcas_core::csi::{apply_snr_zeroing, simulate_csi, write_csi1};
use jcas_core::preprocess::{plan_dataset, DatasetSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::index::{write_index, IndexRow};
use crate::manifest::Manifest;
use crate::specfile::{kind_name, parse_kind, parse_spec, spec_text};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario grid description file; mutually exclusive with --dataset.
    #[arg(long, value_name = "FILE", conflicts_with = "dataset")]
    pub spec: Option<PathBuf>,

    /// Builtin grid: 1, 2v1, 2v2, or 2v3.
    #[arg(long, value_parser = parse_dataset)]
    pub dataset: Option<DatasetSpec>,

    /// Master seed for per-frame generator seeds and motion-count draws.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Run directory receiving csi/, spec.txt, and the manifest.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// Worker threads for frame simulation.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn parse_dataset(s: &str) -> Result<DatasetSpec, String> {
    parse_kind(s)
        .map(DatasetSpec::for_kind)
        .ok_or_else(|| format!("unknown dataset `{s}`, expected 1, 2v1, 2v2, or 2v3"))
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let (spec, spec_source) = match (&args.spec, &args.dataset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            (parse_spec(&text)?, Some(path.clone()))
        }
        (None, Some(spec)) => (spec.clone(), None),
        (None, None) => {
            return Err(CliError::Spec("pass either --spec FILE or --dataset KIND".into()))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let plans = plan_dataset(&spec, &mut rng)?;

    let csi_dir = args.run.join("csi");
    fs::create_dir_all(&csi_dir)?;

    let rows = super::indexed_map(plans.len(), args.jobs, |i| {
        let plan = &plans[i];
        let mut frame = simulate_csi(&plan.scenario, &mut ChaCha8Rng::seed_from_u64(plan.seed))?;
        if let Some(threshold) = spec.snr_threshold {
            frame = apply_snr_zeroing(frame, threshold);
        }
        let name = format!("frame_{i:05}.csi1");
        write_csi1(&frame, &csi_dir.join(&name))?;
        Ok(IndexRow::new(name, plan.label, &frame.meta))
    })?;
    write_index(&csi_dir, &rows)?;

    let snapshot = args.run.join("spec.txt");
    fs::write(&snapshot, spec_text(&spec))?;

    let mut m = Manifest::new("simulate");
    m.param("dataset", kind_name(spec.which));
    m.param("seed", args.seed);
    m.param("frames", rows.len());
    if let Some(path) = &spec_source {
        m.inputs.push((
            path.file_name().map_or_else(
                || path.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            ),
            crate::manifest::sha256_file(path)?,
        ));
    }
    m.artifact(&args.run, &snapshot)?;
    m.artifact(&args.run, &csi_dir.join(crate::index::INDEX_FILE))?;
    for row in &rows {
        m.artifact(&args.run, &csi_dir.join(&row.file))?;
    }
    m.write(&args.run, "simulate")?;

    println!("frames = {}", rows.len());
    println!("csi_dir = {}", csi_dir.display());
    Ok(())
}

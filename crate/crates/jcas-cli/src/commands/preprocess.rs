//! `jcas preprocess`: channel archives to Doppler spectrogram archives.
//!
//! Per frame: first principal component per RX beam, sliding-window DFT,
//! zero-pad to power-of-two dims, and optional RX unstacking. The reported
//! sampling rate only relabels the Doppler axis, so rate variants of one
//! corpus share identical tensor bytes.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use jcas_core::csi::read_csi1;
use jcas_core::preprocess::{
    pad_pow2, pca_first_component, stft_spectrogram, unstack_rx, write_dfs1, DfsFrame, StftConfig,
};

use crate::error::CliError;
use crate::index::{read_index, write_index, IndexRow, INDEX_FILE};
use crate::manifest::Manifest;
use crate::specfile::parse_spec;

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Run directory; defaults below are resolved against it.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// Input CSI archive directory (default: <run>/csi).
    #[arg(long, value_name = "DIR")]
    pub input: Option<PathBuf>,

    /// Output DFS archive directory (default: <run>/dfs).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Rate declared to the transform; defaults to the run's spec snapshot.
    #[arg(long)]
    pub reported_fs: Option<f64>,

    /// Split each frame into per-RX-patch samples.
    #[arg(long, overrides_with = "no_unstack")]
    pub unstack: bool,

    /// Keep frames stacked even when the spec snapshot says otherwise.
    #[arg(long, overrides_with = "unstack")]
    pub no_unstack: bool,

    /// DFT window length (time symbols).
    #[arg(long, default_value_t = 64)]
    pub window: usize,

    /// Window hop (time symbols).
    #[arg(long, default_value_t = 1)]
    pub hop: usize,

    /// Tolerated fraction of zero-covariance antennas before aborting.
    #[arg(long, default_value_t = 1.0)]
    pub max_degenerate: f64,

    /// Worker threads for frame transforms.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

struct FrameOut {
    rows: Vec<IndexRow>,
    degenerate: usize,
    antennas: usize,
}

pub fn run(args: &PreprocessArgs) -> Result<(), CliError> {
    let in_dir = args.input.clone().unwrap_or_else(|| args.run.join("csi"));
    let out_dir = args.out.clone().unwrap_or_else(|| args.run.join("dfs"));
    let csi_rows = read_index(&in_dir)?;

    // The spec snapshot supplies defaults; flags override it, and a bare
    // archive directory works as long as --reported-fs is given.
    let spec_path = args.run.join("spec.txt");
    let snapshot = match fs::read_to_string(&spec_path) {
        Ok(text) => Some(parse_spec(&text)?),
        Err(_) => None,
    };
    let reported_fs = args
        .reported_fs
        .or(snapshot.as_ref().map(|s| s.reported_fs))
        .ok_or_else(|| {
            CliError::Spec("no spec snapshot in the run directory; pass --reported-fs".into())
        })?;
    let unstack = if args.unstack {
        true
    } else if args.no_unstack {
        false
    } else {
        snapshot.as_ref().is_some_and(|s| s.unstack)
    };
    if !(reported_fs > 0.0) {
        return Err(CliError::Spec(format!("reported_fs must be positive, got {reported_fs}")));
    }
    let cfg = StftConfig { reported_fs, window_len: args.window, hop: args.hop };

    fs::create_dir_all(&out_dir)?;

    // Sample numbering must match the per-frame expansion so workers can
    // name files independently. Unstacked frames expand by the antenna
    // count, shared across the corpus; probe the first archive for it.
    let width = if unstack { read_csi1(&in_dir.join(&csi_rows[0].file))?.a } else { 1 };

    let outs = super::indexed_map(csi_rows.len(), args.jobs, |i| {
        let row = &csi_rows[i];
        let mut frame = read_csi1(&in_dir.join(&row.file))?;
        frame.meta = row.meta();
        let series = pca_first_component(&frame)?;
        let degenerate = series.degenerate.len();
        let antennas = series.a;
        let dfs = pad_pow2(&stft_spectrogram(&series, &cfg)?);
        let samples: Vec<DfsFrame> = if unstack { unstack_rx(&dfs) } else { vec![dfs] };
        if samples.len() != width {
            return Err(CliError::Data(format!(
                "{}: expands to {} samples, expected {width}",
                row.file,
                samples.len()
            )));
        }
        let mut rows = Vec::with_capacity(samples.len());
        for (j, sub) in samples.iter().enumerate() {
            let name = format!("sample_{:05}.dfs1", i * width + j);
            let mut f = fs::File::create(out_dir.join(&name))?;
            write_dfs1(&mut f, sub)?;
            rows.push(IndexRow::new(name, row.label, &sub.meta));
        }
        Ok(FrameOut { rows, degenerate, antennas })
    })?;

    let degenerate: usize = outs.iter().map(|o| o.degenerate).sum();
    let antennas: usize = outs.iter().map(|o| o.antennas).sum();
    let fraction = degenerate as f64 / antennas as f64;
    if fraction > args.max_degenerate {
        return Err(CliError::Data(format!(
            "degenerate PCA on {degenerate}/{antennas} antennas ({fraction:.3} > {} allowed); \
             the capture is likely broken",
            args.max_degenerate
        )));
    }

    let rows: Vec<IndexRow> = outs.into_iter().flat_map(|o| o.rows).collect();
    write_index(&out_dir, &rows)?;

    let mut m = Manifest::new("preprocess");
    m.param("reported_fs", reported_fs);
    m.param("window", args.window);
    m.param("hop", args.hop);
    m.param("unstack", unstack);
    m.param("max_degenerate", args.max_degenerate);
    m.param("samples", rows.len());
    m.param("degenerate_antennas", format!("{degenerate}/{antennas}"));
    m.input(&args.run, &in_dir.join(INDEX_FILE))?;
    if snapshot.is_some() {
        m.input(&args.run, &spec_path)?;
    }
    m.artifact(&args.run, &out_dir.join(INDEX_FILE))?;
    for row in &rows {
        m.artifact(&args.run, &out_dir.join(&row.file))?;
    }
    m.write(&args.run, "preprocess")?;

    println!("samples = {}", rows.len());
    println!("degenerate_antennas = {degenerate}/{antennas}");
    println!("dfs_dir = {}", out_dir.display());
    Ok(())
}

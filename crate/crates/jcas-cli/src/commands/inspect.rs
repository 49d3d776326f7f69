//! `jcas inspect`: summarize an archive directory and optionally render a
//! per-class spectrogram grid.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use jcas_core::csi::read_csi1;
use jcas_core::preprocess::DfsFrame;
use jcas_core::viz::{render_dfs_grid, write_ppm, ColorMap, GridLayout};

use crate::error::CliError;
use crate::index::read_index;
use crate::manifest::Manifest;

use super::DfsCorpus;

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Run directory.
    #[arg(long, env = "JCAS_RUN_DIR", default_value = "runs")]
    pub run: PathBuf,

    /// DFS archive directory to summarize (default: <run>/dfs).
    #[arg(long, value_name = "DIR", conflicts_with = "csi")]
    pub dfs: Option<PathBuf>,

    /// Summarize a CSI archive directory instead.
    #[arg(long, value_name = "DIR")]
    pub csi: Option<PathBuf>,

    /// Render a per-class grid pixmap to <run>/reports/grid.ppm.
    #[arg(long)]
    pub grid: bool,

    /// Samples per class in the grid.
    #[arg(long, default_value_t = 4)]
    pub cols: usize,

    /// Grid colormap: mono or heat.
    #[arg(long, default_value = "heat", value_parser = parse_colormap)]
    pub colormap: ColorMap,
}

fn parse_colormap(s: &str) -> Result<ColorMap, String> {
    match s {
        "mono" => Ok(ColorMap::Mono),
        "heat" => Ok(ColorMap::Heat),
        _ => Err(format!("unknown colormap `{s}`, expected mono or heat")),
    }
}

pub fn run(args: &InspectArgs) -> Result<(), CliError> {
    if let Some(dir) = &args.csi {
        let rows = read_index(dir)?;
        let first = read_csi1(&dir.join(&rows[0].file))?;
        println!("archive = csi");
        println!("frames = {}", rows.len());
        println!("dims = {}x{}x{}", first.a, first.k, first.t);
        print_counts(rows.iter().map(|r| (r.label, r.class.as_str())));
        return Ok(());
    }

    let dir = args.dfs.clone().unwrap_or_else(|| args.run.join("dfs"));
    let corpus = DfsCorpus::load(&dir)?;
    let first = &corpus.frames[0];
    println!("archive = dfs");
    println!("samples = {}", corpus.rows.len());
    println!("dims = {}x{}x{}", first.a, first.b, first.t);
    println!("reported_fs = {}", first.reported_fs);
    print_counts(corpus.rows.iter().map(|r| (r.label, r.class.as_str())));

    if args.grid {
        if args.cols == 0 {
            return Err(CliError::Spec("--cols must be at least 1".into()));
        }
        // Row per label, first `cols` samples each; classes with fewer
        // samples bound the width so the grid stays rectangular.
        let mut by_label: BTreeMap<u32, Vec<&DfsFrame>> = BTreeMap::new();
        for (row, frame) in corpus.rows.iter().zip(&corpus.frames) {
            by_label.entry(row.label).or_default().push(frame);
        }
        let cols = by_label.values().map(|v| v.len()).min().unwrap_or(0).min(args.cols);
        let cells: Vec<&DfsFrame> = by_label
            .values()
            .flat_map(|v| v[..cols].iter().copied())
            .collect();
        let mut layout = GridLayout::new(by_label.len(), cols);
        layout.colormap = args.colormap;
        let raster = render_dfs_grid(&cells, &layout)?;

        let reports = args.run.join("reports");
        std::fs::create_dir_all(&reports)?;
        let path = reports.join("grid.ppm");
        write_ppm(&path, &raster)?;
        println!("grid = {}", path.display());

        let mut m = Manifest::new("inspect");
        m.param("cols", cols);
        m.param("rows", by_label.len());
        m.input(&args.run, &dir.join(crate::index::INDEX_FILE))?;
        m.artifact(&args.run, &path)?;
        m.write(&args.run, "inspect")?;
    }
    Ok(())
}

fn print_counts<'a>(rows: impl Iterator<Item = (u32, &'a str)>) {
    let mut counts: BTreeMap<(u32, &str), usize> = BTreeMap::new();
    for key in rows {
        *counts.entry(key).or_insert(0) += 1;
    }
    for ((label, class), n) in counts {
        println!("label_{label} = {n} ({class})");
    }
}

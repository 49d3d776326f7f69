//! Sidecar sample listings. The binary archive formats carry no class
//! labels (CSI) or only per-frame metadata (DFS), so each archive directory
//! gets an `index.tsv` naming every file, its label, and its domain
//! coordinates in production order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use jcas_core::csi::{DomainLabel, FrameMeta, MotionClass, Orientation};

use crate::error::CliError;

pub const INDEX_FILE: &str = "index.tsv";
const HEADER: &str = "# file\tlabel\tclass\ttx_beam\trx_patch\tsubject\torientation";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRow {
    pub file: String,
    /// Class index relative to the generating spec's class list.
    pub label: u32,
    pub class: MotionClass,
    pub tx_beam: u32,
    pub rx_patch: Option<u32>,
    pub subject_id: u32,
    pub orientation: Orientation,
}

impl IndexRow {
    pub fn new(file: String, label: u32, meta: &FrameMeta) -> Self {
        IndexRow {
            file,
            label,
            class: meta.class,
            tx_beam: meta.domain.tx_beam,
            rx_patch: meta.domain.rx_patch,
            subject_id: meta.domain.subject_id,
            orientation: meta.domain.orientation,
        }
    }

    pub fn meta(&self) -> FrameMeta {
        FrameMeta {
            class: self.class,
            domain: DomainLabel {
                tx_beam: self.tx_beam,
                rx_patch: self.rx_patch,
                subject_id: self.subject_id,
                orientation: self.orientation,
            },
        }
    }
}

fn orientation_name(o: Orientation) -> &'static str {
    match o {
        Orientation::Frontal => "frontal",
        Orientation::Orthogonal => "orthogonal",
    }
}

pub fn write_index(dir: &Path, rows: &[IndexRow]) -> Result<(), CliError> {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let patch = r.rx_patch.map_or("-".to_string(), |p| p.to_string());
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.file,
            r.label,
            r.class.as_str(),
            r.tx_beam,
            patch,
            r.subject_id,
            orientation_name(r.orientation)
        )
        .expect("string write");
    }
    fs::write(dir.join(INDEX_FILE), out)?;
    Ok(())
}

pub fn read_index(dir: &Path) -> Result<Vec<IndexRow>, CliError> {
    let path = dir.join(INDEX_FILE);
    if !dir.is_dir() {
        return Err(CliError::Data(format!("missing input directory {}", dir.display())));
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |what: &str| {
            CliError::Data(format!("{}:{line_no}: bad {what}", path.display()))
        };
        if cols.len() != 7 {
            return Err(bad("column count"));
        }
        rows.push(IndexRow {
            file: cols[0].to_string(),
            label: cols[1].parse().map_err(|_| bad("label"))?,
            class: MotionClass::parse(cols[2]).ok_or_else(|| bad("class"))?,
            tx_beam: cols[3].parse().map_err(|_| bad("tx beam"))?,
            rx_patch: match cols[4] {
                "-" => None,
                p => Some(p.parse().map_err(|_| bad("rx patch"))?),
            },
            subject_id: cols[5].parse().map_err(|_| bad("subject"))?,
            orientation: match cols[6] {
                "frontal" => Orientation::Frontal,
                "orthogonal" => Orientation::Orthogonal,
                _ => return Err(bad("orientation")),
            },
        });
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no samples listed", path.display())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            IndexRow {
                file: "frame_00000.csi1".into(),
                label: 2,
                class: MotionClass::Squat,
                tx_beam: 7,
                rx_patch: None,
                subject_id: 1,
                orientation: Orientation::Frontal,
            },
            IndexRow {
                file: "sample_00001.dfs1".into(),
                label: 3,
                class: MotionClass::HandGesture,
                tx_beam: 9,
                rx_patch: Some(15),
                subject_id: 4,
                orientation: Orientation::Orthogonal,
            },
        ];
        write_index(dir.path(), &rows).unwrap();
        assert_eq!(read_index(dir.path()).unwrap(), rows);
    }

    #[test]
    fn missing_directory_is_a_data_error() {
        let err = read_index(Path::new("/nonexistent/archive")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}

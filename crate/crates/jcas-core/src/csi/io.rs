//! CSI archive formats.
//!
//! CSV: header `t,rx,k,re,im`, one row per (time symbol, RX beam, subcarrier),
//! floats at 9 significant digits, `t` absolute so segment files keep their
//! place in a longer recording. Binary: magic `CSI1`, dims A,K,T as u32 LE,
//! fs_collect as f64 LE, interleaved re/im f32. Neither format carries labels;
//! dataset builders keep those in a sidecar.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::motion::MotionClass;
use super::scenario::{DomainLabel, Orientation};
use super::sim::{CsiFrame, FrameMeta};
use super::CsiError;

const CSV_HEADER: &str = "t,rx,k,re,im";

fn unlabeled_meta() -> FrameMeta {
    FrameMeta {
        class: MotionClass::Empty,
        domain: DomainLabel {
            tx_beam: 0,
            rx_patch: None,
            subject_id: 0,
            orientation: Orientation::Frontal,
        },
    }
}

pub fn write_csi_csv(frame: &CsiFrame, path: &Path) -> Result<(), CsiError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for t in 0..frame.t {
        for a in 0..frame.a {
            for k in 0..frame.k {
                let v = frame.at(a, k, t);
                writeln!(w, "{},{},{},{:.8e},{:.8e}", frame.t_offset + t, a, k, v.re, v.im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Parse a CSV archive. The row grid must be complete: every (t, rx, k)
/// triple exactly once over contiguous time symbols. Sampling rate and labels
/// are not part of the format; callers restore them from sidecar metadata.
pub fn read_csi_csv(path: &Path) -> Result<CsiFrame, CsiError> {
    let parse_err = |line: usize, msg: &str| CsiError::Parse { line, msg: msg.into() };
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == CSV_HEADER => {}
        Some(Ok(_)) => return Err(parse_err(1, "expected header `t,rx,k,re,im`")),
        Some(Err(e)) => return Err(e.into()),
        None => return Err(parse_err(1, "empty file")),
    }

    let mut rows: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.trim_end().split(',');
        let mut field = |name: &str| {
            cols.next()
                .ok_or_else(|| parse_err(line_no, &format!("missing column {name}")))
        };
        let t: usize = field("t")?
            .parse()
            .map_err(|_| parse_err(line_no, "bad t"))?;
        let rx: usize = field("rx")?
            .parse()
            .map_err(|_| parse_err(line_no, "bad rx"))?;
        let k: usize = field("k")?
            .parse()
            .map_err(|_| parse_err(line_no, "bad k"))?;
        let re: f64 = field("re")?
            .parse()
            .map_err(|_| parse_err(line_no, "bad re"))?;
        let im: f64 = field("im")?
            .parse()
            .map_err(|_| parse_err(line_no, "bad im"))?;
        if cols.next().is_some() {
            return Err(parse_err(line_no, "too many columns"));
        }
        rows.push((t, rx, k, re, im));
    }
    if rows.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }

    let a_n = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let k_n = rows.iter().map(|r| r.2).max().unwrap() + 1;
    let t_min = rows.iter().map(|r| r.0).min().unwrap();
    let t_max = rows.iter().map(|r| r.0).max().unwrap();
    let t_n = t_max - t_min + 1;
    if rows.len() != a_n * k_n * t_n {
        return Err(CsiError::Archive(format!(
            "incomplete grid: {} rows for {}x{}x{}",
            rows.len(),
            a_n,
            k_n,
            t_n
        )));
    }

    let mut frame = CsiFrame::new(a_n, k_n, t_n, 1.0, unlabeled_meta());
    frame.t_offset = t_min;
    let mut seen = vec![false; a_n * k_n * t_n];
    for (t, rx, k, re, im) in rows {
        let i = frame.idx(rx, k, t - t_min);
        if seen[i] {
            return Err(CsiError::Archive(format!("duplicate row t={t} rx={rx} k={k}")));
        }
        seen[i] = true;
        frame.set(rx, k, t - t_min, Complex64::new(re, im));
    }
    Ok(frame)
}

const CSI1_MAGIC: &[u8; 4] = b"CSI1";

pub fn write_csi1(frame: &CsiFrame, path: &Path) -> Result<(), CsiError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CSI1_MAGIC)?;
    for dim in [frame.a, frame.k, frame.t] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&frame.fs_collect.to_le_bytes())?;
    for v in frame.values() {
        w.write_all(&(v.re as f32).to_le_bytes())?;
        w.write_all(&(v.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csi1(path: &Path) -> Result<CsiFrame, CsiError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CSI1_MAGIC {
        return Err(CsiError::Archive("bad magic, expected CSI1".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut u32buf)?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let fs = f64::from_le_bytes(f64buf);
    let [a_n, k_n, t_n] = dims;
    let mut frame = CsiFrame::new(a_n, k_n, t_n, fs, unlabeled_meta());
    for i in 0..a_n * k_n * t_n {
        r.read_exact(&mut u32buf)?;
        let re = f32::from_le_bytes(u32buf) as f64;
        r.read_exact(&mut u32buf)?;
        let im = f32::from_le_bytes(u32buf) as f64;
        frame.values_mut()[i] = Complex64::new(re, im);
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CsiError::Archive("trailing bytes".into()));
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use tempfile::TempDir;

    fn random_frame(a: usize, k: usize, t: usize, seed: u64) -> CsiFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = CsiFrame::new(a, k, t, 1.0, unlabeled_meta());
        for v in f.values_mut() {
            *v = Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        }
        f
    }

    #[test]
    fn csv_round_trip_preserves_values_and_offset() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f.csv");
        let mut f = random_frame(3, 4, 5, 1);
        f.t_offset = 50;
        write_csi_csv(&f, &path).unwrap();
        let g = read_csi_csv(&path).unwrap();
        assert_eq!((g.a, g.k, g.t, g.t_offset), (3, 4, 5, 50));
        for (x, y) in f.values().iter().zip(g.values()) {
            assert!((x - y).norm() < 1e-8 * x.norm().max(1.0));
        }
    }

    #[test]
    fn csv_row_count_is_the_grid_size() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f.csv");
        write_csi_csv(&random_frame(2, 3, 4, 2), &path).unwrap();
        let n_lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(n_lines, 1 + 2 * 3 * 4);
    }

    #[test]
    fn malformed_row_names_its_line() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f.csv");
        write_csi_csv(&random_frame(2, 2, 2, 3), &path).unwrap();
        let mut lines: Vec<String> =
            std::fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
        lines[4] = "1,0,1".to_string();
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_csi_csv(&path) {
            Err(CsiError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_grid_cell_is_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f.csv");
        write_csi_csv(&random_frame(2, 2, 2, 4), &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        let keep: Vec<&str> = content.lines().take(1 + 7).collect();
        std::fs::write(&path, keep.join("\n")).unwrap();
        assert!(matches!(read_csi_csv(&path), Err(CsiError::Archive(_))));
    }

    #[test]
    fn binary_round_trip_is_exact_at_f32() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f.csi1");
        let mut f = random_frame(4, 3, 6, 5);
        f.fs_collect = 20.0;
        write_csi1(&f, &path).unwrap();
        let g = read_csi1(&path).unwrap();
        assert_eq!((g.a, g.k, g.t), (4, 3, 6));
        assert_eq!(g.fs_collect, 20.0);
        for (x, y) in f.values().iter().zip(g.values()) {
            assert_eq!(x.re as f32, y.re as f32);
            assert_eq!(x.im as f32, y.im as f32);
            assert_eq!(y.re, (x.re as f32) as f64);
        }
    }

    #[test]
    fn binary_bad_magic_is_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("f.csi1");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(read_csi1(&path), Err(CsiError::Archive(_))));
    }
}

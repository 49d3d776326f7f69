//! One module per subcommand plus the plumbing they share: archive-directory
//! loading, split persistence, and an index-ordered parallel map for frame
//! work.

pub mod eval;
pub mod hypothesis;
pub mod inspect;
pub mod preprocess;
pub mod simulate;
pub mod train;
pub mod tune;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use jcas_core::experiments::{LabeledSet, SplitIndices};
use jcas_core::models::frames_to_batch;
use jcas_core::preprocess::{read_dfs1, DfsFrame};

use crate::error::CliError;
use crate::index::{read_index, IndexRow};

/// Runs `work(i)` for `i in 0..n`, keeping results in index order. With one
/// job this is a plain loop; otherwise a fixed pool pulls indices from a
/// shared counter, so output content never depends on scheduling.
pub fn indexed_map<T, F>(n: usize, jobs: usize, work: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(usize) -> Result<T, CliError> + Sync,
{
    if jobs <= 1 || n <= 1 {
        return (0..n).map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    let failure: Mutex<Option<(usize, CliError)>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n || failure.lock().unwrap().is_some() {
                    return;
                }
                match work(i) {
                    Ok(v) => slots.lock().unwrap()[i] = Some(v),
                    Err(e) => {
                        let mut f = failure.lock().unwrap();
                        // Keep the earliest index so reruns fail identically.
                        if f.as_ref().is_none_or(|(j, _)| i < *j) {
                            *f = Some((i, e));
                        }
                    }
                }
            });
        }
    });
    if let Some((_, e)) = failure.into_inner().unwrap().take() {
        return Err(e);
    }
    Ok(slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("worker filled every slot"))
        .collect())
}

/// A DFS archive directory pulled into memory: index rows and frames in
/// listing order.
pub struct DfsCorpus {
    pub rows: Vec<IndexRow>,
    pub frames: Vec<DfsFrame>,
}

impl DfsCorpus {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let rows = read_index(dir)?;
        let mut frames = Vec::with_capacity(rows.len());
        for row in &rows {
            let path = dir.join(&row.file);
            let mut f = fs::File::open(&path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            frames.push(read_dfs1(&mut f)?);
        }
        Ok(DfsCorpus { rows, frames })
    }

    /// Distinct spec-relative labels; training needs `max + 1` outputs.
    pub fn classes(&self) -> usize {
        self.rows.iter().map(|r| r.label).max().map_or(0, |m| m as usize + 1)
    }

    /// Gathers the indexed subset into a labeled set, labeling by the index
    /// column rather than the per-frame motion class: grids may key classes
    /// on orientation, which the motion class alone cannot separate.
    pub fn labeled_subset(&self, idx: &[usize], classes: usize) -> Result<LabeledSet<f32>, CliError> {
        let frames: Vec<&DfsFrame> = idx.iter().map(|&i| &self.frames[i]).collect();
        let labels: Vec<u32> = idx.iter().map(|&i| self.rows[i].label).collect();
        let x = frames_to_batch(&frames, true)?;
        Ok(LabeledSet::new(x, labels, classes)?)
    }
}

pub const SPLIT_FILE: &str = "split.txt";

pub fn write_split(dir: &Path, split: &SplitIndices) -> Result<(), CliError> {
    let line = |name: &str, idx: &[usize]| {
        let list: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        format!("{name} = {}\n", list.join(" "))
    };
    let text = [
        line("train", &split.train),
        line("val", &split.val),
        line("test", &split.test),
    ]
    .concat();
    fs::write(dir.join(SPLIT_FILE), text)?;
    Ok(())
}

pub fn read_split(dir: &Path) -> Result<SplitIndices, CliError> {
    let path = dir.join(SPLIT_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut parts: [Option<Vec<usize>>; 3] = [None, None, None];
    for line in text.lines() {
        let Some((key, rest)) = line.split_once('=') else { continue };
        let idx: Result<Vec<usize>, _> =
            rest.split_whitespace().map(str::parse).collect();
        let idx = idx.map_err(|_| CliError::Data(format!("{}: bad index list", path.display())))?;
        match key.trim() {
            "train" => parts[0] = Some(idx),
            "val" => parts[1] = Some(idx),
            "test" => parts[2] = Some(idx),
            _ => {}
        }
    }
    match parts {
        [Some(train), Some(val), Some(test)] => Ok(SplitIndices { train, val, test }),
        _ => Err(CliError::Data(format!("{}: missing subset line", path.display()))),
    }
}

/// `models/<name>` under the run directory.
pub fn model_dir(run: &Path, name: &str) -> PathBuf {
    run.join("models").join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexed_map_orders_and_propagates_first_error() {
        let ok = indexed_map(8, 3, |i| Ok::<_, CliError>(i * i)).unwrap();
        assert_eq!(ok, vec![0, 1, 4, 9, 16, 25, 36, 49]);

        let err = indexed_map(8, 3, |i| {
            if i >= 5 {
                Err(CliError::Data(format!("boom {i}")))
            } else {
                Ok(i)
            }
        })
        .unwrap_err();
        assert!(matches!(err, CliError::Data(_)));
    }

    #[test]
    fn split_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let split = SplitIndices {
            train: vec![4, 1, 3],
            val: vec![0],
            test: vec![2, 5],
        };
        write_split(dir.path(), &split).unwrap();
        let back = read_split(dir.path()).unwrap();
        assert_eq!(back.train, split.train);
        assert_eq!(back.val, split.val);
        assert_eq!(back.test, split.test);
    }
}

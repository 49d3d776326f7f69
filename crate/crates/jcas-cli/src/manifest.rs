//! Run manifests: one flat key-value file per command naming every input it
//! hashed and every artifact it produced. The manifest is written last, so
//! its presence marks a completed command, and it contains nothing
//! machine-local (no absolute paths, no timestamps): reruns with the same
//! inputs and parameters byte-reproduce it.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Path relative to the run directory, `/`-separated for stable hashing.
pub fn rel_key(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Default)]
pub struct Manifest {
    pub command: String,
    /// Flags and seeds that shaped the outputs.
    pub params: Vec<(String, String)>,
    /// Input files by run-relative path and content hash.
    pub inputs: Vec<(String, String)>,
    /// Produced files by run-relative path and content hash.
    pub artifacts: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest { command: command.to_string(), ..Manifest::default() }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.params.push((key.to_string(), value.to_string()));
    }

    pub fn input(&mut self, root: &Path, path: &Path) -> Result<(), CliError> {
        self.inputs.push((rel_key(path, root), sha256_file(path)?));
        Ok(())
    }

    pub fn artifact(&mut self, root: &Path, path: &Path) -> Result<(), CliError> {
        self.artifacts.push((rel_key(path, root), sha256_file(path)?));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = format!("[run]\ncommand = {}\n", self.command);
        out.push_str("\n[params]\n");
        for (k, v) in &self.params {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str("\n[inputs]\n");
        let mut inputs = self.inputs.clone();
        inputs.sort();
        for (k, v) in &inputs {
            out.push_str(&format!("{k} = sha256:{v}\n"));
        }
        out.push_str("\n[artifacts]\n");
        let mut artifacts = self.artifacts.clone();
        artifacts.sort();
        for (k, v) in &artifacts {
            out.push_str(&format!("{k} = sha256:{v}\n"));
        }
        out
    }

    /// Writes `manifest_<tag>.txt` into the run directory. The tag usually
    /// matches the command, extended by an output name when one command can
    /// run several times into the same run directory.
    pub fn write(&self, run_dir: &Path, tag: &str) -> Result<PathBuf, CliError> {
        let path = run_dir.join(format!("manifest_{tag}.txt"));
        fs::write(&path, self.render())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        // sha256 of the empty string.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn render_is_sorted_and_relative() {
        let dir = tempfile::tempdir().unwrap();
        let z = dir.path().join("z.txt");
        let a = dir.path().join("sub").join("a.txt");
        fs::create_dir_all(a.parent().unwrap()).unwrap();
        fs::write(&z, "z").unwrap();
        fs::write(&a, "a").unwrap();

        let mut m = Manifest::new("simulate");
        m.param("seed", 42);
        m.artifact(dir.path(), &z).unwrap();
        m.artifact(dir.path(), &a).unwrap();
        let text = m.render();
        let z_pos = text.find("z.txt").unwrap();
        let a_pos = text.find("sub/a.txt").unwrap();
        assert!(a_pos < z_pos);
        assert!(text.contains("command = simulate"));
        assert!(!text.contains(&dir.path().display().to_string()));
    }
}

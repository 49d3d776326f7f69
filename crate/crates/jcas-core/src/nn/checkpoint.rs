//! Weight checkpoint format: magic `JCNN`, a format version byte, a little
//! endian u32 tensor count, then per tensor a u32 name length, the UTF-8
//! name, four u32 dims and the f32 values. Values are stored in f32
//! regardless of the store's element type.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Scalar;
use super::NnError;

const MAGIC: &[u8; 4] = b"JCNN";
const VERSION: u8 = 1;

pub fn save_checkpoint<S: Scalar>(store: &ParamStore<S>, path: &Path) -> Result<(), NnError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    let count = u32::try_from(store.len())
        .map_err(|_| NnError::Checkpoint("too many tensors".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for (name, param) in store.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        for d in param.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &param.value {
            w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads every tensor in the file as `(name, dims, values)`.
pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, [usize; 4], Vec<f32>)>, NnError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != VERSION {
        return Err(NnError::Checkpoint(format!(
            "unsupported version {}",
            version[0]
        )));
    }
    let count = read_u32(&mut r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            *d = read_u32(&mut r)? as usize;
        }
        let n: usize = dims.iter().product();
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        out.push((name, dims, values));
    }
    Ok(out)
}

/// Loads a checkpoint into an already-built store, requiring an exact match
/// between the file's tensors and the store's parameters.
pub fn load_checkpoint_into<S: Scalar>(
    path: &Path,
    store: &mut ParamStore<S>,
) -> Result<(), NnError> {
    let tensors = load_checkpoint(path)?;
    if tensors.len() != store.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} tensors, store has {}",
            tensors.len(),
            store.len()
        )));
    }
    for (name, dims, values) in tensors {
        if !store.contains(&name) {
            return Err(NnError::Checkpoint(format!("unknown tensor {name}")));
        }
        let p = store.get_mut(&name);
        if p.dims != dims {
            return Err(NnError::Checkpoint(format!(
                "tensor {name}: dims {:?} vs store {:?}",
                dims, p.dims
            )));
        }
        p.value = values.into_iter().map(|v| S::from_f64(v as f64)).collect();
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

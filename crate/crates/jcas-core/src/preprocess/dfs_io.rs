//! Little-endian binary archive for Doppler spectrogram frames.
//!
//! Layout: magic `DFS1`; dims A, B, T' as u32; reported and collection rates
//! as f64; class id u8; tx beam u32; RX patch presence u8 + value u32;
//! subject u32; orientation u8; then A*B*T' magnitudes as f32 in memory
//! order. Axes are not stored, both are reconstructed from the rates.

use std::io::{Read, Write};

use super::stft::DfsFrame;
use super::PreprocessError;
use crate::csi::{DomainLabel, FrameMeta, MotionClass, Orientation};

const MAGIC: &[u8; 4] = b"DFS1";

pub fn write_dfs1<W: Write>(w: &mut W, dfs: &DfsFrame) -> Result<(), PreprocessError> {
    w.write_all(MAGIC)?;
    for dim in [dfs.a, dfs.b, dfs.t] {
        w.write_all(&(dim as u32).to_le_bytes())?;
    }
    w.write_all(&dfs.reported_fs.to_le_bytes())?;
    w.write_all(&dfs.fs_collect.to_le_bytes())?;
    w.write_all(&[dfs.meta.class.id() as u8])?;
    let d = &dfs.meta.domain;
    w.write_all(&d.tx_beam.to_le_bytes())?;
    w.write_all(&[d.rx_patch.is_some() as u8])?;
    w.write_all(&d.rx_patch.unwrap_or(0).to_le_bytes())?;
    w.write_all(&d.subject_id.to_le_bytes())?;
    w.write_all(&[match d.orientation {
        Orientation::Frontal => 0u8,
        Orientation::Orthogonal => 1,
    }])?;
    for v in dfs.values() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

struct Cursor<'a> {
    raw: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], PreprocessError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.raw.len())
            .ok_or_else(|| PreprocessError::Archive(format!("truncated at byte {}", self.pos)))?;
        let slice = &self.raw[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, PreprocessError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PreprocessError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PreprocessError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

pub fn read_dfs1<R: Read>(r: &mut R) -> Result<DfsFrame, PreprocessError> {
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    let mut cur = Cursor { raw: &raw, pos: 0 };

    if cur.bytes(4)? != MAGIC {
        return Err(PreprocessError::Archive("bad magic, expected DFS1".into()));
    }
    let a = cur.u32()? as usize;
    let b = cur.u32()? as usize;
    let t = cur.u32()? as usize;
    let reported_fs = cur.f64()?;
    let fs_collect = cur.f64()?;
    let class_id = cur.u8()?;
    let class = MotionClass::from_id(class_id as u32)
        .ok_or_else(|| PreprocessError::Archive(format!("unknown class id {class_id}")))?;
    let tx_beam = cur.u32()?;
    let has_patch = cur.u8()?;
    let patch_val = cur.u32()?;
    let rx_patch = match has_patch {
        0 => None,
        1 => Some(patch_val),
        v => return Err(PreprocessError::Archive(format!("bad presence byte {v}"))),
    };
    let subject_id = cur.u32()?;
    let orientation = match cur.u8()? {
        0 => Orientation::Frontal,
        1 => Orientation::Orthogonal,
        v => return Err(PreprocessError::Archive(format!("bad orientation byte {v}"))),
    };

    let n = a
        .checked_mul(b)
        .and_then(|x| x.checked_mul(t))
        .ok_or_else(|| PreprocessError::Archive("dims overflow".into()))?;
    let payload = raw.len() - cur.pos;
    if payload != 4 * n {
        return Err(PreprocessError::Archive(format!(
            "payload holds {payload} bytes, dims need {}",
            4 * n
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(f32::from_le_bytes(cur.bytes(4)?.try_into().unwrap()) as f64);
    }

    let half = b / 2;
    let doppler_axis =
        (0..b).map(|i| (i as f64 - half as f64) * reported_fs / b as f64).collect();
    let time_axis = (0..t).map(|c| c as f64 / reported_fs).collect();
    Ok(DfsFrame::from_parts(
        a,
        b,
        t,
        values,
        doppler_axis,
        time_axis,
        reported_fs,
        fs_collect,
        FrameMeta {
            class,
            domain: DomainLabel { tx_beam, rx_patch, subject_id, orientation },
        },
    ))
}

//! Concatenation of capture segments along time.

use super::PreprocessError;
use crate::csi::CsiFrame;

/// Join segments of one recording into a single frame. Segments are matched
/// by their absolute start symbol and must tile the time axis exactly, with
/// no gap and no overlap. Dims other than time must agree.
pub fn stack_csi(segments: &[CsiFrame]) -> Result<CsiFrame, PreprocessError> {
    let Some(first) = segments.first() else {
        return Err(PreprocessError::InconsistentShape("no segments to stack".into()));
    };
    for s in segments {
        if s.a != first.a || s.k != first.k {
            return Err(PreprocessError::InconsistentShape(format!(
                "segment dims {}x{} vs {}x{}",
                s.a, s.k, first.a, first.k
            )));
        }
        if s.fs_collect != first.fs_collect {
            return Err(PreprocessError::InconsistentShape(format!(
                "sampling rate {} vs {}",
                s.fs_collect, first.fs_collect
            )));
        }
        if s.t == 0 {
            return Err(PreprocessError::InconsistentShape("empty segment".into()));
        }
    }

    let mut ordered: Vec<&CsiFrame> = segments.iter().collect();
    ordered.sort_by_key(|s| s.t_offset);
    let mut expected = ordered[0].t_offset;
    for s in &ordered {
        if s.t_offset != expected {
            return Err(PreprocessError::MissingTimeOrder(format!(
                "segment starts at symbol {}, expected {expected}",
                s.t_offset
            )));
        }
        expected += s.t;
    }

    let t_total: usize = ordered.iter().map(|s| s.t).sum();
    let mut out = CsiFrame::new(
        first.a,
        first.k,
        t_total,
        first.fs_collect,
        ordered[0].meta.clone(),
    );
    out.noise_floor_dbm = first.noise_floor_dbm;
    out.t_offset = ordered[0].t_offset;
    let base = out.t_offset;
    for s in &ordered {
        let start = s.t_offset - base;
        for a in 0..s.a {
            for k in 0..s.k {
                let dst = (a * s.k + k) * t_total + start;
                let src = (a * s.k + k) * s.t;
                out.values_mut()[dst..dst + s.t]
                    .copy_from_slice(&s.values()[src..src + s.t]);
            }
        }
    }
    Ok(out)
}

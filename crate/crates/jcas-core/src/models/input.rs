//! Bridges preprocessed Doppler frames into network tensors.

use crate::nn::{NnError, Scalar, Tensor4};
use crate::preprocess::DfsFrame;

/// Packs frames into a `[n, doppler, time, antenna]` batch. All frames must
/// share one shape. With `normalize`, every frame is divided by its own peak
/// magnitude; all-zero frames pass through unscaled.
pub fn frames_to_batch<S: Scalar>(
    frames: &[&DfsFrame],
    normalize: bool,
) -> Result<Tensor4<S>, NnError> {
    let Some(first) = frames.first() else {
        return Err(NnError::Shape("cannot batch zero frames".into()));
    };
    let (a, b, t) = (first.a, first.b, first.t);
    for (i, f) in frames.iter().enumerate() {
        if (f.a, f.b, f.t) != (a, b, t) {
            return Err(NnError::Shape(format!(
                "frame {i} is {}x{}x{}, expected {a}x{b}x{t}",
                f.a, f.b, f.t
            )));
        }
    }
    let mut out = Tensor4::zeros([frames.len(), b, t, a]);
    for (n, f) in frames.iter().enumerate() {
        let scale = if normalize {
            let peak = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                1.0 / peak
            } else {
                1.0
            }
        } else {
            1.0
        };
        for ai in 0..a {
            for bi in 0..b {
                for ti in 0..t {
                    out.set(n, bi, ti, ai, S::from_f64(f.at(ai, bi, ti) * scale));
                }
            }
        }
    }
    Ok(out)
}

/// One-hot targets shaped `[n, 1, 1, classes]` for the cross-entropy loss.
pub fn labels_to_onehot<S: Scalar>(
    labels: &[u32],
    classes: usize,
) -> Result<Tensor4<S>, NnError> {
    let mut y = Tensor4::zeros([labels.len(), 1, 1, classes]);
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= classes {
            return Err(NnError::Config(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        y.set(i, 0, 0, l as usize, S::one());
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{DomainLabel, FrameMeta, MotionClass, Orientation};

    fn frame(a: usize, b: usize, t: usize, values: Vec<f64>) -> DfsFrame {
        DfsFrame::from_parts(
            a,
            b,
            t,
            values,
            vec![0.0; b],
            vec![0.0; t],
            100.0,
            100.0,
            FrameMeta {
                class: MotionClass::Empty,
                domain: DomainLabel {
                    tx_beam: 0,
                    rx_patch: None,
                    subject_id: 0,
                    orientation: Orientation::Frontal,
                },
            },
        )
    }

    #[test]
    fn batch_layout_puts_antennas_in_channels() {
        let (a, b, t) = (2, 3, 4);
        let mut values = vec![0.0; a * b * t];
        for (i, v) in values.iter_mut().enumerate() {
            *v = i as f64;
        }
        let f = frame(a, b, t, values);
        let x: Tensor4<f64> = frames_to_batch(&[&f], false).unwrap();
        assert_eq!(x.dims(), [1, b, t, a]);
        for ai in 0..a {
            for bi in 0..b {
                for ti in 0..t {
                    assert_eq!(x.at(0, bi, ti, ai), f.at(ai, bi, ti));
                }
            }
        }
    }

    #[test]
    fn normalization_scales_each_frame_by_its_own_peak() {
        let f1 = frame(1, 1, 4, vec![1.0, -4.0, 2.0, 0.5]);
        let f2 = frame(1, 1, 4, vec![8.0, 2.0, 0.0, 1.0]);
        let zero = frame(1, 1, 4, vec![0.0; 4]);
        let x: Tensor4<f64> = frames_to_batch(&[&f1, &f2, &zero], true).unwrap();
        assert_eq!(x.at(0, 0, 1, 0), -1.0);
        assert_eq!(x.at(0, 0, 2, 0), 0.5);
        assert_eq!(x.at(1, 0, 0, 0), 1.0);
        assert_eq!(x.at(1, 0, 1, 0), 0.25);
        for ti in 0..4 {
            assert_eq!(x.at(2, 0, ti, 0), 0.0);
        }

        let raw: Tensor4<f64> = frames_to_batch(&[&f1], false).unwrap();
        assert_eq!(raw.at(0, 0, 1, 0), -4.0);
    }

    #[test]
    fn mismatched_or_empty_batches_are_rejected() {
        let f1 = frame(1, 2, 2, vec![0.0; 4]);
        let f2 = frame(1, 2, 3, vec![0.0; 6]);
        assert!(matches!(
            frames_to_batch::<f64>(&[&f1, &f2], false),
            Err(NnError::Shape(_))
        ));
        assert!(frames_to_batch::<f64>(&[], false).is_err());
    }

    #[test]
    fn onehot_targets_mark_exactly_one_class() {
        let y: Tensor4<f64> = labels_to_onehot(&[2, 0, 3], 4).unwrap();
        assert_eq!(y.dims(), [3, 1, 1, 4]);
        let expected = [(0, 2), (1, 0), (2, 3)];
        for (row, class) in expected {
            for k in 0..4 {
                let want = if k == class { 1.0 } else { 0.0 };
                assert_eq!(y.at(row, 0, 0, k), want);
            }
        }
        assert!(labels_to_onehot::<f64>(&[4], 4).is_err());
    }
}

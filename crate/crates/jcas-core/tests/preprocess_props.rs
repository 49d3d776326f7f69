//! Property suite for the reduction pipeline: dims follow the shape law for
//! any valid input tensor, and the outputs are finite magnitudes.

use jcas_core::csi::{CsiFrame, DomainLabel, FrameMeta, MotionClass, Orientation};
use jcas_core::preprocess::{pad_pow2, pca_first_component, stft_spectrogram, StftConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn filled_frame(a: usize, k: usize, t: usize, seed: u64) -> CsiFrame {
    let meta = FrameMeta {
        class: MotionClass::Still,
        domain: DomainLabel {
            tx_beam: 8,
            rx_patch: None,
            subject_id: 1,
            orientation: Orientation::Frontal,
        },
    };
    let mut f = CsiFrame::new(a, k, t, 100.0, meta);
    let salt = (seed % 1009) as f64 * 1e-2;
    for ai in 0..a {
        for ki in 0..k {
            for ti in 0..t {
                let mag = 1.0 + 0.3 * ((ai + 2 * ki + 3 * ti) as f64 + salt).sin();
                let ph = salt + 0.7 * ai as f64 + 0.31 * ki as f64 + 0.11 * ti as f64;
                f.set(ai, ki, ti, Complex64::from_polar(mag, ph));
            }
        }
    }
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pipeline_shape_law(a in 1usize..4, k in 1usize..6, t in 2usize..40, seed in any::<u64>()) {
        let frame = filled_frame(a, k, t, seed);
        let series = pca_first_component(&frame).unwrap();
        prop_assert_eq!((series.a, series.t), (a, t));

        let dfs = stft_spectrogram(&series, &StftConfig::new(100.0)).unwrap();
        prop_assert_eq!((dfs.a, dfs.b, dfs.t), (a, 64, t));

        let padded = pad_pow2(&dfs);
        prop_assert_eq!((padded.a, padded.b, padded.t), (a, 64, t.next_power_of_two()));
        prop_assert!(padded.values().iter().all(|v| *v >= 0.0 && v.is_finite()));
        prop_assert_eq!(padded.doppler_axis.len(), 64);
        prop_assert_eq!(padded.time_axis.len(), padded.t);
    }
}

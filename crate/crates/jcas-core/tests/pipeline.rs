//! End-to-end physics checks: simulator output pushed through the full
//! CSI-to-spectrogram pipeline must place spectral energy where the scene
//! geometry says it belongs.

use jcas_core::csi::{
    bistatic_range_rate, motion_trajectory, simulate_csi, MotionClass, MotionProfile, Orientation,
    SimScenario, SPEED_OF_LIGHT,
};
use jcas_core::preprocess::{
    pca_first_component, stft_spectrogram, subject_position, DfsFrame, StftConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run_pipeline(scenario: &SimScenario, seed: u64, reported_fs: f64) -> DfsFrame {
    let frame = simulate_csi(scenario, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let series = pca_first_component(&frame).unwrap();
    stft_spectrogram(&series, &StftConfig::new(reported_fs)).unwrap()
}

/// Largest Doppler magnitude the profile can produce, from the motion model
/// and array positions alone (no simulation).
fn analytic_peak_doppler(profile: &MotionProfile, scenario: &SimScenario) -> f64 {
    let lambda = SPEED_OF_LIGHT / scenario.beams.carrier_freq;
    if profile.motion_rate <= 0.0 {
        return 0.0;
    }
    let cycle = 1.0 / profile.motion_rate;
    let mut peak = 0.0f64;
    for i in 0..4000 {
        let t = cycle * i as f64 / 4000.0;
        if let Some(traj) = motion_trajectory(profile, t, 0.0) {
            let rate = bistatic_range_rate(&traj, scenario.tx.pos, scenario.rx.pos);
            peak = peak.max(rate.abs() / lambda);
        }
    }
    peak
}

/// Alias a physical frequency into the first Nyquist zone.
fn fold(f: f64, fs: f64) -> f64 {
    let mut x = f % fs;
    if x > fs / 2.0 {
        x -= fs;
    }
    if x < -fs / 2.0 {
        x += fs;
    }
    x
}

/// Antenna-summed magnitude at one (bin, column).
fn cell_energy(dfs: &DfsFrame, bin: usize, col: usize) -> f64 {
    (0..dfs.a).map(|a| dfs.at(a, bin, col)).sum()
}

#[test]
fn empty_room_spectrum_sits_at_zero_hz() {
    let mut s = SimScenario::default();
    s.noise_floor_dbm = -150.0;
    let dfs = run_pipeline(&s, 5, s.fs_collect);
    let center = dfs.b / 2;

    let mut total = 0.0;
    let mut dc = 0.0;
    let mut per_bin = vec![0.0f64; dfs.b];
    for a in 0..dfs.a {
        for b in 0..dfs.b {
            for t in 0..dfs.t {
                let e = dfs.at(a, b, t).powi(2);
                total += e;
                per_bin[b] += e;
                if b.abs_diff(center) <= 1 {
                    dc += e;
                }
            }
        }
    }
    assert!(dc / total > 0.90, "zero-Hz share {}", dc / total);
    let peak_bin = (0..dfs.b).max_by(|&x, &y| per_bin[x].total_cmp(&per_bin[y])).unwrap();
    assert_eq!(peak_bin, center);
}

#[test]
fn squat_sidebands_match_the_path_length_derivative() {
    let mut s = SimScenario::default();
    s.duration = 3.0;
    s.tx_beam = 7;
    s.pos_jitter = 0.0;
    s.subject = MotionProfile::squat(subject_position(1), Orientation::Frontal, 2, s.duration);
    s.subject_id = 1;

    let f_peak = analytic_peak_doppler(&s.subject, &s);
    let dfs = run_pipeline(&s, 11, s.fs_collect);
    let bin_width = s.fs_collect / dfs.b as f64;
    let center = dfs.b / 2;
    assert!(f_peak > 2.0 * bin_width, "scenario too slow for the guard band");

    // Strongest off-DC cell on each Doppler side, interior columns only. The
    // motion covers full cycles, so both signs of the path-length derivative
    // occur.
    let cols = 32..dfs.t - 32;
    for side in [1isize, -1] {
        let mut best = (0usize, 0.0f64);
        for col in cols.clone() {
            for off in 2..center {
                let bin = (center as isize + side * off as isize) as usize;
                let e = cell_energy(&dfs, bin, col);
                if e > best.1 {
                    best = (bin, e);
                }
            }
        }
        let found = dfs.doppler_axis[best.0].abs();
        assert!(
            (found - f_peak).abs() <= bin_width,
            "side {side}: sideband at {found} Hz, analytic peak {f_peak} Hz"
        );
    }
}

#[test]
fn class_pairs_separate_beyond_three_sigma() {
    let fs = 20.0;
    let duration = 5.0;
    let base = subject_position(1);
    let orient = Orientation::Frontal;
    let classes = [
        MotionClass::Empty,
        MotionClass::Still,
        MotionClass::Squat,
        MotionClass::HandGesture,
    ];
    let profile_of = |class: MotionClass| match class {
        MotionClass::Empty => MotionProfile::empty(),
        MotionClass::Still => MotionProfile::still(base, orient),
        MotionClass::Squat => MotionProfile::squat(base, orient, 3, duration),
        MotionClass::HandGesture => MotionProfile::hand_gesture(base, orient),
    };

    let mut scenario = SimScenario::default();
    scenario.fs_collect = fs;
    scenario.duration = duration;
    scenario.tx_beam = 7;
    scenario.tx_power = 1e-3;
    scenario.subject_id = 1;

    // Characteristic Doppler bin per class from the analytic motion model,
    // aliased into band like the spectrogram itself.
    let b_n = 64usize;
    let center = b_n / 2;
    let char_bin: Vec<Option<usize>> = classes
        .iter()
        .map(|&c| {
            let f = fold(analytic_peak_doppler(&profile_of(c), &scenario), fs);
            let bin = (center as f64 + f / (fs / b_n as f64)).round() as usize;
            // DC-adjacent bins carry direct-path leakage; no usable signature.
            (bin.abs_diff(center) >= 2).then_some(bin)
        })
        .collect();

    // Per-class band energies over 20 seeded frames.
    let n_frames = 20;
    let mut band_energy = vec![vec![Vec::new(); classes.len()]; classes.len()];
    for (ci, &class) in classes.iter().enumerate() {
        scenario.subject = profile_of(class);
        for rep in 0..n_frames {
            let dfs = run_pipeline(&scenario, 1000 + (ci * n_frames + rep) as u64, fs);
            assert_eq!(dfs.b, b_n);
            for (bi, bin) in char_bin.iter().enumerate() {
                let Some(bin) = bin else { continue };
                let mut e = 0.0;
                for b in bin - 1..=bin + 1 {
                    for t in 0..dfs.t {
                        e += cell_energy(&dfs, b, t);
                    }
                }
                band_energy[bi][ci].push(e / dfs.t as f64);
            }
        }
    }

    let stats = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        (m, v.sqrt())
    };
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            let separated = (0..classes.len()).any(|bi| {
                if char_bin[bi].is_none() || (bi != i && bi != j) {
                    return false;
                }
                let (mi, si) = stats(&band_energy[bi][i]);
                let (mj, sj) = stats(&band_energy[bi][j]);
                (mi - mj).abs() > 3.0 * si.max(sj)
            });
            assert!(
                separated,
                "classes {:?} and {:?} overlap at both characteristic bins",
                classes[i], classes[j]
            );
        }
    }
}

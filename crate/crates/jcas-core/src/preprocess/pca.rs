//! First-principal-component reduction of the subcarrier dimension, one RX
//! beam at a time. Covariance is estimated from mean-centered subcarrier
//! vectors; the raw (uncentered) vectors are projected onto the dominant
//! eigenvector so a static propagation path keeps its DC line in the
//! spectrogram.

use num_complex::Complex64;

use super::PreprocessError;
use crate::csi::{CsiFrame, FrameMeta};

const POWER_ITER_TOL: f64 = 1e-10;
const POWER_ITER_MAX: usize = 500;
/// Rayleigh-quotient stagnation: stop once the eigenvalue estimate is flat
/// for this many consecutive iterations. Noise-dominated antennas have no
/// spectral gap, so the vector tolerance alone would always burn the full
/// iteration budget there.
const STAGNATION_RUNS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaMode {
    /// Hermitian covariance of the complex subcarrier vectors.
    Complex,
    /// Covariance of |h|; kept for comparison runs.
    Amplitude,
}

/// Per-beam reduced series, A x T with T fastest, plus the antennas whose
/// covariance was exactly zero (their rows are zero-filled).
#[derive(Debug, Clone)]
pub struct PcaSeries {
    pub a: usize,
    pub t: usize,
    pub data: Vec<Complex64>,
    pub degenerate: Vec<usize>,
    pub fs_collect: f64,
    pub meta: FrameMeta,
}

impl PcaSeries {
    pub fn antenna(&self, a: usize) -> &[Complex64] {
        &self.data[a * self.t..(a + 1) * self.t]
    }
}

/// Reduce one antenna's K x T block. Errors on exactly-zero covariance;
/// callers substitute a zero series and flag the antenna.
pub fn pca_antenna(frame: &CsiFrame, a: usize, mode: PcaMode) -> Result<Vec<Complex64>, PreprocessError> {
    let (k_n, t_n) = (frame.k, frame.t);
    let block = frame.antenna(a);
    let data: Vec<Complex64> = match mode {
        PcaMode::Complex => block.to_vec(),
        PcaMode::Amplitude => block.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
    };

    // Center each subcarrier row over time for the covariance estimate.
    let mut centered = data.clone();
    for k in 0..k_n {
        let row = &mut centered[k * t_n..(k + 1) * t_n];
        let mean = row.iter().sum::<Complex64>() / t_n as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
    }
    let row_power: Vec<f64> = (0..k_n)
        .map(|k| centered[k * t_n..(k + 1) * t_n].iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let total: f64 = row_power.iter().sum();
    if total == 0.0 {
        return Err(PreprocessError::DegenerateInput);
    }

    // Hermitian covariance C = Xc Xc^H / T, built once; the iteration cost
    // then scales with K^2 instead of K*T.
    let mut cov = vec![Complex64::new(0.0, 0.0); k_n * k_n];
    for i in 0..k_n {
        let ri = &centered[i * t_n..(i + 1) * t_n];
        for j in i..k_n {
            let rj = &centered[j * t_n..(j + 1) * t_n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, y) in ri.iter().zip(rj) {
                acc += x * y.conj();
            }
            acc /= t_n as f64;
            cov[i * k_n + j] = acc;
            cov[j * k_n + i] = acc.conj();
        }
    }

    // Power iteration from the strongest subcarrier axis.
    let start = row_power
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap();
    let mut v = vec![Complex64::new(0.0, 0.0); k_n];
    v[start] = Complex64::new(1.0, 0.0);

    let mut lambda_prev = f64::INFINITY;
    let mut flat = 0usize;
    for _ in 0..POWER_ITER_MAX {
        let mut y = vec![Complex64::new(0.0, 0.0); k_n];
        for i in 0..k_n {
            let row = &cov[i * k_n..(i + 1) * k_n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, vk) in row.iter().zip(&v) {
                acc += c * vk;
            }
            y[i] = acc;
        }
        let lambda = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if lambda == 0.0 {
            // Numerically dead direction; fall back to the start axis.
            break;
        }
        let mut delta = 0.0;
        for (vk, yk) in v.iter_mut().zip(&y) {
            let next = yk / lambda;
            delta += (next - *vk).norm_sqr();
            *vk = next;
        }
        if delta.sqrt() <= POWER_ITER_TOL {
            break;
        }
        if (lambda - lambda_prev).abs() <= 1e-13 * lambda.max(1e-300) {
            flat += 1;
            if flat >= STAGNATION_RUNS {
                break;
            }
        } else {
            flat = 0;
        }
        lambda_prev = lambda;
    }

    // Project the uncentered vectors.
    let mut series = vec![Complex64::new(0.0, 0.0); t_n];
    for k in 0..k_n {
        let vk = v[k].conj();
        if vk.norm_sqr() == 0.0 {
            continue;
        }
        let row = &data[k * t_n..(k + 1) * t_n];
        for (s, x) in series.iter_mut().zip(row) {
            *s += vk * x;
        }
    }
    Ok(series)
}

pub fn pca_first_component(frame: &CsiFrame) -> Result<PcaSeries, PreprocessError> {
    pca_first_component_mode(frame, PcaMode::Complex)
}

/// Reduce every antenna; zero-fills and flags degenerate ones. Errors only
/// when the whole frame is degenerate.
pub fn pca_first_component_mode(
    frame: &CsiFrame,
    mode: PcaMode,
) -> Result<PcaSeries, PreprocessError> {
    if frame.t < 2 {
        return Err(PreprocessError::Config("need at least two time symbols".into()));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); frame.a * frame.t];
    let mut degenerate = Vec::new();
    for a in 0..frame.a {
        match pca_antenna(frame, a, mode) {
            Ok(series) => data[a * frame.t..(a + 1) * frame.t].copy_from_slice(&series),
            Err(PreprocessError::DegenerateInput) => degenerate.push(a),
            Err(e) => return Err(e),
        }
    }
    if degenerate.len() == frame.a {
        return Err(PreprocessError::DegenerateInput);
    }
    Ok(PcaSeries {
        a: frame.a,
        t: frame.t,
        data,
        degenerate,
        fs_collect: frame.fs_collect,
        meta: frame.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{DomainLabel, MotionClass, Orientation};
    use nalgebra::{Complex, DMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta() -> FrameMeta {
        FrameMeta {
            class: MotionClass::Empty,
            domain: DomainLabel {
                tx_beam: 8,
                rx_patch: None,
                subject_id: 0,
                orientation: Orientation::Frontal,
            },
        }
    }

    fn frame_from(k: usize, t: usize, mut fill: impl FnMut(usize, usize) -> Complex64) -> CsiFrame {
        let mut f = CsiFrame::new(1, k, t, 1.0, meta());
        for ki in 0..k {
            for ti in 0..t {
                f.set(0, ki, ti, fill(ki, ti));
            }
        }
        f
    }

    #[test]
    fn rank_one_data_recovers_the_time_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k_n = 24;
        let t_n = 40;
        let v: Vec<Complex64> = (0..k_n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let s: Vec<Complex64> = (0..t_n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let f = frame_from(k_n, t_n, |k, t| v[k] * s[t]);
        let out = pca_antenna(&f, 0, PcaMode::Complex).unwrap();
        let inner: Complex64 = out.iter().zip(&s).map(|(a, b)| a * b.conj()).sum();
        let n1: f64 = out.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let n2: f64 = s.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let corr = inner.norm() / (n1 * n2);
        assert!(corr >= 0.999, "correlation {corr}");
    }

    #[test]
    fn zeroed_antenna_is_degenerate() {
        let f = frame_from(8, 10, |_, _| Complex64::new(0.0, 0.0));
        assert!(matches!(
            pca_antenna(&f, 0, PcaMode::Complex),
            Err(PreprocessError::DegenerateInput)
        ));
        assert!(matches!(
            pca_first_component(&f),
            Err(PreprocessError::DegenerateInput)
        ));
    }

    #[test]
    fn projected_variance_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k_n, t_n) = (100, 64);
        let f = frame_from(k_n, t_n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let out = pca_antenna(&f, 0, PcaMode::Complex).unwrap();
        let mean: Complex64 = out.iter().sum::<Complex64>() / t_n as f64;
        let var: f64 = out.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / t_n as f64;

        // Dense Hermitian covariance of the centered data.
        let mut centered = DMatrix::from_fn(k_n, t_n, |k, t| {
            let v = f.at(0, k, t);
            Complex::new(v.re, v.im)
        });
        for k in 0..k_n {
            let mean = centered.row(k).sum() / Complex::new(t_n as f64, 0.0);
            for t in 0..t_n {
                centered[(k, t)] -= mean;
            }
        }
        let cov = (&centered * centered.adjoint()) / Complex::new(t_n as f64, 0.0);
        let lambda_max = cov
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |m, &e| m.max(e));
        assert!(
            (var - lambda_max).abs() <= 1e-6 * lambda_max,
            "var {var} vs lambda {lambda_max}"
        );
    }

    #[test]
    fn global_phase_rotation_leaves_magnitudes_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<Complex64> = (0..12 * 20)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let f = frame_from(12, 20, |k, t| vals[k * 20 + t]);
        let rot = Complex64::from_polar(1.0, 1.234);
        let g = frame_from(12, 20, |k, t| vals[k * 20 + t] * rot);
        let a = pca_antenna(&f, 0, PcaMode::Complex).unwrap();
        let b = pca_antenna(&g, 0, PcaMode::Complex).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.norm() - y.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_zeroing_flags_only_dead_antennas() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut f = CsiFrame::new(4, 6, 16, 1.0, meta());
        for a in [0usize, 2] {
            for k in 0..6 {
                for t in 0..16 {
                    f.set(a, k, t, Complex64::new(rng.random::<f64>(), rng.random::<f64>()));
                }
            }
        }
        let out = pca_first_component(&f).unwrap();
        assert_eq!(out.degenerate, vec![1, 3]);
        assert!(out.antenna(1).iter().all(|c| c.norm() == 0.0));
        assert!(out.antenna(0).iter().any(|c| c.norm() > 0.0));
    }
}

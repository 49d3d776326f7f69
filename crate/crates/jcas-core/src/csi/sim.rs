//! Frame synthesis: LOS path + moving human scatterer + optional clutter,
//! each carried through the beam patterns, plus circular complex noise at the
//! configured floor. Also the per-antenna SNR gate the capture device applies.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::motion::{motion_trajectory, MotionClass};
use super::scenario::{DomainLabel, SimScenario, Vec3};
use super::CsiError;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default gate threshold in dB above the noise floor.
pub const SNR_ZERO_THRESHOLD_DB: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeta {
    pub class: MotionClass,
    pub domain: DomainLabel,
}

/// Complex channel tensor, dims A x K x T with T fastest. One time symbol
/// carries A*K complex samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    pub a: usize,
    pub k: usize,
    pub t: usize,
    values: Vec<Complex64>,
    pub fs_collect: f64,
    pub noise_floor_dbm: f64,
    /// Absolute index of the first time symbol; nonzero for segments cut
    /// from a longer recording.
    pub t_offset: usize,
    pub meta: FrameMeta,
}

impl CsiFrame {
    pub fn new(a: usize, k: usize, t: usize, fs_collect: f64, meta: FrameMeta) -> Self {
        Self {
            a,
            k,
            t,
            values: vec![Complex64::new(0.0, 0.0); a * k * t],
            fs_collect,
            noise_floor_dbm: -93.85,
            t_offset: 0,
            meta,
        }
    }

    #[inline]
    pub fn idx(&self, a: usize, k: usize, t: usize) -> usize {
        debug_assert!(a < self.a && k < self.k && t < self.t);
        (a * self.k + k) * self.t + t
    }

    #[inline]
    pub fn at(&self, a: usize, k: usize, t: usize) -> Complex64 {
        self.values[self.idx(a, k, t)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, k: usize, t: usize, v: Complex64) {
        let i = self.idx(a, k, t);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Contiguous K x T block of one antenna.
    pub fn antenna(&self, a: usize) -> &[Complex64] {
        &self.values[a * self.k * self.t..(a + 1) * self.k * self.t]
    }
}

fn default_meta(scenario: &SimScenario) -> FrameMeta {
    FrameMeta {
        class: scenario.subject.class,
        domain: scenario.domain_label(),
    }
}

/// Synthesize one CSI frame. Deterministic in (scenario, rng seed): the rng
/// drives the motion phase, a small subject position jitter, and the noise,
/// in that order.
pub fn simulate_csi<R: Rng>(scenario: &SimScenario, rng: &mut R) -> Result<CsiFrame, CsiError> {
    scenario.validate()?;
    let a_n = scenario.beams.n_beams;
    let k_n = scenario.n_subcarriers;
    let t_n = scenario.n_symbols();

    let two_pi = 2.0 * core::f64::consts::PI;
    let motion_phase = rng.random::<f64>() * two_pi;
    let jitter = Normal::new(0.0, scenario.pos_jitter.max(1e-12)).unwrap();
    let jx: f64 = jitter.sample(rng);
    let jy: f64 = jitter.sample(rng);
    let clutter_phase = rng.random::<f64>() * two_pi;

    let mut subject = scenario.subject;
    subject.base_pos = subject.base_pos.add(Vec3::new(jx, jy, 0.0));

    let amp_tx = scenario.tx_power.sqrt() * 10f64.powf(-scenario.system_loss_db / 20.0);
    let noise_sigma = (scenario.noise_power_watts() / 2.0).sqrt();
    let noise = Normal::new(0.0, noise_sigma).unwrap();

    // LOS geometry is static.
    let d_los = scenario.tx.pos.distance(scenario.rx.pos);
    let theta_tx_rx = scenario.tx.azimuth_to(scenario.rx.pos);
    let theta_rx_tx = scenario.rx.azimuth_to(scenario.tx.pos);
    let tau_los = d_los / SPEED_OF_LIGHT;

    // Scatterer path per symbol (None for the empty class).
    struct Path {
        /// RX-side azimuth per symbol.
        thetas: Vec<f64>,
        /// g_tx, spreading amplitude, and propagation phase folded together,
        /// flattened k-major [k][t]. Only the RX beam gain is left out.
        tx_side: Vec<Complex64>,
    }
    let build_path = |positions: &[Option<Vec3>],
                          rcs_amp: f64|
     -> Result<Option<(Vec<f64>, Vec<Complex64>)>, CsiError> {
        if positions.iter().all(|p| p.is_none()) {
            return Ok(None);
        }
        let mut thetas = Vec::with_capacity(t_n);
        let mut tx_side = vec![Complex64::new(0.0, 0.0); k_n * t_n];
        let mut geom = Vec::with_capacity(t_n);
        for p in positions.iter() {
            let p = p.expect("mixed empty trajectory");
            if !scenario.room.contains(p) {
                return Err(CsiError::Geometry(format!(
                    "scatterer left the room at ({:.2}, {:.2}, {:.2})",
                    p.x, p.y, p.z
                )));
            }
            let d1 = scenario.tx.pos.distance(p);
            let d2 = scenario.rx.pos.distance(p);
            thetas.push(scenario.rx.azimuth_to(p));
            geom.push((scenario.tx.azimuth_to(p), d1, d2));
        }
        for k in 0..k_n {
            let f_k = scenario.subcarrier_freq(k);
            let lambda = SPEED_OF_LIGHT / f_k;
            for (t, &(theta_tx, d1, d2)) in geom.iter().enumerate() {
                let g_tx =
                    super::beams::butler_gain(&scenario.beams, scenario.tx_beam, theta_tx, f_k)?;
                let spread = lambda / (4.0 * core::f64::consts::PI * d1 * d2);
                let phase = -two_pi * f_k * (d1 + d2) / SPEED_OF_LIGHT;
                tx_side[k * t_n + t] = g_tx
                    * Complex64::from_polar(amp_tx * rcs_amp * spread, phase);
            }
        }
        Ok(Some((thetas, tx_side)))
    };

    let orientation_rcs = match subject.orientation {
        super::scenario::Orientation::Frontal => 1.0,
        super::scenario::Orientation::Orthogonal => 0.7,
    };
    let subject_positions: Vec<Option<Vec3>> = (0..t_n)
        .map(|t| {
            motion_trajectory(&subject, t as f64 / scenario.fs_collect, motion_phase)
                .map(|tr| tr.pos)
        })
        .collect();
    let subject_path = build_path(&subject_positions, subject.rcs_scale * orientation_rcs)?
        .map(|(thetas, tx_side)| Path { thetas, tx_side });

    // Clutter oscillates in place along y.
    let clutter_path = match scenario.clutter {
        None => None,
        Some(c) => {
            let positions: Vec<Option<Vec3>> = (0..t_n)
                .map(|t| {
                    let psi = two_pi * c.rate_hz * t as f64 / scenario.fs_collect + clutter_phase;
                    Some(c.pos.add(Vec3::new(0.0, c.excursion_m * psi.sin(), 0.0)))
                })
                .collect();
            build_path(&positions, c.amplitude)?.map(|(thetas, tx_side)| Path { thetas, tx_side })
        }
    };

    let mut frame = CsiFrame::new(a_n, k_n, t_n, scenario.fs_collect, default_meta(scenario));
    frame.noise_floor_dbm = scenario.noise_floor_dbm;

    for a in 0..a_n {
        for k in 0..k_n {
            let f_k = scenario.subcarrier_freq(k);
            let lambda = SPEED_OF_LIGHT / f_k;
            let g_tx_los =
                super::beams::butler_gain(&scenario.beams, scenario.tx_beam, theta_tx_rx, f_k)?;
            let g_rx_los = super::beams::butler_gain(&scenario.beams, a + 1, theta_rx_tx, f_k)?;
            let los = g_tx_los
                * g_rx_los
                * Complex64::from_polar(
                    amp_tx * lambda / (4.0 * core::f64::consts::PI * d_los),
                    -two_pi * f_k * tau_los,
                );
            for t in 0..t_n {
                let mut h = los;
                if let Some(path) = &subject_path {
                    let g_rx = super::beams::butler_gain(
                        &scenario.beams,
                        a + 1,
                        path.thetas[t],
                        f_k,
                    )?;
                    h += path.tx_side[k * t_n + t] * g_rx;
                }
                if let Some(path) = &clutter_path {
                    let g_rx = super::beams::butler_gain(
                        &scenario.beams,
                        a + 1,
                        path.thetas[t],
                        f_k,
                    )?;
                    h += path.tx_side[k * t_n + t] * g_rx;
                }
                h += Complex64::new(noise.sample(rng), noise.sample(rng));
                frame.set(a, k, t, h);
            }
        }
    }
    Ok(frame)
}

/// Zero every antenna whose average SNR sits below `threshold_db` over the
/// frame's noise floor. Signal power is estimated as mean power minus the
/// floor, so noise-only antennas land far below any positive threshold.
pub fn apply_snr_zeroing(mut frame: CsiFrame, threshold_db: f64) -> CsiFrame {
    let p_noise = 10f64.powf((frame.noise_floor_dbm - 30.0) / 10.0);
    let per_antenna = frame.k * frame.t;
    for a in 0..frame.a {
        let start = a * per_antenna;
        let mean_power: f64 = frame.values[start..start + per_antenna]
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            / per_antenna as f64;
        let signal = (mean_power - p_noise).max(1e-30);
        let snr_db = 10.0 * (signal / p_noise).log10();
        if snr_db < threshold_db {
            for v in &mut frame.values[start..start + per_antenna] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    frame
}

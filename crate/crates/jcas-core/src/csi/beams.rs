//! 16-beam uniform-linear-array beam model with a Butler-style fixed phase
//! network: half-wavelength element spacing at the carrier, one beam per
//! progressive phase slope, raised-cosine taper so center beams peak above
//! edge beams.

use num_complex::Complex64;

use super::CsiError;

#[derive(Debug, Clone)]
pub struct BeamSet {
    pub n_beams: usize,
    pub element_count: usize,
    pub carrier_freq: f64,
    pub edge_attenuation_db: f64,
    /// Steering angle per beam (radians), strictly increasing.
    steering: Vec<f64>,
    /// Amplitude scale per beam derived from `edge_attenuation_db`.
    taper: Vec<f64>,
}

impl Default for BeamSet {
    fn default() -> Self {
        Self::new(16, 16, 26e9, 20.0)
    }
}

impl BeamSet {
    pub fn new(
        n_beams: usize,
        element_count: usize,
        carrier_freq: f64,
        edge_attenuation_db: f64,
    ) -> Self {
        assert!(n_beams >= 2 && element_count >= 2 && carrier_freq > 0.0);
        let center = (n_beams as f64 + 1.0) / 2.0;
        let half_span = (n_beams as f64 - 1.0) / 2.0;
        let mut steering = Vec::with_capacity(n_beams);
        let mut taper = Vec::with_capacity(n_beams);
        for m in 1..=n_beams {
            steering.push(Self::slope(m, n_beams).asin());
            // Raised-cosine ramp: ~0 attenuation at the two center beams,
            // full edge_attenuation_db at beams 1 and n.
            let ramp = (1.0 - (core::f64::consts::PI * (m as f64 - center).abs() / half_span).cos())
                / 2.0;
            taper.push(10f64.powf(-edge_attenuation_db * ramp / 20.0));
        }
        Self {
            n_beams,
            element_count,
            carrier_freq,
            edge_attenuation_db,
            steering,
            taper,
        }
    }

    /// Progressive phase slope of beam m in sin-angle space: (2m - n - 1) / n.
    fn slope(m: usize, n_beams: usize) -> f64 {
        (2.0 * m as f64 - n_beams as f64 - 1.0) / n_beams as f64
    }

    pub fn steering_angle(&self, beam_idx: usize) -> Result<f64, CsiError> {
        self.check(beam_idx)?;
        Ok(self.steering[beam_idx - 1])
    }

    /// Peak amplitude gain of a beam at its own steering angle and the carrier.
    pub fn peak_gain(&self, beam_idx: usize) -> Result<f64, CsiError> {
        self.check(beam_idx)?;
        Ok(self.taper[beam_idx - 1] * self.element_count as f64)
    }

    fn check(&self, beam_idx: usize) -> Result<(), CsiError> {
        if beam_idx == 0 || beam_idx > self.n_beams {
            return Err(CsiError::BeamIndex {
                beam: beam_idx,
                n_beams: self.n_beams,
            });
        }
        Ok(())
    }
}

/// Complex array-factor gain of one beam at an azimuth angle and frequency.
///
/// The phase network is fixed, so off-carrier frequencies squint the pattern:
/// per-element electrical phase scales with f/fc while the beam slope does
/// not. Role-free: the same value applies whether the array transmits or
/// receives.
pub fn butler_gain(
    beams: &BeamSet,
    beam_idx: usize,
    angle: f64,
    freq: f64,
) -> Result<Complex64, CsiError> {
    beams.check(beam_idx)?;
    let slope = BeamSet::slope(beam_idx, beams.n_beams);
    let phi = core::f64::consts::PI * (freq / beams.carrier_freq * angle.sin() - slope);
    let n = beams.element_count as f64;
    // Geometric sum over elements: sin(n phi/2)/sin(phi/2) * e^{j phi (n-1)/2}.
    let half = phi / 2.0;
    let ratio = if half.sin().abs() < 1e-9 {
        n * (n * half).cos() / half.cos()
    } else {
        (n * half).sin() / half.sin()
    };
    let amp = beams.taper[beam_idx - 1] * ratio;
    let phase = (n - 1.0) * half;
    Ok(Complex64::new(amp * phase.cos(), amp * phase.sin()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(power_ratio: f64) -> f64 {
        10.0 * power_ratio.log10()
    }

    #[test]
    fn steering_angles_strictly_increase() {
        let b = BeamSet::default();
        for m in 1..16 {
            assert!(b.steering_angle(m + 1).unwrap() > b.steering_angle(m).unwrap());
        }
    }

    #[test]
    fn own_angle_is_the_pattern_peak() {
        let b = BeamSet::default();
        for m in [1, 5, 8, 12, 16] {
            let own = b.steering_angle(m).unwrap();
            let peak = butler_gain(&b, m, own, b.carrier_freq).unwrap().norm();
            assert!((peak - b.peak_gain(m).unwrap()).abs() < 1e-9);
            // Dense angle sweep never exceeds the on-steer value.
            for i in 0..=2000 {
                let ang = -1.5 + 3.0 * i as f64 / 2000.0;
                let g = butler_gain(&b, m, ang, b.carrier_freq).unwrap().norm();
                assert!(g <= peak + 1e-9);
            }
        }
    }

    #[test]
    fn cross_beam_angles_sit_in_nulls() {
        let b = BeamSet::default();
        for m in 1..=16 {
            let peak = b.peak_gain(m).unwrap();
            for other in 1..=16 {
                if other == m {
                    continue;
                }
                let ang = b.steering_angle(other).unwrap();
                let g = butler_gain(&b, m, ang, b.carrier_freq).unwrap().norm();
                assert!(
                    db((g / peak).powi(2).max(1e-30)) <= -20.0,
                    "beam {m} at steering of {other}: {g}"
                );
            }
        }
    }

    #[test]
    fn center_to_edge_spread_within_configured_bound() {
        let b = BeamSet::default();
        let spread =
            db(b.peak_gain(8).unwrap().powi(2)) - db(b.peak_gain(1).unwrap().powi(2));
        assert!(spread >= 10.0 && spread <= b.edge_attenuation_db + 1e-9);
        // Symmetric at the other edge.
        let spread16 =
            db(b.peak_gain(9).unwrap().powi(2)) - db(b.peak_gain(16).unwrap().powi(2));
        assert!((spread - spread16).abs() < 1e-9);
    }

    #[test]
    fn off_carrier_frequency_squints_the_pattern() {
        let b = BeamSet::default();
        let own = b.steering_angle(4).unwrap();
        let on = butler_gain(&b, 4, own, b.carrier_freq).unwrap().norm();
        let off = butler_gain(&b, 4, own, b.carrier_freq * 1.02).unwrap().norm();
        assert!(off < on);
    }

    #[test]
    fn beam_index_bounds_checked() {
        let b = BeamSet::default();
        assert!(matches!(
            butler_gain(&b, 0, 0.0, 26e9),
            Err(CsiError::BeamIndex { .. })
        ));
        assert!(matches!(
            butler_gain(&b, 17, 0.0, 26e9),
            Err(CsiError::BeamIndex { .. })
        ));
    }
}

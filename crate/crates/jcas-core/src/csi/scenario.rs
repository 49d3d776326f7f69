//! Room geometry, array placement, and scenario configuration.

use super::beams::BeamSet;
use super::motion::MotionProfile;
use super::CsiError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Self = Self { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        self.sub(o).norm()
    }
}

/// Floor rectangle; arrays and subjects must stay inside it.
#[derive(Debug, Clone, Copy)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
}

impl Default for Room {
    fn default() -> Self {
        Self { width: 11.0, depth: 6.5 }
    }
}

impl Room {
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.depth && p.z >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Frontal,
    Orthogonal,
}

impl Orientation {
    /// Horizontal unit vector the subject faces; frontal means toward the
    /// transmitter boresight axis.
    pub fn facing(self) -> Vec3 {
        match self {
            Orientation::Frontal => Vec3::new(1.0, 0.0, 0.0),
            Orientation::Orthogonal => Vec3::new(0.0, 1.0, 0.0),
        }
    }
}

/// An array position plus the azimuth its boresight points at (radians in the
/// floor plane, 0 along +x).
#[derive(Debug, Clone, Copy)]
pub struct ArrayGeometry {
    pub pos: Vec3,
    pub boresight_azimuth: f64,
}

impl ArrayGeometry {
    pub fn new(pos: Vec3, boresight_azimuth: f64) -> Self {
        Self { pos, boresight_azimuth }
    }

    /// Azimuth of a target relative to boresight, wrapped to [-pi, pi].
    pub fn azimuth_to(&self, target: Vec3) -> f64 {
        let d = target.sub(self.pos);
        let mut a = d.y.atan2(d.x) - self.boresight_azimuth;
        while a > core::f64::consts::PI {
            a -= 2.0 * core::f64::consts::PI;
        }
        while a < -core::f64::consts::PI {
            a += 2.0 * core::f64::consts::PI;
        }
        a
    }
}

/// Static nuisance scatterer with its own micro-oscillation. Used to inject
/// per-TX-beam spectral signatures for domain-shift stress scenarios.
#[derive(Debug, Clone, Copy)]
pub struct Clutter {
    pub pos: Vec3,
    /// Multiplies the bistatic reflection amplitude.
    pub amplitude: f64,
    pub rate_hz: f64,
    pub excursion_m: f64,
}

impl Clutter {
    /// Oscillation rate keyed to the TX beam index so each beam leaves a
    /// distinct spectral fingerprint unrelated to the motion class.
    pub fn beam_signature(tx_beam: usize) -> Self {
        Self {
            pos: Vec3::new(6.5, 4.8, 0.9),
            amplitude: 3.0,
            rate_hz: 0.5 * tx_beam as f64,
            excursion_m: 0.02,
        }
    }
}

/// Domain factors attached to every frame. `rx_patch` stays `None` until a
/// sample is unstacked along the RX antenna dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DomainLabel {
    pub tx_beam: u32,
    pub rx_patch: Option<u32>,
    pub subject_id: u32,
    pub orientation: Orientation,
}

#[derive(Debug, Clone)]
pub struct SimScenario {
    pub room: Room,
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub beams: BeamSet,
    pub tx_beam: usize,
    pub subject: MotionProfile,
    pub subject_id: u32,
    /// Watts.
    pub tx_power: f64,
    /// Fixed implementation loss (cabling, quantization) applied to every
    /// propagation path.
    pub system_loss_db: f64,
    pub noise_floor_dbm: f64,
    pub fs_collect: f64,
    /// Seconds per frame.
    pub duration: f64,
    pub n_subcarriers: usize,
    pub bandwidth: f64,
    pub clutter: Option<Clutter>,
    /// Std-dev of the per-frame subject position jitter (m).
    pub pos_jitter: f64,
}

/// TX beams outside this range arrive with too little SNR to survive the
/// device's zeroing stage, so dataset builders refuse them.
pub const USABLE_TX_BEAMS: core::ops::RangeInclusive<usize> = 3..=14;

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            room: Room::default(),
            tx: ArrayGeometry::new(Vec3::new(0.5, 3.25, 0.9), 0.0),
            rx: ArrayGeometry::new(Vec3::new(10.5, 3.25, 0.9), core::f64::consts::PI),
            beams: BeamSet::default(),
            tx_beam: 8,
            subject: MotionProfile::empty(),
            subject_id: 0,
            tx_power: 1e-4,
            system_loss_db: 15.0,
            noise_floor_dbm: -93.85,
            fs_collect: 100.0,
            duration: 2.0,
            n_subcarriers: 100,
            bandwidth: 20e6,
            clutter: None,
            pos_jitter: 0.05,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), CsiError> {
        if !self.room.contains(self.tx.pos) || !self.room.contains(self.rx.pos) {
            return Err(CsiError::Geometry("array position outside room".into()));
        }
        if self.tx_beam == 0 || self.tx_beam > self.beams.n_beams {
            return Err(CsiError::BeamIndex {
                beam: self.tx_beam,
                n_beams: self.beams.n_beams,
            });
        }
        if self.n_subcarriers == 0 {
            return Err(CsiError::Geometry("need at least one subcarrier".into()));
        }
        if !(self.fs_collect > 0.0) || !(self.duration > 0.0) {
            return Err(CsiError::Geometry("fs_collect and duration must be positive".into()));
        }
        Ok(())
    }

    pub fn domain_label(&self) -> DomainLabel {
        DomainLabel {
            tx_beam: self.tx_beam as u32,
            rx_patch: None,
            subject_id: self.subject_id,
            orientation: self.subject.orientation,
        }
    }

    /// Time symbols per frame.
    pub fn n_symbols(&self) -> usize {
        (self.duration * self.fs_collect).round() as usize
    }

    pub fn noise_power_watts(&self) -> f64 {
        10f64.powf((self.noise_floor_dbm - 30.0) / 10.0)
    }

    /// Subcarrier center frequency, spaced bandwidth/K around the carrier.
    pub fn subcarrier_freq(&self, k: usize) -> f64 {
        let k0 = (self.n_subcarriers as f64 - 1.0) / 2.0;
        self.beams.carrier_freq + (k as f64 - k0) * self.bandwidth / self.n_subcarriers as f64
    }
}

//! Human-motion models: each class maps to a deterministic scatterer
//! trajectory parameterized by rate, amplitude, and facing direction.

use super::scenario::{Orientation, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MotionClass {
    Empty,
    Still,
    Squat,
    HandGesture,
}

impl MotionClass {
    pub fn id(self) -> u32 {
        match self {
            MotionClass::Empty => 0,
            MotionClass::Still => 1,
            MotionClass::Squat => 2,
            MotionClass::HandGesture => 3,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(MotionClass::Empty),
            1 => Some(MotionClass::Still),
            2 => Some(MotionClass::Squat),
            3 => Some(MotionClass::HandGesture),
            _ => None,
        }
    }

    pub const ALL: [MotionClass; 4] = [
        MotionClass::Empty,
        MotionClass::Still,
        MotionClass::Squat,
        MotionClass::HandGesture,
    ];

    /// Stable lowercase name, used in artifact filenames.
    pub fn as_str(self) -> &'static str {
        match self {
            MotionClass::Empty => "empty",
            MotionClass::Still => "still",
            MotionClass::Squat => "squat",
            MotionClass::HandGesture => "hand_gesture",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MotionClass::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MotionProfile {
    pub class: MotionClass,
    pub base_pos: Vec3,
    pub orientation: Orientation,
    pub motion_rate: f64,
    pub motion_amplitude: f64,
    /// Motion executions within one frame; drives the rate for cyclic
    /// classes built through the constructors.
    pub repetitions: u32,
    pub rcs_scale: f64,
}

impl MotionProfile {
    pub fn empty() -> Self {
        Self {
            class: MotionClass::Empty,
            base_pos: Vec3::ZERO,
            orientation: Orientation::Frontal,
            motion_rate: 0.0,
            motion_amplitude: 0.0,
            repetitions: 0,
            rcs_scale: 0.0,
        }
    }

    /// Standing still: residual micro-motion (breathing and sway).
    pub fn still(base_pos: Vec3, orientation: Orientation) -> Self {
        Self {
            class: MotionClass::Still,
            base_pos,
            orientation,
            motion_rate: 1.2,
            motion_amplitude: 0.005,
            repetitions: 0,
            rcs_scale: 0.5,
        }
    }

    /// Vertical squat cycles; one cycle per repetition spread over the frame.
    pub fn squat(base_pos: Vec3, orientation: Orientation, repetitions: u32, duration: f64) -> Self {
        Self {
            class: MotionClass::Squat,
            base_pos,
            orientation,
            motion_rate: repetitions as f64 / duration,
            motion_amplitude: 0.35,
            repetitions,
            rcs_scale: 0.5,
        }
    }

    /// Fine-grained hand movement: small horizontal swing at a fixed rate.
    pub fn hand_gesture(base_pos: Vec3, orientation: Orientation) -> Self {
        Self {
            class: MotionClass::HandGesture,
            base_pos,
            orientation,
            motion_rate: 6.0,
            motion_amplitude: 0.05,
            repetitions: 1,
            rcs_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub pos: Vec3,
    pub vel: Vec3,
}

/// Scatterer state at time t, or None for the empty class. `phase` offsets
/// the motion cycle (radians); all displacement components share one phase
/// argument, so velocity zeros align across components.
pub fn motion_trajectory(profile: &MotionProfile, t: f64, phase: f64) -> Option<Trajectory> {
    let dir = displacement_direction(profile)?;
    let psi = 2.0 * core::f64::consts::PI * profile.motion_rate * t + phase;
    let a = profile.motion_amplitude;
    let (disp, ddisp) = match profile.class {
        MotionClass::Empty => unreachable!(),
        // One-sided dip from the standing pose.
        MotionClass::Squat => ((1.0 - psi.cos()) / 2.0, psi.sin() / 2.0),
        // Symmetric swing around the rest pose.
        MotionClass::Still | MotionClass::HandGesture => (psi.sin(), psi.cos()),
    };
    let dpsi = 2.0 * core::f64::consts::PI * profile.motion_rate;
    Some(Trajectory {
        pos: profile.base_pos.add(dir.scale(a * disp)),
        vel: dir.scale(a * ddisp * dpsi),
    })
}

/// Unit-ish direction of motion. The facing direction shapes it: squats dip
/// vertically with a lean along the facing axis, hand and sway motion swing
/// mostly perpendicular to the facing axis.
fn displacement_direction(profile: &MotionProfile) -> Option<Vec3> {
    let u = profile.orientation.facing();
    let perp = Vec3::new(-u.y, u.x, 0.0);
    match profile.class {
        MotionClass::Empty => None,
        MotionClass::Squat => Some(Vec3::new(0.0, 0.0, -1.0).add(u.scale(0.3))),
        MotionClass::HandGesture => Some(perp.scale(0.8).add(u.scale(0.6))),
        MotionClass::Still => Some(Vec3::new(0.0, 0.0, 0.6).add(perp.scale(0.8))),
    }
}

/// d/dt of the TX-scatterer-RX path length: the quantity whose rate sets the
/// bistatic Doppler shift.
pub fn bistatic_range_rate(traj: &Trajectory, tx_pos: Vec3, rx_pos: Vec3) -> f64 {
    let d1 = traj.pos.sub(tx_pos);
    let d2 = traj.pos.sub(rx_pos);
    let u1 = d1.scale(1.0 / d1.norm());
    let u2 = d2.scale(1.0 / d2.norm());
    u1.dot(traj.vel) + u2.dot(traj.vel)
}

//! Parametric multi-static 26 GHz channel simulator.
//!
//! Produces labeled complex CSI tensors (RX beams x subcarriers x time
//! symbols) from a room geometry, a 16-beam Butler-style array model, and a
//! moving human scatterer, plus the SNR gating the capture hardware applies.

mod beams;
mod io;
mod motion;
mod scenario;
mod sim;

pub use beams::BeamSet;
pub use io::{read_csi1, read_csi_csv, write_csi1, write_csi_csv};
pub use motion::{bistatic_range_rate, motion_trajectory, MotionClass, MotionProfile, Trajectory};
pub use scenario::{
    ArrayGeometry, Clutter, DomainLabel, Orientation, Room, SimScenario, Vec3, USABLE_TX_BEAMS,
};
pub use sim::{
    apply_snr_zeroing, simulate_csi, CsiFrame, FrameMeta, SNR_ZERO_THRESHOLD_DB, SPEED_OF_LIGHT,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsiError {
    #[error("beam index {beam} outside 1..={n_beams}")]
    BeamIndex { beam: usize, n_beams: usize },
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("archive: {0}")]
    Archive(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

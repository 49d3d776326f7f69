//! CSI-to-DFS pipeline: stack CSV segments into one tensor, reduce the
//! subcarrier dimension to the first principal component per RX beam, run a
//! sliding-window DFT over time, and zero-pad the result to power-of-two
//! dims. Also assembles the labeled datasets, including RX-antenna
//! unstacking and reported-sampling-rate variants.

mod dataset;
mod dfs_io;
mod pca;
mod stack;
mod stft;

pub use dataset::{
    build_dataset, plan_dataset, preprocess_frame, simulate_dataset, subject_position, ClassSpec,
    DatasetKind, DatasetSpec, FramePlan, PartialSubject, SampleRecord,
};
pub use dfs_io::{read_dfs1, write_dfs1};
pub use pca::{pca_antenna, pca_first_component, pca_first_component_mode, PcaMode, PcaSeries};
pub use stack::stack_csi;
pub use stft::{pad_pow2, restack_rx, stft_spectrogram, unstack_rx, DfsFrame, StftConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("inconsistent shape: {0}")]
    InconsistentShape(String),
    #[error("missing time order: {0}")]
    MissingTimeOrder(String),
    #[error("degenerate input: zero subcarrier covariance")]
    DegenerateInput,
    #[error("config: {0}")]
    Config(String),
    #[error("dataset arithmetic: {0}")]
    SpecArithmetic(String),
    #[error("dfs archive: {0}")]
    Archive(String),
    #[error(transparent)]
    Csi(#[from] crate::csi::CsiError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

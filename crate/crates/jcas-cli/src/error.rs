//! Error classification behind the process exit codes: 2 for spec and
//! configuration mistakes, 3 for missing or corrupt data, 4 for numerical
//! failure. The `From` impls sort every library error into one of the three.

use jcas_core::csi::CsiError;
use jcas_core::experiments::ExpError;
use jcas_core::nn::NnError;
use jcas_core::preprocess::PreprocessError;
use jcas_core::tuning::TuneError;
use jcas_core::viz::VizError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("spec line {line}: {msg}")]
    SpecLine { line: usize, msg: String },
    #[error("{0}")]
    Spec(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SpecLine { .. } | CliError::Spec(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CsiError> for CliError {
    fn from(e: CsiError) -> Self {
        match e {
            CsiError::BeamIndex { .. } | CsiError::Geometry(_) => CliError::Spec(e.to_string()),
            CsiError::Parse { .. } | CsiError::Archive(_) | CsiError::Io(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::Config(_) | PreprocessError::SpecArithmetic(_) => {
                CliError::Spec(e.to_string())
            }
            PreprocessError::Csi(inner) => inner.into(),
            PreprocessError::Io(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Numerical(_) => CliError::Numerical(e.to_string()),
            NnError::Config(_) | NnError::Shape(_) | NnError::ResidualShape(_) => {
                CliError::Spec(e.to_string())
            }
            NnError::Io(inner) => inner.into(),
            NnError::Checkpoint(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExpError> for CliError {
    fn from(e: ExpError) -> Self {
        match e {
            ExpError::Config(_) => CliError::Spec(e.to_string()),
            ExpError::DegenerateMarginals(_) => CliError::Numerical(e.to_string()),
            ExpError::Nn(inner) => inner.into(),
            ExpError::Io(inner) => inner.into(),
            ExpError::EmptyDataset(_) | ExpError::TooFewDomains(_) => {
                CliError::Data(e.to_string())
            }
        }
    }
}

impl From<TuneError> for CliError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::Config(_) => CliError::Spec(e.to_string()),
            TuneError::AllFailed => CliError::Numerical(e.to_string()),
            TuneError::Exp(inner) => inner.into(),
            TuneError::Nn(inner) => inner.into(),
            TuneError::Io(inner) => inner.into(),
        }
    }
}

impl From<VizError> for CliError {
    fn from(e: VizError) -> Self {
        match e {
            VizError::Config(_) | VizError::LayoutMismatch(_) => CliError::Spec(e.to_string()),
            VizError::Io(inner) => inner.into(),
            VizError::Png(_) => CliError::Data(e.to_string()),
        }
    }
}

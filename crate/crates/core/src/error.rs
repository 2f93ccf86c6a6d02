//! Crate-wide error type.

/// All failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("wavelength grids differ between spectra")]
    GridMismatch,
    #[error("reference minus dark is non-positive at sample {index} (λ = {wavelength_nm} nm)")]
    CalibrationDegenerate { index: usize, wavelength_nm: f64 },
    #[error("analysis window {lo_nm}:{hi_nm} nm lies outside the spectrum coverage")]
    WindowOutOfRange { lo_nm: f64, hi_nm: f64 },
    #[error("no fringe peak above {threshold}x the off-peak median magnitude")]
    NoFringePeak { threshold: f64 },
    #[error("baseline optical thickness must be positive, got {0}")]
    DegenerateBaseline(f64),
    #[error("solute diameter {solute_nm} nm does not fit the {pore_nm} nm pore")]
    PoreBlocked { solute_nm: f64, pore_nm: f64 },
    #[error("solver state became non-finite at t = {t_s} s")]
    SolverDiverged { t_s: f64 },
    #[error("isotherm fit is degenerate: all responses are zero")]
    DegenerateFit,
    #[error("parameter distribution needs at least {required} fitted sets, got {got}")]
    InsufficientFits { required: usize, got: usize },
    #[error("no in-bounds parameter sample after {attempts} attempts")]
    DistributionInfeasible { attempts: usize },
    #[error("curve ends at exactly zero; supply a reference amplitude for the S/N")]
    AmbiguousSnr,
    #[error("discriminant analysis needs at least two classes")]
    NoDiscriminant,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("{diverged} of {total} ensemble members diverged")]
    EnsembleDiverged { diverged: usize, total: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("series never settles into the band")]
    NotSettled,
    #[error("undefined metric: {0}")]
    Undefined(&'static str),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("training responses are constant; min-max range is degenerate")]
    DegenerateRange,
    #[error("manifest references a missing curve file for id {id:?}: {path}")]
    MissingCurveFile { id: String, path: String },
    #[error("duplicate curve id {0:?}")]
    DuplicateId(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("model file is corrupt: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable tag used by the CLI's single-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::GridMismatch => "grid_mismatch",
            Error::CalibrationDegenerate { .. } => "calibration_degenerate",
            Error::WindowOutOfRange { .. } => "window_out_of_range",
            Error::NoFringePeak { .. } => "no_fringe_peak",
            Error::DegenerateBaseline(_) => "degenerate_baseline",
            Error::PoreBlocked { .. } => "pore_blocked",
            Error::SolverDiverged { .. } => "solver_diverged",
            Error::DegenerateFit => "degenerate_fit",
            Error::InsufficientFits { .. } => "insufficient_fits",
            Error::DistributionInfeasible { .. } => "distribution_infeasible",
            Error::AmbiguousSnr => "ambiguous_snr",
            Error::NoDiscriminant => "no_discriminant",
            Error::NonFiniteInput => "non_finite_input",
            Error::TrainingDiverged { .. } => "training_diverged",
            Error::EnsembleDiverged { .. } => "ensemble_diverged",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::NotSettled => "not_settled",
            Error::Undefined(_) => "undefined",
            Error::EmptyCorpus => "empty_corpus",
            Error::DegenerateRange => "degenerate_range",
            Error::MissingCurveFile { .. } => "missing_curve_file",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Parse { .. } => "parse",
            Error::InvalidInput(_) => "invalid_input",
            Error::ModelFormat(_) => "model_format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

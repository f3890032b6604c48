use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("D tensor is not symmetric (asymmetry {0:.3e} MHz)")]
    AsymmetricTensor(f64),
    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("cannot assign m_S=0 level: maximal |<0|v>|^2 = {0:.3}")]
    LevelAssignment(f64),
    #[error("strain component {value:e} exceeds the linear-response guard {limit:e}")]
    StrainGuard { value: f64, limit: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("singular stiffness relation: C11 = {c11}, C12 = {c12}")]
    SingularStiffness { c11: f64, c12: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("abscissae are degenerate (fewer than two distinct values)")]
    DegenerateAbscissae,
    #[error("degenerate reference triangle (area {0:.3e} nm^2)")]
    DegenerateTriangle(f64),
    #[error("charge at {distance:.4} nm is inside the exclusion radius {exclusion:.4} nm")]
    ChargeInExclusion { distance: f64, exclusion: f64 },
    #[error("could not place charge {index} on a free lattice site after {attempts} attempts")]
    SnapExhausted { index: usize, attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency grid [{lo:.3}, {hi:.3}] MHz does not cover the required span [{need_lo:.3}, {need_hi:.3}] MHz")]
    GridTooNarrow {
        lo: f64,
        hi: f64,
        need_lo: f64,
        need_hi: f64,
    },
    #[error("frequency grid is not uniform and strictly ascending")]
    NonUniformGrid,
    #[error("fit optimum lies on the search boundary ({0}); widen the range")]
    BoundaryHit(String),
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Csv(_) | Error::Io(_) | Error::InvalidParameter(_)
        )
    }
}

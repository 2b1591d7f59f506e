use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point lies on the curve (distance {0:.3e})")]
    OnCurve(f64),
    #[error("covector cannot be mirrored: {0}")]
    NotMirrorable(String),
    #[error("trajectory grazes the curve (|cos angle| = {0:.3e})")]
    Tangency(f64),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("integration domain truncated: {0}")]
    Truncation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("operator domain violated: {0}")]
    Domain(String),
    #[error("singular frequency tau = 0")]
    SingularFrequency,
    #[error("least-squares fit ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("zero pivot at order {0}: basis not triangular")]
    Ellipticity(usize),
    #[error("quadrature did not converge (error estimate {0:.3e})")]
    NonConvergence(f64),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::InvalidInput(_)
            | Error::Config(_)
            | Error::Parse(_)
            | Error::OnCurve(_)
            | Error::NotMirrorable(_)
            | Error::NotApplicable(_)
            | Error::Domain(_)
            | Error::Resolution(_) => 1,
            _ => 2,
        }
    }
}

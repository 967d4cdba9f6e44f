use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular information matrix: {matrix}")]
    SingularInformation { matrix: &'static str },

    /// A target sits in a null of the transmit beampattern.
    #[error("degenerate beampattern: zero response at target {target}")]
    DegenerateBeampattern { target: usize },

    #[error("degenerate direction at iteration {iteration}: target {target} response collapsed")]
    DegenerateDirection { iteration: usize, target: usize },

    #[error("degenerate majorizer at iteration {iteration}: M w vanished")]
    DegenerateMajorizer { iteration: usize },

    #[error("non-finite value at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: &'static str },

    #[error("no feasible point found after {iterations} iterations (best energy {best_energy:.6e})")]
    FeasibilityNotFound { iterations: usize, best_energy: f64 },

    #[error("estimation degenerate: {0}")]
    EstimationDegenerate(String),

    #[error("detection degenerate: zero effective gain for user {user}")]
    DetectionDegenerate { user: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors that come from bad inputs rather than numerical breakdown.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

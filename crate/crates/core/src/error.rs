use crate::scene::BoxId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown box `{0}`")]
    UnknownBox(BoxId),

    #[error("box `{0}` has already been removed")]
    AlreadyRemoved(BoxId),

    #[error("simulation exploded: box `{id}` reached {speed:.2} m/s at t={elapsed:.4}s")]
    SimulationExploded { id: BoxId, speed: f64, elapsed: f64 },

    #[error("observation cannot be realised as a scene: {0}")]
    UnsatisfiableObservation(String),

    #[error("removal history is incomplete: {0}")]
    InsufficientHistory(String),

    #[error("no safe plan found: {reason}")]
    PlanNotFound {
        reason: String,
        /// Every (prefix, attempted box) pair that was simulated, in order.
        trace: Vec<(Vec<BoxId>, BoxId)>,
    },

    #[error("shelf could not be cleared; {} box(es) remain: {}", remaining.len(), join_ids(remaining))]
    UnclearableResidue { remaining: Vec<BoxId>, partial: Box<crate::planners::ActionPlan> },

    #[error("scene generation failed: {0}")]
    SceneGenerationFailed(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_sample(index: usize, source: Error) -> Self {
        Error::Sample { index, source: Box::new(source) }
    }

    /// Strips `Sample` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}

fn join_ids(ids: &[BoxId]) -> String {
    ids.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
}

use aam_nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vehicle {0} is not available for a new commitment")]
    VehicleUnavailable(usize),
    #[error("no vehicle with id {0}")]
    UnknownVehicle(usize),
    #[error("no depot with id {0}")]
    UnknownDepot(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("payload {payload} references depot {depot}, which is not observed")]
    UnobservedDepot { payload: u64, depot: usize },
    #[error("relation {0} is not handled by this layer")]
    UnknownRelation(String),
    #[error("sequence lengths differ: {0}")]
    LengthMismatch(String),
    #[error("non-finite loss in minibatch {minibatch} of epoch {epoch}")]
    NonFiniteLoss { epoch: usize, minibatch: usize },
    #[error("policy returned {got} decisions for {expected} vehicles")]
    DecisionCount { expected: usize, got: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

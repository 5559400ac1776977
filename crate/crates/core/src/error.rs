use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{quantity} = {value} outside [{lo}, {hi}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("flow {flow} exceeds capacity {capacity}")]
    InfeasibleFlow { flow: f64, capacity: f64 },
    #[error("operation requires a strictly concave diagram, got {0}")]
    UnsupportedDiagram(&'static str),
    #[error("value condition evaluated at {at} outside its range [{lo}, {hi}]")]
    InsufficientHistory { at: f64, lo: f64, hi: f64 },
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),
    #[error("comparison error: {0}")]
    Comparison(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use std::fmt;

use peer_pressure::diagnostics::DiagnosticsError;
use peer_pressure::dynamics::DynamicsError;
use peer_pressure::graph::GraphError;
use peer_pressure::inference::InferenceError;
use peer_pressure::opinion_csv::OpinionCsvError;

/// Invalid parameters, unparsable or inconsistent inputs.
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SCHEDULE: i32 = 4;
pub const EXIT_DEGENERATE: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(EXIT_INVALID, message)
    }

    pub fn io(context: &str, err: impl fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{context}: {err}"))
    }

    /// Schedule spec errors have their own exit code.
    pub fn schedule(err: DynamicsError) -> Self {
        match err {
            DynamicsError::Io(e) => Self::io("schedule", e),
            other => Self::new(EXIT_SCHEDULE, other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_IO, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(EXIT_IO, format!("writing JSON: {e}"))
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Io(e) => Self::io("graph", e),
            other => Self::invalid(format!("graph: {other}")),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Io(e) => Self::io("profile", e),
            DynamicsError::InvalidSchedule(_) => Self::schedule(e),
            other => Self::invalid(other.to_string()),
        }
    }
}

impl From<OpinionCsvError> for CliError {
    fn from(e: OpinionCsvError) -> Self {
        match e {
            OpinionCsvError::Io(e) => Self::io("opinion table", e),
            other => Self::invalid(other.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::DegenerateTrajectory(_) => Self::new(EXIT_DEGENERATE, e.to_string()),
            DiagnosticsError::Dynamics(d) => d.into(),
            other => Self::invalid(other.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Csv(c) => c.into(),
            other => Self::invalid(other.to_string()),
        }
    }
}

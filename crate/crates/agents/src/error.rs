use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("no <...> message found in completion")]
    NoBracketedMessage,
    #[error("no 'I DECIDE TO CHOOSE' decision found in completion")]
    NoDecisionFound,
    #[error("backend {backend} unavailable after {attempts} attempts: {last_error}")]
    BackendUnavailable {
        backend: String,
        attempts: u32,
        last_error: String,
    },
    #[error("template {template}: {problem}")]
    Template { template: String, problem: String },
    #[error("round {round} is not after the last recorded round {last}")]
    RoundOutOfOrder { round: u32, last: u32 },
    #[error("completion timeout must be positive")]
    ZeroTimeout,
    #[error("backend configuration: {0}")]
    BackendConfig(String),
}

/// Failure of a single transport attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("transport: {0}")]
    Io(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

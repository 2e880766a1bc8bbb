//! Completion backends and the retrying `complete` call.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{AgentError, TransportError};

/// Default number of retries after the first attempt.
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub system: String,
    pub prompt: String,
    /// Passed through to the backend untouched; empty means provider
    /// defaults.
    pub params: Map<String, Value>,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Identifies the calling agent. Hosted backends ignore it; the mock
    /// backend uses it as its sampling stream, so two agents with identical
    /// prompts can still answer differently.
    #[serde(default)]
    pub caller: Option<String>,
}

impl CompletionRequest {
    pub fn new(system: impl Into<String>, prompt: impl Into<String>) -> Self {
        CompletionRequest {
            system: system.into(),
            prompt: prompt.into(),
            params: Map::new(),
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            caller: None,
        }
    }

    pub fn with_caller(mut self, caller: impl Into<String>) -> Self {
        self.caller = Some(caller.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_max_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn with_params(mut self, params: Map<String, Value>) -> Self {
        self.params = params;
        self
    }
}

/// Something that turns a prompt into text. Implementations perform exactly
/// one attempt per call; retrying is the caller's job.
pub trait Backend: Send + Sync {
    fn id(&self) -> &str;
    fn send(&self, request: &CompletionRequest) -> Result<String, TransportError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn send(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        (**self).send(request)
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn send(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        (**self).send(request)
    }
}

/// One request/response pair, successful or not.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionLogEntry {
    pub backend: String,
    pub attempt: u32,
    pub system: String,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

/// Exponential backoff between attempts: `base * 2^(attempt-1)`, capped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub const IMMEDIATE: RetryPolicy = RetryPolicy {
        base_delay: Duration::ZERO,
        max_delay: Duration::ZERO,
    };

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Sends `request`, retrying on transport failure with the default backoff.
/// Every attempt is appended to `log`.
pub fn complete(
    backend: &dyn Backend,
    request: &CompletionRequest,
    log: &mut Vec<CompletionLogEntry>,
) -> Result<String, AgentError> {
    complete_with(backend, request, RetryPolicy::default(), std::thread::sleep, log)
}

/// [`complete`] with an injectable backoff policy and sleep function.
pub fn complete_with(
    backend: &dyn Backend,
    request: &CompletionRequest,
    policy: RetryPolicy,
    mut sleep: impl FnMut(Duration),
    log: &mut Vec<CompletionLogEntry>,
) -> Result<String, AgentError> {
    if request.timeout.is_zero() {
        return Err(AgentError::ZeroTimeout);
    }
    let attempts = request.max_retries + 1;
    let mut last_error = TransportError::Io("no attempt made".into());
    for attempt in 1..=attempts {
        if attempt > 1 {
            sleep(policy.delay(attempt - 1));
        }
        let started = Instant::now();
        let mut outcome = backend.send(request);
        let elapsed = started.elapsed();
        if outcome.is_ok() && elapsed > request.timeout {
            outcome = Err(TransportError::Timeout);
        }
        log.push(CompletionLogEntry {
            backend: backend.id().to_string(),
            attempt,
            system: request.system.clone(),
            prompt: request.prompt.clone(),
            response: outcome.as_ref().ok().cloned(),
            error: outcome.as_ref().err().map(|e| e.to_string()),
            elapsed_ms: elapsed.as_millis() as u64,
        });
        match outcome {
            Ok(text) => return Ok(text),
            Err(e) => {
                tracing::warn!(backend = backend.id(), attempt, error = %e, "completion attempt failed");
                last_error = e;
            }
        }
    }
    Err(AgentError::BackendUnavailable {
        backend: backend.id().to_string(),
        attempts,
        last_error: last_error.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
    }

    impl Backend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn send(&self, _: &CompletionRequest) -> Result<String, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(TransportError::Io("connection reset".into()))
            } else {
                Ok("done".into())
            }
        }
    }

    struct Slow;

    impl Backend for Slow {
        fn id(&self) -> &str {
            "slow"
        }
        fn send(&self, _: &CompletionRequest) -> Result<String, TransportError> {
            std::thread::sleep(Duration::from_millis(20));
            Ok("late".into())
        }
    }

    #[test]
    fn two_failures_then_success_logs_three_attempts() {
        let b = Flaky {
            failures: 2,
            calls: AtomicU32::new(0),
        };
        let mut log = Vec::new();
        let mut slept = Vec::new();
        let out = complete_with(
            &b,
            &CompletionRequest::new("s", "p"),
            RetryPolicy::default(),
            |d| slept.push(d),
            &mut log,
        )
        .unwrap();
        assert_eq!(out, "done");
        assert_eq!(log.len(), 3);
        assert_eq!(log[2].response.as_deref(), Some("done"));
        assert!(log[0].error.is_some());
        assert_eq!(slept, vec![Duration::from_millis(500), Duration::from_secs(1)]);
    }

    #[test]
    fn always_failing_is_unavailable() {
        let b = Flaky {
            failures: u32::MAX,
            calls: AtomicU32::new(0),
        };
        let mut log = Vec::new();
        let err = complete_with(
            &b,
            &CompletionRequest::new("s", "p").with_max_retries(2),
            RetryPolicy::IMMEDIATE,
            |_| {},
            &mut log,
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::BackendUnavailable { attempts: 3, .. }));
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn overrunning_the_timeout_counts_as_failure() {
        let mut log = Vec::new();
        let req = CompletionRequest::new("s", "p")
            .with_timeout(Duration::from_millis(1))
            .with_max_retries(0);
        let err = complete_with(&Slow, &req, RetryPolicy::IMMEDIATE, |_| {}, &mut log).unwrap_err();
        assert!(matches!(err, AgentError::BackendUnavailable { attempts: 1, .. }));
        assert_eq!(log[0].error.as_deref(), Some("timed out"));
    }

    #[test]
    fn zero_timeout_rejected() {
        let req = CompletionRequest::new("s", "p").with_timeout(Duration::ZERO);
        assert_eq!(
            complete(&Slow, &req, &mut Vec::new()),
            Err(AgentError::ZeroTimeout)
        );
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_millis(500));
        assert_eq!(p.delay(3), Duration::from_secs(2));
        assert_eq!(p.delay(10), Duration::from_secs(8));
        assert_eq!(p.delay(40), Duration::from_secs(8));
    }
}

use std::sync::Mutex;
use std::time::{Duration, Instant};

use dilemma_agents::{Backend, CompletionRequest, TransportError};

/// Spaces requests to a hosted backend at least `interval` apart, across
/// all threads sharing it.
pub struct RateLimited<B> {
    inner: B,
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl<B: Backend> RateLimited<B> {
    pub fn new(inner: B, interval: Duration) -> Self {
        RateLimited {
            inner,
            interval,
            next_slot: Mutex::new(None),
        }
    }

    /// Limit expressed as requests per minute.
    pub fn per_minute(inner: B, requests: u32) -> Self {
        Self::new(inner, Duration::from_secs(60) / requests.max(1))
    }

    fn reserve(&self) -> Duration {
        let mut slot = self.next_slot.lock().expect("rate limiter lock");
        let now = Instant::now();
        let start = slot.map_or(now, |s| s.max(now));
        *slot = Some(start + self.interval);
        start - now
    }
}

impl<B: Backend> Backend for RateLimited<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn send(&self, request: &CompletionRequest) -> Result<String, TransportError> {
        let wait = self.reserve();
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
        self.inner.send(request)
    }
}

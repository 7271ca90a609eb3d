use std::sync::atomic::{AtomicI64, Ordering};

use serde::{Deserialize, Serialize};

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Source of timestamps for session events.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        Timestamp(ms)
    }
}

/// Deterministic clock: starts at `seed` and advances by `step` on every read.
#[derive(Debug)]
pub struct FixedStepClock {
    next: AtomicI64,
    step: i64,
}

impl FixedStepClock {
    pub fn new(seed: i64, step: i64) -> Self {
        Self { next: AtomicI64::new(seed), step }
    }

    /// One-second steps, the default for reproducible bundles.
    pub fn seeded(seed: i64) -> Self {
        Self::new(seed, 1_000)
    }
}

impl Clock for FixedStepClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.next.fetch_add(self.step, Ordering::SeqCst))
    }
}

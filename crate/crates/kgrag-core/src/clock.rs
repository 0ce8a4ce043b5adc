//! Wall-clock abstraction so latency measurement can be made deterministic
//! for reproducible offline runs.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

pub trait Clock: Sync {
    /// Seconds since an arbitrary epoch; must be monotonic non-decreasing.
    fn now_seconds(&self) -> f64;
}

pub struct SystemClock {
    epoch: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            epoch: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now_seconds(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64()
    }
}

/// Advances by a fixed step on every read. Two runs that make the same
/// sequence of clock reads observe identical timings.
pub struct FixedStepClock {
    ticks: AtomicU64,
    step_seconds: f64,
}

impl FixedStepClock {
    pub fn new(step_seconds: f64) -> Self {
        FixedStepClock {
            ticks: AtomicU64::new(0),
            step_seconds,
        }
    }
}

impl Clock for FixedStepClock {
    fn now_seconds(&self) -> f64 {
        let tick = self.ticks.fetch_add(1, Ordering::SeqCst);
        tick as f64 * self.step_seconds
    }
}

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Seconds before the first retry.
    pub base_delay: f64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: 1.0, factor: 2.0 }
    }
}

impl RetryPolicy {
    pub fn new(max_attempts: u32, base_delay: f64, factor: f64) -> Result<Self> {
        let policy = Self { max_attempts, base_delay, factor };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_attempts < 1 {
            return Err(Error::ProviderConfig("retry max_attempts must be at least 1".into()));
        }
        if !self.factor.is_finite() || self.factor < 1.0 {
            return Err(Error::ProviderConfig(format!("retry factor must be >= 1, got {}", self.factor)));
        }
        if !self.base_delay.is_finite() || self.base_delay < 0.0 {
            return Err(Error::ProviderConfig(format!("retry base_delay must be >= 0, got {}", self.base_delay)));
        }
        Ok(())
    }

    /// Wait after the `failed_attempt`-th failure (1-based): `base * factor^(k-1)`.
    pub fn delay(&self, failed_attempt: u32) -> Duration {
        let exp = failed_attempt.saturating_sub(1) as i32;
        Duration::from_secs_f64(self.base_delay * self.factor.powi(exp))
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, delay: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, delay: Duration) {
        std::thread::sleep(delay);
    }
}

/// Records requested delays instead of sleeping.
#[derive(Debug, Default, Clone)]
pub struct RecordingSleeper {
    delays: Arc<Mutex<Vec<Duration>>>,
}

impl RecordingSleeper {
    pub fn delays(&self) -> Vec<Duration> {
        self.delays.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, delay: Duration) {
        self.delays.lock().unwrap().push(delay);
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    pub fn new(permits: usize) -> Self {
        Self { free: Mutex::new(permits.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GatePermit { gate: self }
    }
}

pub struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.gate.free.lock().unwrap() += 1;
        self.gate.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn delays_grow_geometrically() {
        let p = RetryPolicy::default();
        let secs: Vec<f64> = (1..=4).map(|k| p.delay(k).as_secs_f64()).collect();
        assert_eq!(secs, [1.0, 2.0, 4.0, 8.0]);
    }

    #[test]
    fn rejects_invalid_policies() {
        assert!(RetryPolicy::new(0, 1.0, 2.0).is_err());
        assert!(RetryPolicy::new(3, 1.0, 0.5).is_err());
        assert!(RetryPolicy::new(3, -1.0, 2.0).is_err());
        assert!(RetryPolicy::new(3, 0.0, 1.0).is_ok());
    }

    #[test]
    fn gate_bounds_concurrency() {
        let gate = Arc::new(Gate::new(2));
        let active = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (gate, active, peak) = (gate.clone(), active.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _permit = gate.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}

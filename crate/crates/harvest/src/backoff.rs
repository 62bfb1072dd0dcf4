//! Retry delays and request pacing, over an injectable clock so mock runs
//! finish instantly.

use std::time::{Duration, Instant};

use rand::{Rng, RngCore};

pub const BASE_DELAY: Duration = Duration::from_secs(30);
pub const MAX_DELAY: Duration = Duration::from_secs(15 * 60);
pub const MAX_ATTEMPTS: u32 = 6;
pub const JITTER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbortedAfterMaxRetries {
    pub attempts: u32,
}

/// `min(30 s * 2^(attempt-1), 15 min)` before jitter.
pub fn nominal_delay(attempt: u32) -> Duration {
    let exp = attempt.saturating_sub(1).min(16);
    (BASE_DELAY * 2u32.pow(exp)).min(MAX_DELAY)
}

/// Delay before retry number `attempt` (1-based): the nominal delay scaled by
/// a uniform factor in [0.8, 1.2], never above 15 min. Attempts past six
/// abort.
pub fn backoff_schedule(attempt: u32, rng: &mut dyn RngCore) -> Result<Duration, AbortedAfterMaxRetries> {
    if attempt == 0 || attempt > MAX_ATTEMPTS {
        return Err(AbortedAfterMaxRetries { attempts: attempt });
    }
    let factor = rng.random_range((1.0 - JITTER)..=(1.0 + JITTER));
    Ok(nominal_delay(attempt).mul_f64(factor).min(MAX_DELAY))
}

/// Source of time and sleeping.
pub trait Clock {
    fn now(&self) -> Duration;
    fn sleep(&mut self, d: Duration);
}

pub struct SystemClock {
    start: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            start: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn sleep(&mut self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Sleeps advance a counter instead of blocking.
#[derive(Debug, Default, Clone)]
pub struct VirtualClock {
    elapsed: Duration,
    pub sleeps: Vec<Duration>,
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        self.elapsed
    }

    fn sleep(&mut self, d: Duration) {
        self.elapsed += d;
        self.sleeps.push(d);
    }
}

/// Token bucket holding a single token, refilled every `60 / R` seconds:
/// never more than R requests in any minute.
#[derive(Debug, Clone)]
pub struct Pacer {
    interval: Duration,
    next_allowed: Option<Duration>,
}

impl Pacer {
    pub fn per_minute(rate: u32) -> Self {
        let interval = if rate == 0 {
            Duration::ZERO
        } else {
            // Rounded up so integer nanoseconds never admit an extra request.
            Duration::from_nanos(60_000_000_000u64.div_ceil(u64::from(rate)))
        };
        Self {
            interval,
            next_allowed: None,
        }
    }

    /// Blocks on `clock` until the next request may go out.
    pub fn wait(&mut self, clock: &mut dyn Clock) {
        let now = clock.now();
        if let Some(next) = self.next_allowed {
            if next > now {
                clock.sleep(next - now);
            }
        }
        self.next_allowed = Some(clock.now() + self.interval);
    }
}

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Sliding-window limiter: at most `max_requests` acquisitions in any
/// window of length `window`.
#[derive(Debug)]
pub struct RateLimiter {
    max_requests: usize,
    window: Duration,
    // Extra wait added once the window is full, so that requests observed
    // slightly later by the server still fall in separate windows.
    guard: Duration,
    sent: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn per_second(max_requests: usize) -> Self {
        Self::new(max_requests, Duration::from_secs(1))
    }

    pub fn new(max_requests: usize, window: Duration) -> Self {
        RateLimiter {
            max_requests: max_requests.max(1),
            window,
            guard: Duration::from_millis(20),
            sent: Mutex::new(VecDeque::new()),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut sent = self.sent.lock().expect("limiter lock");
                let now = Instant::now();
                while sent
                    .front()
                    .is_some_and(|t| now.duration_since(*t) >= self.window + self.guard)
                {
                    sent.pop_front();
                }
                if sent.len() < self.max_requests {
                    sent.push_back(now);
                    return;
                }
                (*sent.front().expect("non-empty") + self.window + self.guard)
                    .saturating_duration_since(now)
            };
            std::thread::sleep(wait.max(Duration::from_millis(1)));
        }
    }
}

/// Request quota shared by all calls through one client.
#[derive(Debug)]
pub struct Budget {
    limit: u64,
    used: AtomicU64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget {
            limit,
            used: AtomicU64::new(0),
        }
    }

    /// Takes one request from the quota; false when it is exhausted.
    pub fn try_take(&self) -> bool {
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| {
                (u < self.limit).then_some(u + 1)
            })
            .is_ok()
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_respected() {
        let limiter = RateLimiter::new(3, Duration::from_millis(100));
        let start = Instant::now();
        let stamps: Vec<Duration> = (0..7)
            .map(|_| {
                limiter.acquire();
                start.elapsed()
            })
            .collect();
        for (i, t) in stamps.iter().enumerate() {
            let in_window = stamps[i..]
                .iter()
                .filter(|u| **u - *t < Duration::from_millis(100))
                .count();
            assert!(in_window <= 3, "{stamps:?}");
        }
    }

    #[test]
    fn budget_runs_out() {
        let b = Budget::new(2);
        assert!(b.try_take() && b.try_take());
        assert!(!b.try_take());
        assert_eq!(b.used(), 2);
    }
}

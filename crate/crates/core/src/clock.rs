//! Deterministic virtual clock.
//!
//! The clock never reads wall time. Calendar questions (weekday, time of day)
//! are answered from a fixed epoch carrying an explicit UTC offset plus the
//! number of virtual milliseconds elapsed since it.

use chrono::{DateTime, Datelike, Duration, FixedOffset, Timelike, Weekday};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TICK_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualClock {
    epoch: DateTime<FixedOffset>,
    now_ms: u64,
    tick_ms: u64,
}

impl VirtualClock {
    /// Panics if `tick_ms` is zero.
    pub fn new(epoch: DateTime<FixedOffset>, tick_ms: u64) -> Self {
        assert!(tick_ms > 0, "tick_ms must be positive");
        Self {
            epoch,
            now_ms: 0,
            tick_ms,
        }
    }

    pub fn epoch(&self) -> DateTime<FixedOffset> {
        self.epoch
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn tick_ms(&self) -> u64 {
        self.tick_ms
    }

    /// Moves the clock forward by exactly one tick and returns the new time.
    pub fn tick(&mut self) -> u64 {
        self.now_ms += self.tick_ms;
        self.now_ms
    }

    /// Number of whole ticks needed to cover `duration_ms` (rounded up).
    pub fn ticks_for(&self, duration_ms: u64) -> u64 {
        duration_ms.div_ceil(self.tick_ms)
    }

    pub fn datetime_at(&self, at_ms: u64) -> DateTime<FixedOffset> {
        self.epoch + Duration::milliseconds(at_ms as i64)
    }

    /// Local calendar time at the current instant, in the epoch's offset.
    pub fn now(&self) -> DateTime<FixedOffset> {
        self.datetime_at(self.now_ms)
    }

    pub fn weekday(&self) -> Weekday {
        self.now().weekday()
    }

    /// Minutes since local midnight.
    pub fn minute_of_day(&self) -> u32 {
        minute_of_day(&self.now())
    }
}

pub fn minute_of_day(at: &DateTime<FixedOffset>) -> u32 {
    at.hour() * 60 + at.minute()
}

/// Parses an RFC 3339 / ISO-8601 timestamp that must carry an explicit offset.
pub fn parse_epoch(text: &str) -> Result<DateTime<FixedOffset>, chrono::ParseError> {
    DateTime::parse_from_rfc3339(text)
}

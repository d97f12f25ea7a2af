//! AMBR policy changes and the time windows they may be bound to.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, Weekday};
use serde::{Deserialize, Serialize};

use crate::clock::minute_of_day;
use crate::sim::Kbps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbrField {
    AmbrDl,
    AmbrUl,
    Both,
}

impl AmbrField {
    pub fn touches_dl(self) -> bool {
        matches!(self, AmbrField::AmbrDl | AmbrField::Both)
    }

    pub fn touches_ul(self) -> bool {
        matches!(self, AmbrField::AmbrUl | AmbrField::Both)
    }

    pub fn overlaps(self, other: AmbrField) -> bool {
        (self.touches_dl() && other.touches_dl()) || (self.touches_ul() && other.touches_ul())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeMode {
    /// `amount` is a signed percentage of the baseline: +20 means x1.2.
    PercentDelta,
    /// `amount` is the target rate in kbps.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub dl: Kbps,
    pub ul: Kbps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyChange {
    pub change_id: String,
    pub slice_name: String,
    pub field: AmbrField,
    pub mode: ChangeMode,
    pub amount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Baseline>,
}

impl PolicyChange {
    pub fn validate_amount(&self) -> Result<(), String> {
        if !self.amount.is_finite() {
            return Err(format!("amount {} is not finite", self.amount));
        }
        match self.mode {
            ChangeMode::PercentDelta if self.amount <= -100.0 => Err(format!(
                "percent_delta amount {} must be greater than -100",
                self.amount
            )),
            ChangeMode::Absolute if self.amount <= 0.0 => Err(format!(
                "absolute amount {} must be positive",
                self.amount
            )),
            _ => Ok(()),
        }
    }

    fn apply_to(&self, base: Kbps) -> Kbps {
        let value = match self.mode {
            ChangeMode::PercentDelta => base as f64 * (100.0 + self.amount) / 100.0,
            ChangeMode::Absolute => self.amount,
        };
        value.round().max(0.0) as Kbps
    }

    /// New (dl, ul) computed from the baseline; untouched fields keep `current`.
    pub fn target(&self, baseline: Baseline, current: Baseline) -> Baseline {
        Baseline {
            dl: if self.field.touches_dl() {
                self.apply_to(baseline.dl)
            } else {
                current.dl
            },
            ul: if self.field.touches_ul() {
                self.apply_to(baseline.ul)
            } else {
                current.ul
            },
        }
    }

    pub fn describe(&self) -> String {
        let what = match self.field {
            AmbrField::AmbrDl => "ambr_dl",
            AmbrField::AmbrUl => "ambr_ul",
            AmbrField::Both => "ambr_dl+ambr_ul",
        };
        match self.mode {
            ChangeMode::PercentDelta => {
                format!("{what} of slice '{}' by {:+}%", self.slice_name, self.amount)
            }
            ChangeMode::Absolute => {
                format!("{what} of slice '{}' to {} kbps", self.slice_name, self.amount)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Day {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Day {
    pub const ALL: [Day; 7] = [Day::Mon, Day::Tue, Day::Wed, Day::Thu, Day::Fri, Day::Sat, Day::Sun];
    pub const WEEKDAYS: [Day; 5] = [Day::Mon, Day::Tue, Day::Wed, Day::Thu, Day::Fri];

    pub fn from_weekday(w: Weekday) -> Self {
        Day::ALL[w.num_days_from_monday() as usize]
    }

    /// Expands a day name or one of `weekdays`, `weekends`, `daily`.
    pub fn parse_set(name: &str) -> Option<Vec<Day>> {
        let days = match name.to_ascii_lowercase().as_str() {
            "mon" | "monday" => vec![Day::Mon],
            "tue" | "tuesday" => vec![Day::Tue],
            "wed" | "wednesday" => vec![Day::Wed],
            "thu" | "thursday" => vec![Day::Thu],
            "fri" | "friday" => vec![Day::Fri],
            "sat" | "saturday" => vec![Day::Sat],
            "sun" | "sunday" => vec![Day::Sun],
            "weekdays" => Day::WEEKDAYS.to_vec(),
            "weekends" => vec![Day::Sat, Day::Sun],
            "daily" | "all" => Day::ALL.to_vec(),
            _ => return None,
        };
        Some(days)
    }
}

/// Local wall-clock minute; `24:00` is accepted as an end-of-day bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeOfDay {
    pub hour: u8,
    pub minute: u8,
}

impl TimeOfDay {
    pub fn new(hour: u8, minute: u8) -> Self {
        Self { hour, minute }
    }

    pub fn minutes(self) -> u32 {
        self.hour as u32 * 60 + self.minute as u32
    }

    fn valid(self) -> bool {
        (self.hour < 24 && self.minute < 60) || (self.hour == 24 && self.minute == 0)
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

impl FromStr for TimeOfDay {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (h, m) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("time '{s}' must be HH:MM"))?;
        let parse = |x: &str| x.parse::<u8>().map_err(|_| format!("time '{s}' must be HH:MM"));
        let t = TimeOfDay::new(parse(h)?, parse(m)?);
        if !t.valid() {
            return Err(format!("time '{s}' is out of range"));
        }
        Ok(t)
    }
}

/// Half-open daily interval `[start, end)` on a set of weekdays, evaluated in
/// the simulation epoch's UTC offset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: TimeOfDay,
    pub end: TimeOfDay,
    pub days: BTreeSet<Day>,
}

impl TimeWindow {
    pub fn new(start: TimeOfDay, end: TimeOfDay, days: impl IntoIterator<Item = Day>) -> Self {
        Self {
            start,
            end,
            days: days.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.start.valid() || self.start.hour == 24 || !self.end.valid() {
            return Err("window times out of range".into());
        }
        if self.start >= self.end {
            return Err(format!(
                "window start not before end ({} -> {})",
                self.start, self.end
            ));
        }
        if self.days.is_empty() {
            return Err("window has no days".into());
        }
        Ok(())
    }

    pub fn contains(&self, at: &DateTime<FixedOffset>) -> bool {
        let minute = minute_of_day(at);
        self.days.contains(&Day::from_weekday(at.weekday()))
            && self.start.minutes() <= minute
            && minute < self.end.minutes()
    }

    pub fn overlaps(&self, other: &TimeWindow) -> bool {
        self.days.intersection(&other.days).next().is_some()
            && self.start < other.end
            && other.start < self.end
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let days: Vec<String> = self
            .days
            .iter()
            .map(|d| serde_json::to_value(d).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default())
            .collect();
        write!(f, "{}-{} on {}", self.start, self.end, days.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::parse_epoch;

    fn change(mode: ChangeMode, amount: f64, field: AmbrField) -> PolicyChange {
        PolicyChange {
            change_id: "c".into(),
            slice_name: "streaming".into(),
            field,
            mode,
            amount,
            baseline: None,
        }
    }

    #[test]
    fn percent_applies_to_baseline() {
        let c = change(ChangeMode::PercentDelta, 20.0, AmbrField::AmbrDl);
        let base = Baseline { dl: 100_000, ul: 50_000 };
        assert_eq!(c.target(base, base), Baseline { dl: 120_000, ul: 50_000 });
        let c = change(ChangeMode::PercentDelta, 20.0, AmbrField::Both);
        assert_eq!(c.target(base, base), Baseline { dl: 120_000, ul: 60_000 });
        let c = change(ChangeMode::Absolute, 150_000.0, AmbrField::AmbrUl);
        assert_eq!(c.target(base, base), Baseline { dl: 100_000, ul: 150_000 });
    }

    #[test]
    fn amount_bounds() {
        assert!(change(ChangeMode::PercentDelta, -150.0, AmbrField::AmbrDl).validate_amount().is_err());
        assert!(change(ChangeMode::PercentDelta, -100.0, AmbrField::AmbrDl).validate_amount().is_err());
        assert!(change(ChangeMode::PercentDelta, -99.0, AmbrField::AmbrDl).validate_amount().is_ok());
        assert!(change(ChangeMode::Absolute, 0.0, AmbrField::AmbrDl).validate_amount().is_err());
    }

    #[test]
    fn window_membership_is_half_open() {
        let w = TimeWindow::new(TimeOfDay::new(16, 27), TimeOfDay::new(16, 30), Day::WEEKDAYS);
        let at = |s: &str| parse_epoch(s).unwrap();
        assert!(!w.contains(&at("2025-09-23T16:26:59+00:00")));
        assert!(w.contains(&at("2025-09-23T16:27:00+00:00")));
        assert!(w.contains(&at("2025-09-23T16:29:59+00:00")));
        assert!(!w.contains(&at("2025-09-23T16:30:00+00:00")));
        // Saturday
        assert!(!w.contains(&at("2025-09-27T16:28:00+00:00")));
    }

    #[test]
    fn window_validation_and_overlap() {
        let bad = TimeWindow::new(TimeOfDay::new(16, 30), TimeOfDay::new(16, 27), Day::WEEKDAYS);
        assert!(bad.validate().unwrap_err().contains("window start not before end"));
        let a = TimeWindow::new(TimeOfDay::new(16, 27), TimeOfDay::new(16, 30), Day::WEEKDAYS);
        let b = TimeWindow::new(TimeOfDay::new(16, 29), TimeOfDay::new(17, 0), [Day::Fri]);
        let c = TimeWindow::new(TimeOfDay::new(16, 30), TimeOfDay::new(17, 0), Day::WEEKDAYS);
        let d = TimeWindow::new(TimeOfDay::new(16, 0), TimeOfDay::new(17, 0), [Day::Sat]);
        assert!(a.overlaps(&b));
        assert!(!a.overlaps(&c));
        assert!(!a.overlaps(&d));
        assert!(TimeWindow::new(TimeOfDay::new(0, 0), TimeOfDay::new(1, 0), []).validate().is_err());
        assert!(TimeWindow::new(TimeOfDay::new(23, 0), TimeOfDay::new(24, 0), [Day::Sun]).validate().is_ok());
    }

    #[test]
    fn parse_times_and_days() {
        assert_eq!("16:27".parse::<TimeOfDay>().unwrap(), TimeOfDay::new(16, 27));
        assert!("25:00".parse::<TimeOfDay>().is_err());
        assert!("1627".parse::<TimeOfDay>().is_err());
        assert_eq!(Day::parse_set("weekdays").unwrap().len(), 5);
        assert_eq!(Day::parse_set("Sat").unwrap(), vec![Day::Sat]);
        assert!(Day::parse_set("someday").is_none());
    }
}

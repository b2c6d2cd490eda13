//! Integer simulation time with picosecond resolution.

use std::fmt;
use std::ops::Sub;

use thiserror::Error;

pub const PS_PER_US: u64 = 1_000_000;
pub const PS_PER_MS: u64 = 1_000_000_000;
pub const PS_PER_S: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("simulation time overflow")]
pub struct TimeOverflow;

/// Absolute simulation timestamp in picoseconds since start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

/// Length of a simulation interval in picoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Duration(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn from_ms(ms: u64) -> SimTime {
        SimTime(ms * PS_PER_MS)
    }

    pub fn checked_add(self, d: Duration) -> Result<SimTime, TimeOverflow> {
        self.0.checked_add(d.0).map(SimTime).ok_or(TimeOverflow)
    }

    /// Time elapsed since `earlier`; zero if `earlier` is later.
    pub fn since(self, earlier: SimTime) -> Duration {
        Duration(self.0.saturating_sub(earlier.0))
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_S as f64
    }

    /// Exact decimal rendering in milliseconds (`"12"`, `"0.5"`).
    pub fn ms_text(self) -> String {
        exact_decimal(self.0, PS_PER_MS)
    }
}

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub fn from_ps(ps: u64) -> Duration {
        Duration(ps)
    }

    pub fn from_us(us: u64) -> Duration {
        Duration(us * PS_PER_US)
    }

    pub fn from_ms(ms: u64) -> Duration {
        Duration(ms * PS_PER_MS)
    }

    pub fn from_secs(s: u64) -> Duration {
        Duration(s * PS_PER_S)
    }

    /// Converts a millisecond count that may carry a fraction. Fails if the
    /// value is negative, non-finite or not a whole number of picoseconds.
    pub fn from_ms_f64(ms: f64) -> Option<Duration> {
        if !ms.is_finite() || ms < 0.0 {
            return None;
        }
        let ps = (ms * PS_PER_MS as f64).round();
        if ps > u64::MAX as f64 {
            return None;
        }
        Some(Duration(ps as u64))
    }

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_S as f64
    }

    /// Exact decimal rendering in seconds (`"0.001"`).
    pub fn secs_text(self) -> String {
        exact_decimal(self.0, PS_PER_S)
    }

    pub fn ms_text(self) -> String {
        exact_decimal(self.0, PS_PER_MS)
    }

    /// Parses the output of [`Duration::secs_text`] without going through floats.
    pub fn parse_secs(text: &str) -> Option<Duration> {
        parse_exact_decimal(text, 12).map(Duration)
    }
}

impl Sub for SimTime {
    type Output = Duration;
    fn sub(self, rhs: SimTime) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ms", self.ms_text())
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ms", self.ms_text())
    }
}

fn exact_decimal(ticks: u64, unit: u64) -> String {
    let whole = ticks / unit;
    let frac = ticks % unit;
    if frac == 0 {
        return whole.to_string();
    }
    let digits = unit.ilog10() as usize;
    let s = format!("{frac:0digits$}");
    format!("{whole}.{}", s.trim_end_matches('0'))
}

fn parse_exact_decimal(text: &str, scale_digits: u32) -> Option<u64> {
    let text = text.trim();
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if frac.len() > scale_digits as usize && frac[scale_digits as usize..].bytes().any(|b| b != b'0') {
        return None;
    }
    let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let mut frac_val = 0u64;
    for (i, b) in frac.bytes().take(scale_digits as usize).enumerate() {
        frac_val += (b - b'0') as u64 * 10u64.pow(scale_digits - 1 - i as u32);
    }
    whole.checked_mul(10u64.pow(scale_digits))?.checked_add(frac_val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_text() {
        assert_eq!(Duration::from_ms(1).secs_text(), "0.001");
        assert_eq!(Duration::from_ms(1500).secs_text(), "1.5");
        assert_eq!(Duration::from_ps(1).secs_text(), "0.000000000001");
        assert_eq!(SimTime(500_000_000).ms_text(), "0.5");
        assert_eq!(SimTime::from_ms(12).ms_text(), "12");
        for d in [0, 1, 999, PS_PER_MS, 123_456_789_012_345] {
            let d = Duration(d);
            assert_eq!(Duration::parse_secs(&d.secs_text()), Some(d));
        }
        assert_eq!(Duration::parse_secs("abc"), None);
    }

    #[test]
    fn overflow_is_an_error() {
        assert_eq!(SimTime(u64::MAX).checked_add(Duration(1)), Err(TimeOverflow));
    }
}

//! Timestamp files: one decimal number per line, blank lines and `#`
//! comments ignored.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use leadlag::{BivariateSample, EventSeries};

use crate::failure::{CliResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Unit {
    #[default]
    Seconds,
    Milliseconds,
    Microseconds,
}

impl Unit {
    /// Power of ten taking this unit to seconds.
    fn exponent(self) -> i32 {
        match self {
            Unit::Seconds => 0,
            Unit::Milliseconds => -3,
            Unit::Microseconds => -6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::Seconds => "seconds",
            Unit::Milliseconds => "milliseconds",
            Unit::Microseconds => "microseconds",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "sec" | "seconds" => Ok(Unit::Seconds),
            "ms" | "milliseconds" => Ok(Unit::Milliseconds),
            "us" | "micros" | "microseconds" => Ok(Unit::Microseconds),
            other => Err(format!("unknown unit '{other}' (seconds, milliseconds, microseconds)")),
        }
    }
}

/// Parses a decimal number given in `unit` and returns seconds.
///
/// The scaling is applied to the decimal exponent before conversion, so
/// `1500000` microseconds is exactly the double nearest to 1.5.
pub fn parse_scaled(text: &str, unit: Unit) -> Option<f64> {
    let text = text.trim();
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
        return None;
    }
    let shift = unit.exponent();
    let scaled = match text.find(['e', 'E']) {
        Some(pos) => {
            let exp: i32 = text[pos + 1..].parse().ok()?;
            format!("{}e{}", &text[..pos], exp.checked_add(shift)?)
        }
        None => format!("{text}e{shift}"),
    };
    let v: f64 = scaled.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Two timestamp files, their unit, and an optional clip window in the same unit.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSpec {
    pub path1: PathBuf,
    pub path2: PathBuf,
    pub unit: Unit,
    pub window: Option<(String, String)>,
    /// Collapse exact repeats instead of rejecting them.
    pub dedup: bool,
}

/// Timestamps of one file in seconds, with their 1-based line numbers.
fn read_times(path: &Path, unit: Unit) -> CliResult<Vec<(f64, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t = parse_scaled(line, unit).ok_or_else(|| {
            Failure::data(format!("{}:{}: cannot parse timestamp '{line}'", path.display(), i + 1))
        })?;
        out.push((t, i + 1));
    }
    Ok(out)
}

fn build_series(path: &Path, times: Vec<(f64, usize)>, start: f64, end: f64, dedup: bool) -> CliResult<EventSeries> {
    let mut kept: Vec<f64> = Vec::with_capacity(times.len());
    let mut last: Option<(f64, usize)> = None;
    let mut dropped = 0usize;
    for (t, line) in times {
        if let Some((prev, prev_line)) = last {
            if t < prev {
                return Err(Failure::data(format!(
                    "{}:{line}: timestamp decreases (previous value on line {prev_line})",
                    path.display()
                )));
            }
            if t == prev {
                if dedup {
                    dropped += 1;
                    continue;
                }
                return Err(Failure::data(format!(
                    "{}:{line}: duplicate of line {prev_line} (use --dedup to collapse repeats)",
                    path.display()
                )));
            }
        }
        last = Some((t, line));
        if t > start && t <= end {
            kept.push(t - start);
        }
    }
    if dropped > 0 {
        log::info!("{}: collapsed {dropped} repeated timestamps", path.display());
    }
    EventSeries::new(kept, end - start).map_err(|e| Failure::from(e).context(path.display()))
}

/// Reads, clips to `(t_start, t_end]`, re-bases to `t_start = 0` and validates
/// both series. Without a window, `t_start = 0` and `t_end` is the latest
/// timestamp in either file.
pub fn ingest_timestamps(spec: &IngestSpec) -> CliResult<BivariateSample> {
    let t1 = read_times(&spec.path1, spec.unit)?;
    let t2 = read_times(&spec.path2, spec.unit)?;
    let (start, end) = match &spec.window {
        Some((a, b)) => {
            let bad = |v: &str| Failure::usage(format!("cannot parse window bound '{v}'"));
            let a_s = parse_scaled(a, spec.unit).ok_or_else(|| bad(a))?;
            let b_s = parse_scaled(b, spec.unit).ok_or_else(|| bad(b))?;
            if !(b_s > a_s) {
                return Err(Failure::usage(format!("window end {b} must exceed window start {a}")));
            }
            (a_s, b_s)
        }
        None => {
            let latest = t1.iter().chain(&t2).map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            if !(latest > 0.0) {
                return Err(Failure::data("no positive timestamps; pass --window explicitly"));
            }
            (0.0, latest)
        }
    };
    let s1 = build_series(&spec.path1, t1, start, end, spec.dedup)?;
    let s2 = build_series(&spec.path2, t2, start, end, spec.dedup)?;
    Ok(BivariateSample::new(s1, s2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_scaling_is_exact() {
        assert_eq!(parse_scaled("1500000", Unit::Microseconds), Some(1.5));
        assert_eq!(parse_scaled("0.1", Unit::Seconds), Some(0.1));
        assert_eq!(parse_scaled("100", Unit::Milliseconds), Some(0.1));
        assert_eq!(parse_scaled("1.5e3", Unit::Milliseconds), Some(1.5));
        assert_eq!(parse_scaled("34200123456", Unit::Microseconds), Some(34200.123456));
        assert_eq!(parse_scaled("abc", Unit::Seconds), None);
        assert_eq!(parse_scaled("1e400", Unit::Seconds), None);
        assert_eq!(parse_scaled("", Unit::Seconds), None);
    }

    #[test]
    fn unit_names() {
        assert_eq!("us".parse::<Unit>(), Ok(Unit::Microseconds));
        assert_eq!("milliseconds".parse::<Unit>(), Ok(Unit::Milliseconds));
        assert!("hours".parse::<Unit>().is_err());
    }
}

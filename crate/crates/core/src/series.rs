//! Validated event series on an observation window `(0, T]`.

use crate::{Error, Result};

/// Sorted, strictly increasing event times of one asset within `(0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    times: Vec<f64>,
    window_end: f64,
}

impl EventSeries {
    /// Builds a series from already sorted times, checking every invariant.
    pub fn new(times: Vec<f64>, window_end: f64) -> Result<Self> {
        check_window(window_end)?;
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::NonMonotone { index: i });
            }
            if t <= 0.0 || t > window_end {
                return Err(Error::OutOfWindow {
                    value: t,
                    window_end,
                });
            }
            if i > 0 {
                let prev = times[i - 1];
                if t == prev {
                    return Err(Error::Duplicate { value: t });
                }
                if t < prev {
                    return Err(Error::NonMonotone { index: i });
                }
            }
        }
        Ok(Self { times, window_end })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }
}

fn check_window(window_end: f64) -> Result<()> {
    if !(window_end.is_finite() && window_end > 0.0) {
        return Err(Error::InvalidWindow(window_end));
    }
    if window_end < 1.0 {
        log::warn!("observation window {window_end} is shorter than one second");
    }
    Ok(())
}

/// Sorts raw timestamps and validates them against the window `(0, T]`.
///
/// Events exactly at `0` are rejected and events exactly at `T` accepted,
/// matching the half-open bucket convention `(kh, (k+1)h]`.
pub fn validate_series(raw_times: &[f64], window_end: f64) -> Result<EventSeries> {
    check_window(window_end)?;
    if let Some(index) = raw_times.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonMonotone { index });
    }
    let mut times = raw_times.to_vec();
    times.sort_by(f64::total_cmp);
    EventSeries::new(times, window_end)
}

/// Two event series observed over the same window; the unit of estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSample {
    s1: EventSeries,
    s2: EventSeries,
}

impl BivariateSample {
    pub fn new(s1: EventSeries, s2: EventSeries) -> Result<Self> {
        if s1.window_end != s2.window_end {
            return Err(Error::WindowMismatch(s1.window_end, s2.window_end));
        }
        Ok(Self { s1, s2 })
    }

    /// Validates both raw series against the common window `T`.
    pub fn from_raw(t1: &[f64], t2: &[f64], window_end: f64) -> Result<Self> {
        Self::new(
            validate_series(t1, window_end)?,
            validate_series(t2, window_end)?,
        )
    }

    pub fn s1(&self) -> &EventSeries {
        &self.s1
    }

    pub fn s2(&self) -> &EventSeries {
        &self.s2
    }

    pub fn window_end(&self) -> f64 {
        self.s1.window_end
    }

    /// Event counts `(n1, n2)`.
    pub fn counts(&self) -> (usize, usize) {
        (self.s1.len(), self.s2.len())
    }

    /// Errors unless both series have at least one event.
    pub fn require_nonempty(&self) -> Result<()> {
        if self.s1.is_empty() {
            return Err(Error::EmptySeries(1));
        }
        if self.s2.is_empty() {
            return Err(Error::EmptySeries(2));
        }
        Ok(())
    }

    /// The same sample with the roles of the two series exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            s1: self.s2.clone(),
            s2: self.s1.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_input() {
        let s = validate_series(&[0.5, 0.2], 10.0).unwrap();
        assert_eq!(s.times(), &[0.2, 0.5]);
        assert_eq!(s.window_end(), 10.0);
    }

    #[test]
    fn rejects_duplicates() {
        assert_eq!(
            validate_series(&[0.5, 0.5], 10.0),
            Err(Error::Duplicate { value: 0.5 })
        );
    }

    #[test]
    fn window_bounds() {
        assert!(matches!(
            validate_series(&[-0.1], 10.0),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(matches!(
            validate_series(&[0.0], 10.0),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(matches!(
            validate_series(&[10.5], 10.0),
            Err(Error::OutOfWindow { .. })
        ));
        assert!(validate_series(&[10.0], 10.0).is_ok());
    }

    #[test]
    fn rejects_nan_and_bad_window() {
        assert!(matches!(
            validate_series(&[1.0, f64::NAN], 10.0),
            Err(Error::NonMonotone { index: 1 })
        ));
        assert!(matches!(
            validate_series(&[1.0], 0.0),
            Err(Error::InvalidWindow(_))
        ));
        assert!(matches!(
            EventSeries::new(vec![2.0, 1.0], 10.0),
            Err(Error::NonMonotone { index: 1 })
        ));
    }

    #[test]
    fn duplicates_across_series_are_fine() {
        let s = BivariateSample::from_raw(&[1.0], &[1.0], 5.0).unwrap();
        assert_eq!(s.counts(), (1, 1));
    }

    #[test]
    fn mismatched_windows() {
        let a = validate_series(&[1.0], 5.0).unwrap();
        let b = validate_series(&[1.0], 6.0).unwrap();
        assert!(matches!(
            BivariateSample::new(a, b),
            Err(Error::WindowMismatch(..))
        ));
    }

    #[test]
    fn empty_series_flagged_for_estimation() {
        let s = BivariateSample::from_raw(&[], &[1.0], 5.0).unwrap();
        assert_eq!(s.require_nonempty(), Err(Error::EmptySeries(1)));
    }
}

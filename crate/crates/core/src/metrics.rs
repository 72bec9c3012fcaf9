//! Scalar performance figures over simulated signals.

use std::fmt;

use crate::error::{Result, SimError};

/// Default settling band, fraction of the reference.
pub const SETTLING_BAND: f64 = 0.02;
/// Default steady-state averaging window, fraction of the signal.
pub const STEADY_WINDOW: f64 = 0.1;

/// Root-mean-square difference between two equal-length signals.
pub fn rmse(actual: &[f64], estimated: &[f64]) -> Result<f64> {
    if actual.len() != estimated.len() {
        return Err(SimError::domain(format!(
            "rmse needs equal lengths, got {} and {}",
            actual.len(),
            estimated.len()
        )));
    }
    if actual.is_empty() {
        return Err(SimError::domain("rmse of an empty signal"));
    }
    let sum: f64 = actual.iter().zip(estimated).map(|(a, e)| (a - e) * (a - e)).sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Tolerance band around a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// Fraction of `|reference|`.
    Relative(f64),
    /// Same units as the signal.
    Absolute(f64),
}

/// Time after which the signal stays inside the band for good; `None` if the
/// last sample is outside.
pub fn settling_time(signal: &[f64], reference: f64, band: Band, dt: f64) -> Result<Option<f64>> {
    let half_width = match band {
        Band::Relative(frac) => {
            if !(frac > 0.0) {
                return Err(SimError::domain("settling band must be > 0"));
            }
            if reference == 0.0 {
                return Err(SimError::domain("relative settling band around a zero reference; use an absolute band"));
            }
            frac * reference.abs()
        }
        Band::Absolute(w) => {
            if !(w > 0.0) {
                return Err(SimError::domain("settling band must be > 0"));
            }
            w
        }
    };
    let outside = |x: &f64| (x - reference).abs() > half_width;
    match signal.iter().rposition(outside) {
        None => Ok(Some(0.0)),
        Some(k) if k + 1 == signal.len() => Ok(None),
        Some(k) => Ok(Some((k + 1) as f64 * dt)),
    }
}

/// Mean of the trailing `window_fraction` of the signal (at least one sample).
pub fn steady_state(signal: &[f64], window_fraction: f64) -> Result<f64> {
    if signal.is_empty() {
        return Err(SimError::domain("steady state of an empty signal"));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(SimError::domain(format!("window fraction must be in (0, 1], got {window_fraction}")));
    }
    let n = ((signal.len() as f64 * window_fraction).round() as usize).clamp(1, signal.len());
    let tail = &signal[signal.len() - n..];
    Ok(tail.iter().sum::<f64>() / n as f64)
}

/// Peak excursion above the reference, percent of the reference; zero when
/// the signal never exceeds it.
pub fn overshoot_pct(signal: &[f64], reference: f64) -> f64 {
    if reference == 0.0 {
        return 0.0;
    }
    let peak = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (((peak - reference) / reference.abs()) * 100.0).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub settling_time_s: Option<f64>,
    pub steady_state_value: f64,
    pub overshoot_pct: f64,
}

impl MetricsReport {
    /// Report for a step response held at a constant reference.
    pub fn for_step(signal: &[f64], reference: f64, dt: f64) -> Result<Self> {
        let refs = vec![reference; signal.len()];
        Ok(Self {
            rmse: rmse(signal, &refs)?,
            settling_time_s: settling_time(signal, reference, Band::Relative(SETTLING_BAND), dt)?,
            steady_state_value: steady_state(signal, STEADY_WINDOW)?,
            overshoot_pct: overshoot_pct(signal, reference),
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rmse={}", self.rmse)?;
        match self.settling_time_s {
            Some(t) => writeln!(f, "settling_time_s={t}")?,
            None => writeln!(f, "settling_time_s=not-settled")?,
        }
        writeln!(f, "steady_state_value={}", self.steady_state_value)?;
        writeln!(f, "overshoot_pct={}", self.overshoot_pct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rmse_examples() {
        let x = [1.0, -2.0, 3.5];
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        assert_relative_eq!(rmse(&shifted, &x).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(rmse(&[0.0, 3.0, 4.0], &[0.0; 3]).unwrap(), (25.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(rmse(&[0.0, 3.0, 4.0], &[0.0; 3]).unwrap(), 2.886751, max_relative = 1e-6);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn settling_examples() {
        assert_eq!(settling_time(&[5.0; 10], 5.0, Band::Relative(0.02), 0.1).unwrap(), Some(0.0));

        let step = [0.0, 50.0, 90.0, 99.0, 100.0, 100.5];
        assert_eq!(settling_time(&step, 100.0, Band::Relative(0.02), 0.5).unwrap(), Some(1.5));

        // enters at 2, leaves at 4, re-enters at 5
        let two = [0.0, 0.5, 1.0, 1.0, 1.5, 1.0, 1.0];
        assert_eq!(settling_time(&two, 1.0, Band::Relative(0.02), 1.0).unwrap(), Some(5.0));

        assert_eq!(settling_time(&[0.0, 0.0], 1.0, Band::Relative(0.02), 1.0).unwrap(), None);
        assert!(settling_time(&[0.0], 0.0, Band::Relative(0.02), 1.0).is_err());
        assert_eq!(settling_time(&[0.3, 0.01], 0.0, Band::Absolute(0.05), 1.0).unwrap(), Some(1.0));
        assert!(settling_time(&[0.0], 1.0, Band::Relative(0.0), 1.0).is_err());
    }

    #[test]
    fn steady_state_examples() {
        assert_eq!(steady_state(&[4.0; 7], 0.1).unwrap(), 4.0);
        assert_eq!(steady_state(&[0.0, 0.0, 10.0, 10.0], 0.5).unwrap(), 10.0);
        let n = 1001;
        let ramp: Vec<f64> = (0..n).map(|k| 10.0 * k as f64 / (n - 1) as f64).collect();
        assert!((steady_state(&ramp, 1.0).unwrap() - 5.0).abs() <= 10.0 / (n - 1) as f64);
        assert!(steady_state(&[], 0.1).is_err());
        assert!(steady_state(&[1.0], 0.0).is_err());
        assert!(steady_state(&[1.0], 1.5).is_err());
    }

    #[test]
    fn overshoot_examples() {
        assert_eq!(overshoot_pct(&[0.0, 50.0, 100.0], 100.0), 0.0);
        assert_relative_eq!(overshoot_pct(&[0.0, 110.0, 100.0], 100.0), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn report_lists_not_settled() {
        let r = MetricsReport::for_step(&[0.0, 0.0], 1.0, 0.1).unwrap();
        assert!(r.to_string().contains("settling_time_s=not-settled"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rmse_is_symmetric_and_scales(a in prop::collection::vec(-100.0f64..100.0, 1..50), k in 0.0f64..10.0) {
                let b: Vec<f64> = a.iter().map(|x| x * 0.5 + 1.0).collect();
                let r = rmse(&a, &b).unwrap();
                prop_assert_eq!(r, rmse(&b, &a).unwrap());
                let ka: Vec<f64> = a.iter().map(|x| k * x).collect();
                let kb: Vec<f64> = b.iter().map(|x| k * x).collect();
                prop_assert!((rmse(&ka, &kb).unwrap() - k * r).abs() <= 1e-9 * (1.0 + k * r));
            }

            #[test]
            fn wider_band_never_settles_later(sig in prop::collection::vec(0.0f64..2.0, 1..60), lo in 0.01f64..0.5, extra in 0.0f64..0.5) {
                let narrow = settling_time(&sig, 1.0, Band::Relative(lo), 0.1).unwrap();
                let wide = settling_time(&sig, 1.0, Band::Relative(lo + extra), 0.1).unwrap();
                match (narrow, wide) {
                    (Some(n), Some(w)) => prop_assert!(w <= n),
                    (Some(_), None) => prop_assert!(false, "wider band lost settling"),
                    _ => {}
                }
            }
        }
    }
}

//! Analytic cost model for offloaded payloads and response latency.
//!
//! Nothing here reads a clock. Transmission time is a fixed per-frame
//! overhead plus payload bits over the link rate in Mbit/s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("transmission rate must be positive, got {0}")]
    Rate(f64),
    #[error("fixed overhead must be non-negative, got {0}")]
    Overhead(f64),
    #[error("full frame size is zero")]
    ZeroFrame,
    #[error("need at least two points with distinct rates to fit a rate curve")]
    FitUnderdetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    /// Mbit/s.
    pub transmission_rate: f64,
    /// Seconds per frame regardless of size.
    pub fixed_overhead: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            transmission_rate: 100.0,
            fixed_overhead: 0.005,
        }
    }
}

impl LinkModel {
    pub fn new(transmission_rate: f64, fixed_overhead: f64) -> Result<Self, NetError> {
        let l = Self {
            transmission_rate,
            fixed_overhead,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.transmission_rate > 0.0 && self.transmission_rate.is_finite()) {
            return Err(NetError::Rate(self.transmission_rate));
        }
        if !(self.fixed_overhead >= 0.0 && self.fixed_overhead.is_finite()) {
            return Err(NetError::Overhead(self.fixed_overhead));
        }
        Ok(())
    }

    pub fn with_rate(self, transmission_rate: f64) -> Self {
        Self {
            transmission_rate,
            ..self
        }
    }
}

pub fn tx_latency(bytes: u64, link: &LinkModel) -> f64 {
    link.fixed_overhead + 8.0 * bytes as f64 / (link.transmission_rate * 1e6)
}

pub fn filter_latency(cost: u64, per_unit: f64) -> f64 {
    cost as f64 * per_unit
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub filter_time: f64,
    pub tx_time: f64,
    pub inference_time: f64,
    pub total: f64,
}

pub fn response_latency(filter_time: f64, tx_time: f64, inference_time: f64) -> LatencyBreakdown {
    LatencyBreakdown {
        filter_time,
        tx_time,
        inference_time,
        total: filter_time + tx_time + inference_time,
    }
}

pub fn data_size_ratio(offloaded: u64, full: u64) -> Result<f64, NetError> {
    if full == 0 {
        return Err(NetError::ZeroFrame);
    }
    Ok((offloaded as f64 / full as f64).clamp(0.0, 1.0))
}

/// `latency(r) = constant + per_rate / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub constant: f64,
    pub per_rate: f64,
}

impl RateCurve {
    pub fn eval(&self, rate: f64) -> f64 {
        self.constant + self.per_rate / rate
    }

    pub fn max_relative_error(&self, points: &[(f64, f64)]) -> f64 {
        points
            .iter()
            .map(|&(r, y)| ((self.eval(r) - y) / y).abs())
            .fold(0.0, f64::max)
    }
}

/// Weighted least squares on relative error: minimizes
/// `sum ((C + B/r - y) / y)^2` over `(rate, latency)` points.
pub fn fit_rate_curve(points: &[(f64, f64)]) -> Result<RateCurve, NetError> {
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(r, y) in points {
        let w = 1.0 / (y * y);
        let x = 1.0 / r;
        s11 += w;
        s12 += w * x;
        s22 += w * x * x;
        t1 += w * y;
        t2 += w * x * y;
    }
    let distinct = points.first().is_some_and(|&(r0, _)| points.iter().any(|&(r, _)| r != r0));
    let det = s11 * s22 - s12 * s12;
    if !distinct || det == 0.0 {
        return Err(NetError::FitUnderdetermined);
    }
    Ok(RateCurve {
        constant: (t1 * s22 - t2 * s12) / det,
        per_rate: (s11 * t2 - s12 * t1) / det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tx_cases() {
        let l = LinkModel::new(80.0, 0.004).unwrap();
        assert_eq!(tx_latency(0, &l), 0.004);
        let l0 = LinkModel::new(80.0, 0.0).unwrap();
        assert!((tx_latency(1_000_000, &l0) - 0.1).abs() < 1e-15);
        let v1 = tx_latency(123_456, &l0);
        let v2 = tx_latency(123_456, &l0.with_rate(160.0));
        assert!((v1 - 2.0 * v2).abs() < 1e-15);
    }

    #[test]
    fn link_validation() {
        assert_eq!(LinkModel::new(0.0, 0.0), Err(NetError::Rate(0.0)));
        assert_eq!(LinkModel::new(10.0, -1.0), Err(NetError::Overhead(-1.0)));
    }

    #[test]
    fn filter_cases() {
        assert_eq!(filter_latency(0, 1e-5), 0.0);
        assert!((filter_latency(100, 10e-6) - 1e-3).abs() < 1e-15);
        assert!((filter_latency(300, 1e-5) - 3.0 * filter_latency(100, 1e-5)).abs() < 1e-15);
    }

    #[test]
    fn breakdown_sums() {
        assert_eq!(response_latency(0.0, 0.0, 0.0).total, 0.0);
        let a = response_latency(0.01, 0.02, 0.2);
        let b = response_latency(0.2, 0.01, 0.02);
        assert!((a.total - b.total).abs() < 1e-15);
        assert_eq!(a.total, a.filter_time + a.tx_time + a.inference_time);
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(data_size_ratio(0, 500), Ok(0.0));
        assert_eq!(data_size_ratio(500, 500), Ok(1.0));
        assert_eq!(data_size_ratio(18 * 3072, 100 * 3072), Ok(0.18));
        assert_eq!(data_size_ratio(600, 500), Ok(1.0));
        assert_eq!(data_size_ratio(1, 0), Err(NetError::ZeroFrame));
    }

    #[test]
    fn fit_recovers_exact_curve() {
        let truth = RateCurve {
            constant: 0.19,
            per_rate: 6.5,
        };
        let pts: Vec<_> = [80.0, 100.0, 120.0].iter().map(|&r| (r, truth.eval(r))).collect();
        let fit = fit_rate_curve(&pts).unwrap();
        assert!((fit.constant - 0.19).abs() < 1e-12);
        assert!((fit.per_rate - 6.5).abs() < 1e-9);
        assert!(fit_rate_curve(&pts[..1]).is_err());
        assert!(fit_rate_curve(&[(80.0, 0.2), (80.0, 0.3)]).is_err());
    }

    proptest! {
        #[test]
        fn latency_strictly_decreasing_in_rate(bytes in 1u64..10_000_000, r in 1.0..500.0f64, dr in 0.5..100.0f64) {
            let l = LinkModel::new(r, 0.003).unwrap();
            prop_assert!(tx_latency(bytes, &l.with_rate(r + dr)) < tx_latency(bytes, &l));
        }
    }
}

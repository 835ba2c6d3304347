//! Evaluation metrics: per-entry reconstruction error, measurement SNR, and
//! wall-clock decode latency.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean squared error per entry: (1/n) * sum (a_i - b_i)^2.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        / a.len() as f64)
}

/// Measurement signal-to-noise ratio in dB:
/// 10*log10((||y||^2 / m) / sigma_n^2). Zero noise with a nonzero signal is
/// +inf; a zero signal with nonzero noise is -inf.
pub fn snr_db(y_clean: &[f64], sigma_n: f64) -> Result<f64> {
    if y_clean.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if sigma_n < 0.0 || !sigma_n.is_finite() {
        return Err(Error::InvalidConfig("sigma_n must be finite and >= 0".into()));
    }
    let signal_power = y_clean.iter().map(|v| v * v).sum::<f64>() / y_clean.len() as f64;
    let noise_power = sigma_n * sigma_n;
    if noise_power == 0.0 {
        return Ok(if signal_power == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        });
    }
    if signal_power == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(10.0 * (signal_power / noise_power).log10())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyReport {
    /// Median seconds per frame over the timed runs.
    pub median_seconds: f64,
    pub runs: usize,
    pub warmup_runs: usize,
    /// Seconds per timed run, in execution order.
    pub samples: Vec<f64>,
}

/// Times a decode closure: `warmup` untimed calls (>= 2 enforced), then
/// `runs` timed calls (>= 5 enforced), reporting the median.
pub fn time_decode<F>(mut decode: F, runs: usize, warmup: usize) -> Result<LatencyReport>
where
    F: FnMut() -> Result<()>,
{
    let runs = runs.max(5);
    let warmup = warmup.max(2);
    for _ in 0..warmup {
        decode()?;
    }
    let mut samples = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        decode()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    let mut sorted = samples.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if runs % 2 == 1 {
        sorted[runs / 2]
    } else {
        (sorted[runs / 2 - 1] + sorted[runs / 2]) / 2.0
    };
    Ok(LatencyReport {
        median_seconds: median,
        runs,
        warmup_runs: warmup,
        samples,
    })
}

/// One method's aggregate numbers at one measurement count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub m: usize,
    pub frames: usize,
    pub mean_mse: f64,
    pub mean_snr_db: f64,
    pub power_ratio: f64,
    pub power_satisfied: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_matches_hand_computation() {
        // ((1)^2 + (2)^2 + (0)^2) / 3 = 5/3
        let v = mse(&[1.0, 0.0, 2.0], &[0.0, 2.0, 2.0]).unwrap();
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mse(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn mse_rejects_bad_shapes() {
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(mse(&[], &[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn snr_hand_case() {
        // ||y||^2/m = 4, sigma^2 = 1 -> 10*log10(4) ~= 6.0206
        let v = snr_db(&[2.0, 2.0, -2.0], 1.0).unwrap();
        assert!((v - 10.0 * 4.0f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn snr_degenerate_cases() {
        assert_eq!(snr_db(&[1.0, 2.0], 0.0).unwrap(), f64::INFINITY);
        assert_eq!(snr_db(&[0.0, 0.0], 0.5).unwrap(), f64::NEG_INFINITY);
        assert!(snr_db(&[0.0], 0.0).unwrap().is_nan());
        assert!(snr_db(&[], 1.0).is_err());
        assert!(snr_db(&[1.0], -0.1).is_err());
    }

    #[test]
    fn snr_scales_by_twenty_db_per_decade_of_sigma() {
        let y = [0.3, -0.7, 1.1];
        let a = snr_db(&y, 0.01).unwrap();
        let b = snr_db(&y, 0.1).unwrap();
        assert!((a - b - 20.0).abs() < 1e-10);
    }

    #[test]
    fn latency_enforces_floors_and_reports_median() {
        let report = time_decode(|| Ok(()), 0, 0).unwrap();
        assert_eq!(report.runs, 5);
        assert_eq!(report.warmup_runs, 2);
        assert_eq!(report.samples.len(), 5);
        let mut sorted = report.samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(report.median_seconds, sorted[2]);
    }

    #[test]
    fn latency_orders_a_slow_closure_above_a_fast_one() {
        let fast = time_decode(|| Ok(()), 5, 2).unwrap();
        let slow = time_decode(
            || {
                std::thread::sleep(std::time::Duration::from_millis(2));
                Ok(())
            },
            5,
            2,
        )
        .unwrap();
        assert!(slow.median_seconds > fast.median_seconds);
        assert!(slow.median_seconds >= 0.002);
    }

    #[test]
    fn latency_propagates_errors() {
        let res = time_decode(|| Err(Error::EmptyBatch), 5, 2);
        assert!(matches!(res, Err(Error::EmptyBatch)));
    }
}

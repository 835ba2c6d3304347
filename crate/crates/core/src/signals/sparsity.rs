//! Frequency-domain energy concentration of a channel.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How much of a channel's energy the `k` largest DFT coefficients carry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsityReport {
    pub k: usize,
    pub energy_fraction: f64,
    pub dominant_bins: Vec<usize>,
}

/// Squared DFT magnitudes of a real channel, all `N` bins.
pub fn spectrum(channel: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = channel.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

pub fn sparsity_report(channel: &[f64], k: usize) -> Result<SparsityReport> {
    let n = channel.len();
    if n < 2 || k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "need N >= 2 and 1 <= k <= N (N = {n}, k = {k})"
        )));
    }
    let power = spectrum(channel);
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable tie-break on the bin index keeps the report deterministic.
    order.sort_by(|&a, &b| power[b].partial_cmp(&power[a]).unwrap().then(a.cmp(&b)));
    let mut dominant_bins: Vec<usize> = order[..k].to_vec();
    let captured: f64 = dominant_bins.iter().map(|&b| power[b]).sum();
    dominant_bins.sort_unstable();
    Ok(SparsityReport {
        k,
        energy_fraction: captured / total,
        dominant_bins,
    })
}

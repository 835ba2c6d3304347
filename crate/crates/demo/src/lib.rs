//! Browser playground for the compressed-transmission pipeline. Each exported
//! function is stateless and returns JSON, so the page needs no framework:
//! synthesize frames, compress them through a measurement matrix, push them
//! over the noisy channel and recover them in front of your eyes.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use imucs::lasso::{self, LassoConfig};
use imucs::metrics;
use imucs::sensing::{
    apply_channel, build_matrix, check_power, ChannelConfig, MatrixDesign, MatrixScheme,
    PowerConstraint,
};
use imucs::signals::{self, sparsity_report, spectrum, Dataset, SynthConfig};

const DEMO_FRAMES: usize = 300;

fn demo_dataset(seed: u64) -> Result<Dataset, imucs::Error> {
    signals::synthesize(&SynthConfig::default(), DEMO_FRAMES, seed)
}

fn to_json<T: Serialize>(value: Result<T, imucs::Error>) -> String {
    match value {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(message: &str) -> String {
    format!(
        "{{\"error\":{}}}",
        serde_json::Value::String(message.to_string())
    )
}

#[derive(Serialize)]
struct SparsityView {
    samples: Vec<f64>,
    power_spectrum: Vec<f64>,
    energy_fraction: f64,
    dominant_bins: Vec<usize>,
}

fn channel_sparsity_inner(seed: u64, channel: usize, k: usize) -> Result<SparsityView, imucs::Error> {
    let data = demo_dataset(seed)?;
    let channel = channel % data.dim();
    let samples: Vec<f64> = data.channel(channel).into_iter().take(256).collect();
    let report = sparsity_report(&samples, k)?;
    let power_spectrum = spectrum(&samples);
    Ok(SparsityView {
        samples,
        power_spectrum: power_spectrum[..128].to_vec(),
        energy_fraction: report.energy_fraction,
        dominant_bins: report.dominant_bins,
    })
}

/// One sensor channel over time plus its spectral summary: how few frequency
/// bins carry `k` of its energy.
#[wasm_bindgen]
pub fn channel_sparsity(seed: u32, channel: usize, k: usize) -> String {
    to_json(channel_sparsity_inner(seed as u64, channel, k))
}

#[derive(Serialize)]
struct TransmissionView {
    original: Vec<f64>,
    recovered: Vec<f64>,
    mse: f64,
    snr_db: f64,
    power_ratio: f64,
    power_satisfied: bool,
    iterations: usize,
}

fn transmit_inner(
    m: usize,
    sigma_n: f64,
    power_constrained: bool,
    seed: u64,
    frame_index: usize,
) -> Result<TransmissionView, imucs::Error> {
    let data = demo_dataset(seed)?;
    let stats = signals::source_stats(&data)?;
    let scheme = if power_constrained {
        MatrixScheme::Prop1
    } else {
        MatrixScheme::UnitVarianceBaseline
    };
    let design = MatrixDesign::gaussian(scheme, m, data.dim(), 1.0, 3.0, stats, seed ^ 0x5eed);
    let matrix = build_matrix(&design)?;
    let frame = &data.frames()[frame_index % data.len()];
    let y = matrix.project(frame)?;
    let channel = ChannelConfig::new(sigma_n, seed ^ 0xcafe)?;
    let mut rng = channel.rng(0);
    let sent = apply_channel(&y, &channel, false, &mut rng)?;
    let power = check_power(&sent.y_clean, 1.0, PowerConstraint::NormOverM);
    let solution = lasso::solve(
        &matrix,
        &sent.y_received,
        &LassoConfig {
            max_iter: 200,
            ..Default::default()
        },
    )?;
    let mse = metrics::mse(&solution.x_hat, frame.values())?;
    let snr_db = metrics::snr_db(&sent.y_clean, sigma_n)?;
    Ok(TransmissionView {
        original: frame.values().to_vec(),
        recovered: solution.x_hat,
        mse,
        snr_db,
        power_ratio: power.ratio,
        power_satisfied: power.satisfied,
        iterations: solution.iterations,
    })
}

/// Compresses one frame to `m` measurements, sends it through the noisy
/// channel and recovers it with the l1 solver. `power_constrained` switches
/// between the power-scaled matrix and the unit-variance baseline.
#[wasm_bindgen]
pub fn transmit_frame(
    m: usize,
    sigma_n: f64,
    power_constrained: bool,
    seed: u32,
    frame_index: usize,
) -> String {
    to_json(transmit_inner(
        m,
        sigma_n,
        power_constrained,
        seed as u64,
        frame_index,
    ))
}

#[derive(Serialize)]
struct PowerCoverageView {
    fraction_satisfied: f64,
    ratios: Vec<f64>,
}

fn power_coverage_inner(m: usize, d: f64, seed: u64) -> Result<PowerCoverageView, imucs::Error> {
    let data = demo_dataset(seed)?;
    let stats = signals::source_stats(&data)?;
    let design = MatrixDesign::gaussian(
        MatrixScheme::Prop1,
        m,
        data.dim(),
        1.0,
        d,
        stats,
        seed ^ 0x9047,
    );
    let matrix = build_matrix(&design)?;
    let mut satisfied = 0usize;
    let mut ratios = Vec::with_capacity(data.len());
    for frame in data.frames() {
        let y = matrix.project(frame)?;
        let check = check_power(&y, 1.0, PowerConstraint::NormOverM);
        if check.satisfied {
            satisfied += 1;
        }
        ratios.push(check.ratio);
    }
    Ok(PowerCoverageView {
        fraction_satisfied: satisfied as f64 / data.len() as f64,
        ratios,
    })
}

/// Fraction of frames whose compressed transmission stays inside the power
/// budget, with the per-frame budget ratios for a histogram.
#[wasm_bindgen]
pub fn power_coverage(m: usize, d: f64, seed: u32) -> String {
    to_json(power_coverage_inner(m, d, seed as u64))
}

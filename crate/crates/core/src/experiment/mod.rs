//! Experiment orchestration: dataset preparation, model caching, the MSE
//! sweep over m, the decoding-latency sweep over batch size, S-REC
//! certification runs, and CSV/JSON/SVG emission.

pub mod config;
pub mod plot;

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Method};

use crate::error::{Error, Result};
use crate::genmodel::{
    self, decoder_pair_sampler, init_model, LatentOptConfig, TrainConfig, VaeArchitecture,
    VaeModel,
};
use crate::lasso::{self, LassoConfig};
use crate::metrics::{self, LatencyReport};
use crate::sensing::{
    build_matrix, certify_srec, check_power, ChannelConfig, MatrixDesign, MatrixScheme,
    MeasurementMatrix, SRecCertificate,
};
use crate::signals::{self, Dataset, NormStats, SourceStats, Split, SynthConfig};

/// Fixed CSV header for every sweep/latency result file.
pub const CSV_HEADER: &str =
    "method,m,seed,batch,mse,latency_seconds,power_violation_rate,snr_db,error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub m: usize,
    pub seed: u64,
    pub batch: Option<usize>,
    pub mse: Option<f64>,
    pub latency_seconds: Option<f64>,
    pub power_violation_rate: Option<f64>,
    pub snr_db: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub code_version: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    fn new(config: &ExperimentConfig, mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| {
            (&a.method, a.m, a.seed, a.batch).cmp(&(&b.method, b.m, b.seed, b.batch))
        });
        Self {
            config_hash: config.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            rows,
        }
    }
}

/// Train/test frames plus the pooled source statistics the power-constrained
/// matrix needs.
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub stats: SourceStats,
}

/// Loads or synthesizes the dataset and splits it. Loaded data is optionally
/// min-max normalized into [-1, 1]; synthetic frames are generated in range.
pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let (train, test) = match &config.dataset {
        Some(path) => {
            let all = Dataset::load(path, Split::Train)?;
            all.split_at(config.train_frames)?
        }
        None => {
            let synth = SynthConfig::default().with_dim(config.n);
            let all = signals::synthesize(
                &synth,
                config.train_frames + config.test_frames,
                config.data_seed,
            )?;
            all.split_at(config.train_frames)?
        }
    };
    let (train, test) = if config.normalize {
        let stats = NormStats::fit(&train)?;
        (
            signals::normalize(&train, &stats),
            signals::normalize(&test, &stats),
        )
    } else {
        (train, test)
    };
    let stats = signals::source_stats(&train)?;
    Ok(PreparedData { train, test, stats })
}

fn mix(parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn scheme_tag(scheme: MatrixScheme) -> &'static str {
    match scheme {
        MatrixScheme::Prop1 => "prop1",
        MatrixScheme::UnitVarianceBaseline => "unit-variance",
        MatrixScheme::SensorSelection => "sensor-selection",
        MatrixScheme::Prop1L2Norm => "prop1-l2norm",
    }
}

/// Builds the measurement matrix a method transmits with at one (m, seed).
pub fn method_matrix(
    config: &ExperimentConfig,
    method: Method,
    m: usize,
    seed: u64,
    stats: SourceStats,
) -> Result<MeasurementMatrix> {
    let scheme = method.scheme();
    let design = match scheme {
        MatrixScheme::SensorSelection => {
            // evenly spaced sensor rows keep the selection deterministic
            let indices: Vec<usize> = (0..m).map(|i| i * config.n / m).collect();
            MatrixDesign::sensor_selection(indices, config.n, seed)
        }
        _ => MatrixDesign::gaussian(
            scheme,
            m,
            config.n,
            config.p_t,
            config.d,
            stats,
            mix(&[seed, m as u64, scheme as u64 + 1]),
        ),
    };
    build_matrix(&design)
}

fn train_config(config: &ExperimentConfig, m: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        optimizer: genmodel::AdamConfig {
            learning_rate: config.learning_rate,
            ..Default::default()
        },
        lambda_l1: config.lambda_l1,
        beta_kl: config.beta_kl,
        seed: mix(&[seed, m as u64, 0x7261]),
    }
}

fn architecture(config: &ExperimentConfig, m: usize) -> VaeArchitecture {
    VaeArchitecture {
        input_dim: m,
        encoder_hidden: config.hidden_dim,
        latent_dim: config.latent_dim,
        decoder_hidden: config.hidden_dim,
        output_dim: config.n,
    }
}

fn channel_for(config: &ExperimentConfig, seed: u64) -> Result<ChannelConfig> {
    ChannelConfig::new(config.sigma_n, mix(&[seed, 0xc4a]))
}

/// Disk location of the cached model for one (scheme, m, seed) under the
/// current config hash.
pub fn model_path(config: &ExperimentConfig, scheme: MatrixScheme, m: usize, seed: u64) -> PathBuf {
    config.output_dir.join("models").join(format!(
        "vae-{}-m{m}-seed{seed}-{}.json",
        scheme_tag(scheme),
        config.hash()
    ))
}

/// Returns the cached model for this matrix if present, otherwise trains one
/// and caches it. The cache key includes the config hash, so any parameter
/// change retrains.
pub fn get_or_train_model(
    config: &ExperimentConfig,
    train: &Dataset,
    matrix: &MeasurementMatrix,
    seed: u64,
) -> Result<VaeModel> {
    let path = model_path(config, matrix.design().scheme, matrix.m(), seed);
    if path.exists() {
        let model = VaeModel::load(&path)?;
        if model.bound_design() == Some(matrix.design()) {
            return Ok(model);
        }
    }
    let arch = architecture(config, matrix.m());
    let init = init_model(&arch, mix(&[seed, matrix.m() as u64, 0xa11]))?;
    let channel = channel_for(config, seed)?;
    let model = genmodel::train(
        init,
        train,
        matrix,
        &channel,
        &train_config(config, matrix.m(), seed),
    )?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    model.save(&path)?;
    Ok(model)
}

fn latent_opt_config(config: &ExperimentConfig, seed: u64) -> LatentOptConfig {
    LatentOptConfig {
        restarts: config.latent_restarts,
        steps: config.latent_steps,
        learning_rate: config.latent_learning_rate,
        lambda_l1: config.lambda_l1,
        seed: mix(&[seed, 0x1a7]),
    }
}

fn lasso_config(config: &ExperimentConfig) -> LassoConfig {
    LassoConfig {
        lambda: config.lasso_lambda,
        max_iter: config.lasso_max_iter,
        tol: config.lasso_tol,
        tau_report: false,
    }
}

fn decode_one(
    config: &ExperimentConfig,
    method: Method,
    matrix: &MeasurementMatrix,
    model: Option<&VaeModel>,
    y_received: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    match method {
        Method::LassoPt | Method::LassoNoPt => {
            Ok(lasso::solve(matrix, y_received, &lasso_config(config))?.x_hat)
        }
        Method::CsVaeLatentopt => {
            let model = model.ok_or_else(|| Error::InvalidConfig("missing model".into()))?;
            Ok(genmodel::reconstruct_via_latent_opt(
                model,
                y_received,
                matrix,
                &latent_opt_config(config, seed),
            )?
            .x_hat)
        }
        Method::CsVae | Method::SensorSelection | Method::L2norm => {
            let model = model.ok_or_else(|| Error::InvalidConfig("missing model".into()))?;
            genmodel::reconstruct(model, y_received)
        }
    }
}

struct RowStats {
    mse: f64,
    snr_db: f64,
    power_violation_rate: f64,
}

fn evaluate_method(
    config: &ExperimentConfig,
    method: Method,
    matrix: &MeasurementMatrix,
    model: Option<&VaeModel>,
    test: &Dataset,
    seed: u64,
) -> Result<RowStats> {
    let count = if config.eval_frames == 0 {
        test.len()
    } else {
        config.eval_frames.min(test.len())
    };
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let channel = channel_for(config, seed)?;
    let mut noise_rng = channel.rng(0);
    let normalize_l2 = matrix.design().scheme.l2_normalizes();
    let mut sum_mse = 0.0;
    let mut sum_snr = 0.0;
    let mut violations = 0usize;
    for frame in &test.frames()[..count] {
        let y = matrix.project(frame)?;
        let sent = crate::sensing::apply_channel(&y, &channel, normalize_l2, &mut noise_rng)?;
        if !check_power(&sent.y_clean, config.p_t, config.power_variant).satisfied {
            violations += 1;
        }
        let x_hat = decode_one(config, method, matrix, model, &sent.y_received, seed)?;
        sum_mse += metrics::mse(&x_hat, frame.values())?;
        sum_snr += metrics::snr_db(&sent.y_clean, config.sigma_n)?;
    }
    Ok(RowStats {
        mse: sum_mse / count as f64,
        snr_db: sum_snr / count as f64,
        power_violation_rate: violations as f64 / count as f64,
    })
}

fn error_row(method: Method, m: usize, seed: u64, batch: Option<usize>, err: &Error) -> SweepRow {
    SweepRow {
        method: method.name().to_string(),
        m,
        seed,
        batch,
        mse: None,
        latency_seconds: None,
        power_violation_rate: None,
        snr_db: None,
        error: Some(err.to_string().replace([',', '\n'], ";")),
    }
}

/// The reconstruction-MSE sweep: every (method, m, seed) cell of the config,
/// failures recorded as error rows rather than aborting the run.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let data = prepare_data(config)?;
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        for &m in &config.m_values {
            for &method in &config.methods {
                rows.push(sweep_cell(config, &data, method, m, seed));
            }
        }
    }
    let result = SweepResult::new(config, rows);
    write_outputs(config, "sweep", &result)?;
    if config.plot {
        emit_mse_plot(config, &result)?;
    }
    Ok(result)
}

fn sweep_cell(
    config: &ExperimentConfig,
    data: &PreparedData,
    method: Method,
    m: usize,
    seed: u64,
) -> SweepRow {
    let attempt = || -> Result<RowStats> {
        let matrix = method_matrix(config, method, m, seed, data.stats)?;
        let model = if method.uses_model() {
            Some(get_or_train_model(config, &data.train, &matrix, seed)?)
        } else {
            None
        };
        evaluate_method(config, method, &matrix, model.as_ref(), &data.test, seed)
    };
    match attempt() {
        Ok(stats) => SweepRow {
            method: method.name().to_string(),
            m,
            seed,
            batch: None,
            mse: Some(stats.mse),
            latency_seconds: None,
            power_violation_rate: Some(stats.power_violation_rate),
            snr_db: Some(stats.snr_db),
            error: None,
        },
        Err(err) => error_row(method, m, seed, None, &err),
    }
}

/// The latency sweep at m = latency_m: decoding wall-clock per
/// batch size, timed sequentially and exclusively.
pub fn run_latency(config: &ExperimentConfig, batch_sizes: &[usize]) -> Result<SweepResult> {
    config.validate()?;
    if batch_sizes.is_empty() || batch_sizes.contains(&0) {
        return Err(Error::InvalidConfig("batch sizes must be positive".into()));
    }
    let data = prepare_data(config)?;
    let m = config.latency_m;
    let seed = config.seeds[0];
    let mut rows = Vec::new();
    for &method in &config.methods {
        let prep = || -> Result<(MeasurementMatrix, Option<VaeModel>, Vec<Vec<f64>>)> {
            let matrix = method_matrix(config, method, m, seed, data.stats)?;
            let model = if method.uses_model() {
                Some(get_or_train_model(config, &data.train, &matrix, seed)?)
            } else {
                None
            };
            // measurements are precomputed: only decoding is timed
            let channel = channel_for(config, seed)?;
            let mut rng = channel.rng(0);
            let normalize_l2 = matrix.design().scheme.l2_normalizes();
            let max_b = *batch_sizes.iter().max().unwrap();
            let mut received = Vec::with_capacity(max_b);
            for i in 0..max_b {
                let frame = &data.test.frames()[i % data.test.len()];
                let y = matrix.project(frame)?;
                received.push(
                    crate::sensing::apply_channel(&y, &channel, normalize_l2, &mut rng)?
                        .y_received,
                );
            }
            Ok((matrix, model, received))
        };
        let (matrix, model, received) = match prep() {
            Ok(v) => v,
            Err(err) => {
                for &b in batch_sizes {
                    rows.push(error_row(method, m, seed, Some(b), &err));
                }
                continue;
            }
        };
        for &b in batch_sizes {
            let timing = metrics::time_decode(
                || {
                    for y in &received[..b] {
                        decode_one(config, method, &matrix, model.as_ref(), y, seed)?;
                    }
                    Ok(())
                },
                5,
                2,
            );
            rows.push(match timing {
                Ok(report) => SweepRow {
                    method: method.name().to_string(),
                    m,
                    seed,
                    batch: Some(b),
                    mse: None,
                    latency_seconds: Some(report.median_seconds),
                    power_violation_rate: None,
                    snr_db: None,
                    error: None,
                },
                Err(err) => error_row(method, m, seed, Some(b), &err),
            });
        }
    }
    let result = SweepResult::new(config, rows);
    write_outputs(config, "latency", &result)?;
    if config.plot {
        emit_latency_plot(config, &result)?;
    }
    Ok(result)
}

/// Times one decode batch for an already-prepared method; the library-level
/// entry used by the latency acceptance checks.
pub fn time_method_decode(
    config: &ExperimentConfig,
    method: Method,
    matrix: &MeasurementMatrix,
    model: Option<&VaeModel>,
    received: &[Vec<f64>],
) -> Result<LatencyReport> {
    metrics::time_decode(
        || {
            for y in received {
                decode_one(config, method, matrix, model, y, config.seeds[0])?;
            }
            Ok(())
        },
        5,
        2,
    )
}

/// Decodes `count` test frames with one method and writes them in the input
/// frame-table format. Returns the number of frames written.
pub fn export_recovered(
    config: &ExperimentConfig,
    method: Method,
    m: usize,
    count: usize,
    out: &Path,
) -> Result<usize> {
    let data = prepare_data(config)?;
    let seed = config.seeds[0];
    let matrix = method_matrix(config, method, m, seed, data.stats)?;
    let model = if method.uses_model() {
        Some(get_or_train_model(config, &data.train, &matrix, seed)?)
    } else {
        None
    };
    let count = count.min(data.test.len());
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let channel = channel_for(config, seed)?;
    let mut rng = channel.rng(0);
    let normalize_l2 = matrix.design().scheme.l2_normalizes();
    let mut recovered = Vec::with_capacity(count);
    for frame in &data.test.frames()[..count] {
        let y = matrix.project(frame)?;
        let sent = crate::sensing::apply_channel(&y, &channel, normalize_l2, &mut rng)?;
        recovered.push(decode_one(
            config,
            method,
            &matrix,
            model.as_ref(),
            &sent.y_received,
            seed,
        )?);
    }
    signals::write_frame_table(out, recovered.iter().map(|r| r.as_slice()))?;
    Ok(count)
}

/// S-REC certification of the power-constrained matrix over decoder-range
/// pairs, using the cached model when one exists (an untrained decoder still
/// defines a range).
pub fn run_srec(config: &ExperimentConfig) -> Result<SRecCertificate> {
    config.validate()?;
    let data = prepare_data(config)?;
    let seed = config.seeds[0];
    let matrix = method_matrix(config, Method::CsVae, config.srec_m, seed, data.stats)?;
    let path = model_path(config, matrix.design().scheme, matrix.m(), seed);
    let model = if path.exists() {
        VaeModel::load(&path)?
    } else {
        init_model(
            &architecture(config, config.srec_m),
            mix(&[seed, config.srec_m as u64, 0xa11]),
        )?
    };
    let cert = certify_srec(
        &matrix,
        decoder_pair_sampler(&model),
        config.srec_kappa,
        config.srec_pairs,
        mix(&[seed, 0x57ec]),
    )?;
    let out = config.output_dir.join("srec.json");
    ensure_dir(&config.output_dir)?;
    let file = std::fs::File::create(&out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &cert)?;
    Ok(cert)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    // `{}` prints the shortest representation that round-trips the f64, so
    // identical numbers produce identical text
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `<name>.csv` (provenance header lines, fixed column header, one
/// line per row) and the `<name>.json` mirror.
pub fn write_outputs(config: &ExperimentConfig, name: &str, result: &SweepResult) -> Result<()> {
    ensure_dir(&config.output_dir)?;
    let csv_path = config.output_dir.join(format!("{name}.csv"));
    let file = std::fs::File::create(&csv_path).map_err(|source| Error::Io {
        path: csv_path.display().to_string(),
        source,
    })?;
    let mut w = std::io::BufWriter::new(file);
    let echo = serde_json::to_string(config)?;
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "# config_hash={}", result.config_hash)?;
        writeln!(w, "# code_version={}", result.code_version)?;
        writeln!(w, "# config={echo}")?;
        writeln!(w, "{CSV_HEADER}")?;
        for r in &result.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.method,
                r.m,
                r.seed,
                fmt_opt(r.batch),
                fmt_opt_f64(r.mse),
                fmt_opt_f64(r.latency_seconds),
                fmt_opt_f64(r.power_violation_rate),
                fmt_opt_f64(r.snr_db),
                r.error.clone().unwrap_or_default(),
            )?;
        }
        w.flush()
    })();
    body.map_err(|source| Error::Io {
        path: csv_path.display().to_string(),
        source,
    })?;

    let json_path = config.output_dir.join(format!("{name}.json"));
    let file = std::fs::File::create(&json_path).map_err(|source| Error::Io {
        path: json_path.display().to_string(),
        source,
    })?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), result)?;
    Ok(())
}

fn emit_mse_plot(config: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    let mut series = Vec::new();
    for &method in &config.methods {
        let mut points = Vec::new();
        for &m in &config.m_values {
            let values: Vec<f64> = result
                .rows
                .iter()
                .filter(|r| r.method == method.name() && r.m == m)
                .filter_map(|r| r.mse)
                .collect();
            if !values.is_empty() {
                points.push((m as f64, values.iter().sum::<f64>() / values.len() as f64));
            }
        }
        if !points.is_empty() {
            series.push(plot::Series {
                label: method.name().to_string(),
                points,
            });
        }
    }
    if series.is_empty() {
        return Ok(());
    }
    plot::write_line_plot(
        &config.output_dir.join("mse_vs_m.svg"),
        "Reconstruction MSE vs measurements",
        "m",
        "MSE",
        &series,
        true,
    )
}

fn emit_latency_plot(config: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    let mut series = Vec::new();
    for &method in &config.methods {
        let points: Vec<(f64, f64)> = result
            .rows
            .iter()
            .filter(|r| r.method == method.name())
            .filter_map(|r| Some((r.batch? as f64, r.latency_seconds?)))
            .collect();
        if !points.is_empty() {
            series.push(plot::Series {
                label: method.name().to_string(),
                points,
            });
        }
    }
    if series.is_empty() {
        return Ok(());
    }
    plot::write_line_plot(
        &config.output_dir.join("latency_vs_batch.svg"),
        "Decoding latency vs batch size",
        "batch",
        "seconds",
        &series,
        true,
    )
}

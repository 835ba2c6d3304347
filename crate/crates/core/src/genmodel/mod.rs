//! From-scratch variational auto-encoder over compressed measurements.
//!
//! The encoder consumes the received measurement (dimension m), the decoder
//! emits a full frame (dimension n) through a tanh output layer, so every
//! reconstruction lies in (-1, 1). Training minimizes
//! ||A*G(z) - y||^2 + lambda*||G(z)||_1 + beta*KL, with the KL weight
//! configurable (beta = 0 recovers the pure Lagrangian objective).
//! All gradients are written out by hand; no autodiff framework.

mod adam;

pub use adam::{AdamConfig, AdamState};

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, seeded_rng};
use crate::sensing::{ChannelConfig, MatrixDesign, MeasurementMatrix};
use crate::signals::Dataset;

const LOG_VAR_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeArchitecture {
    pub input_dim: usize,
    pub encoder_hidden: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
    pub output_dim: usize,
}

impl VaeArchitecture {
    /// The reference layout: m -> 64 -> (10, 10) -> 64 -> 204.
    pub fn for_measurements(m: usize) -> Self {
        Self {
            input_dim: m,
            encoder_hidden: 64,
            latent_dim: 10,
            decoder_hidden: 64,
            output_dim: 204,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("latent_dim", self.latent_dim),
            ("decoder_hidden", self.decoder_hidden),
            ("output_dim", self.output_dim),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One fully-connected layer; weights row-major [out][in].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    w: Vec<f64>,
    b: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Dense {
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            w: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            out.push(acc);
        }
    }

    /// Accumulates parameter gradients and returns grad wrt the input.
    fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut DenseGrad, d_in: &mut [f64]) {
        for v in d_in.iter_mut() {
            *v = 0.0;
        }
        for o in 0..self.out_dim {
            let g = d_out[o];
            grad.b[o] += g;
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                d_in[i] += row[i] * g;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct DenseGrad {
    w: Vec<f64>,
    b: Vec<f64>,
}

impl DenseGrad {
    fn zeros(layer: &Dense) -> Self {
        Self {
            w: vec![0.0; layer.w.len()],
            b: vec![0.0; layer.b.len()],
        }
    }

    fn scale(&mut self, factor: f64) {
        self.w.iter_mut().for_each(|v| *v *= factor);
        self.b.iter_mut().for_each(|v| *v *= factor);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    enc1: DenseGrad,
    enc_mu: DenseGrad,
    enc_lv: DenseGrad,
    dec1: DenseGrad,
    dec2: DenseGrad,
}

impl Gradients {
    fn zeros(model: &VaeModel) -> Self {
        Self {
            enc1: DenseGrad::zeros(&model.enc1),
            enc_mu: DenseGrad::zeros(&model.enc_mu),
            enc_lv: DenseGrad::zeros(&model.enc_lv),
            dec1: DenseGrad::zeros(&model.dec1),
            dec2: DenseGrad::zeros(&model.dec2),
        }
    }

    fn scale(&mut self, factor: f64) {
        self.enc1.scale(factor);
        self.enc_mu.scale(factor);
        self.enc_lv.scale(factor);
        self.dec1.scale(factor);
        self.dec2.scale(factor);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub lambda_l1: f64,
    pub beta_kl: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 60,
            optimizer: AdamConfig::default(),
            lambda_l1: 1e-5,
            beta_kl: 1.0,
            seed: 0,
        }
    }
}

/// Latent draw via the reparameterization z = mean + exp(log_var/2) * noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSample {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
    pub z: Vec<f64>,
    pub noise_draw: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub l1: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeModel {
    arch: VaeArchitecture,
    enc1: Dense,
    enc_mu: Dense,
    enc_lv: Dense,
    dec1: Dense,
    dec2: Dense,
    /// Design of the measurement matrix the model was trained against; the
    /// matrix itself is reproducible from it.
    bound_design: Option<MatrixDesign>,
    /// Per-epoch mean training loss.
    training_trace: Vec<f64>,
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
pub fn init_model(arch: &VaeArchitecture, seed: u64) -> Result<VaeModel> {
    arch.validate()?;
    let mut rng = seeded_rng(seed);
    Ok(VaeModel {
        arch: *arch,
        enc1: Dense::init(arch.input_dim, arch.encoder_hidden, &mut rng),
        enc_mu: Dense::init(arch.encoder_hidden, arch.latent_dim, &mut rng),
        enc_lv: Dense::init(arch.encoder_hidden, arch.latent_dim, &mut rng),
        dec1: Dense::init(arch.latent_dim, arch.decoder_hidden, &mut rng),
        dec2: Dense::init(arch.decoder_hidden, arch.output_dim, &mut rng),
        bound_design: None,
        training_trace: Vec::new(),
    })
}

impl VaeModel {
    pub fn arch(&self) -> &VaeArchitecture {
        &self.arch
    }

    pub fn bound_design(&self) -> Option<&MatrixDesign> {
        self.bound_design.as_ref()
    }

    pub fn training_trace(&self) -> &[f64] {
        &self.training_trace
    }

    pub fn params_finite(&self) -> bool {
        [&self.enc1, &self.enc_mu, &self.enc_lv, &self.dec1, &self.dec2]
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<VaeModel> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

fn check_finite(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

/// Encoder forward pass with an explicit noise draw.
pub fn encode_with_noise(model: &VaeModel, y: &[f64], noise_draw: Vec<f64>) -> Result<LatentSample> {
    check_finite("encoder input", y)?;
    if y.len() != model.arch.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.arch.input_dim,
            found: y.len(),
        });
    }
    if noise_draw.len() != model.arch.latent_dim {
        return Err(Error::DimensionMismatch {
            expected: model.arch.latent_dim,
            found: noise_draw.len(),
        });
    }
    let mut h1 = Vec::new();
    model.enc1.forward(y, &mut h1);
    h1.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut mean = Vec::new();
    model.enc_mu.forward(&h1, &mut mean);
    let mut log_var = Vec::new();
    model.enc_lv.forward(&h1, &mut log_var);
    log_var
        .iter_mut()
        .for_each(|v| *v = v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP));
    let z: Vec<f64> = mean
        .iter()
        .zip(&log_var)
        .zip(&noise_draw)
        .map(|((m, lv), e)| m + (lv / 2.0).exp() * e)
        .collect();
    Ok(LatentSample {
        mean,
        log_var,
        z,
        noise_draw,
    })
}

/// Encoder forward pass with a seeded standard-normal draw.
pub fn encode(model: &VaeModel, y: &[f64], seed: u64) -> Result<LatentSample> {
    let mut rng = seeded_rng(seed);
    let noise = standard_normal_vec(model.arch.latent_dim, &mut rng);
    encode_with_noise(model, y, noise)
}

fn standard_normal_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Decoder forward pass: G(z) in (-1, 1)^n.
pub fn decode(model: &VaeModel, z: &[f64]) -> Result<Vec<f64>> {
    check_finite("decoder input", z)?;
    if z.len() != model.arch.latent_dim {
        return Err(Error::DimensionMismatch {
            expected: model.arch.latent_dim,
            found: z.len(),
        });
    }
    let mut h2 = Vec::new();
    model.dec1.forward(z, &mut h2);
    h2.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut out = Vec::new();
    model.dec2.forward(&h2, &mut out);
    out.iter_mut().for_each(|v| *v = v.tanh());
    Ok(out)
}

fn kl_divergence(mean: &[f64], log_var: &[f64]) -> f64 {
    0.5 * mean
        .iter()
        .zip(log_var)
        .map(|(m, lv)| lv.exp() + m * m - 1.0 - lv)
        .sum::<f64>()
}

/// Loss of one sample: recon + lambda*l1 + beta*kl.
pub fn loss(
    model: &VaeModel,
    y_received: &[f64],
    matrix: &MeasurementMatrix,
    lambda_l1: f64,
    beta_kl: f64,
    sample: &LatentSample,
) -> Result<LossParts> {
    let g = decode(model, &sample.z)?;
    let ag = matrix.project_slice(&g)?;
    if ag.len() != y_received.len() {
        return Err(Error::DimensionMismatch {
            expected: ag.len(),
            found: y_received.len(),
        });
    }
    let recon: f64 = ag
        .iter()
        .zip(y_received)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let l1: f64 = g.iter().map(|v| v.abs()).sum();
    let kl = kl_divergence(&sample.mean, &sample.log_var);
    Ok(LossParts {
        total: recon + lambda_l1 * l1 + beta_kl * kl,
        recon,
        l1,
        kl,
    })
}

/// Full forward + manual backward for one sample. Returns the loss parts and
/// accumulates gradients (not averaged) into `grads`.
fn sample_grad(
    model: &VaeModel,
    y_received: &[f64],
    matrix: &MeasurementMatrix,
    lambda_l1: f64,
    beta_kl: f64,
    noise_draw: &[f64],
    grads: &mut Gradients,
) -> Result<LossParts> {
    let arch = &model.arch;

    // forward, caching pre-activations
    let mut h1_pre = Vec::new();
    model.enc1.forward(y_received, &mut h1_pre);
    let h1: Vec<f64> = h1_pre.iter().map(|v| v.max(0.0)).collect();
    let mut mean = Vec::new();
    model.enc_mu.forward(&h1, &mut mean);
    let mut lv_pre = Vec::new();
    model.enc_lv.forward(&h1, &mut lv_pre);
    let log_var: Vec<f64> = lv_pre
        .iter()
        .map(|v| v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP))
        .collect();
    let sigma: Vec<f64> = log_var.iter().map(|lv| (lv / 2.0).exp()).collect();
    let z: Vec<f64> = mean
        .iter()
        .zip(&sigma)
        .zip(noise_draw)
        .map(|((m, s), e)| m + s * e)
        .collect();
    let mut h2_pre = Vec::new();
    model.dec1.forward(&z, &mut h2_pre);
    let h2: Vec<f64> = h2_pre.iter().map(|v| v.max(0.0)).collect();
    let mut out_pre = Vec::new();
    model.dec2.forward(&h2, &mut out_pre);
    let g: Vec<f64> = out_pre.iter().map(|v| v.tanh()).collect();

    let ag = matrix.project_slice(&g)?;
    let residual: Vec<f64> = ag.iter().zip(y_received).map(|(a, b)| a - b).collect();
    let recon: f64 = residual.iter().map(|v| v * v).sum();
    let l1: f64 = g.iter().map(|v| v.abs()).sum();
    let kl = kl_divergence(&mean, &log_var);
    let parts = LossParts {
        total: recon + lambda_l1 * l1 + beta_kl * kl,
        recon,
        l1,
        kl,
    };

    // backward: d total / d g = 2*A^T r + lambda*sign(g)
    let at_r = matrix.project_transpose(&residual)?;
    let d_g: Vec<f64> = at_r
        .iter()
        .zip(&g)
        .map(|(a, gv)| 2.0 * a + lambda_l1 * sign(*gv))
        .collect();
    // through tanh
    let d_out_pre: Vec<f64> = d_g.iter().zip(&g).map(|(d, gv)| d * (1.0 - gv * gv)).collect();
    let mut d_h2 = vec![0.0; arch.decoder_hidden];
    model.dec2.backward(&h2, &d_out_pre, &mut grads.dec2, &mut d_h2);
    let d_h2_pre: Vec<f64> = d_h2
        .iter()
        .zip(&h2_pre)
        .map(|(d, p)| if *p > 0.0 { *d } else { 0.0 })
        .collect();
    let mut d_z = vec![0.0; arch.latent_dim];
    model.dec1.backward(&z, &d_h2_pre, &mut grads.dec1, &mut d_z);

    // reparameterization: z = mean + sigma*eps, sigma = exp(log_var/2)
    let d_mean: Vec<f64> = d_z
        .iter()
        .zip(&mean)
        .map(|(d, m)| d + beta_kl * m)
        .collect();
    let d_lv: Vec<f64> = d_z
        .iter()
        .zip(&sigma)
        .zip(noise_draw)
        .zip(&lv_pre)
        .zip(&log_var)
        .map(|((((d, s), e), pre), lv)| {
            // clamped log_var has zero gradient outside the window
            if (pre - lv).abs() > 0.0 {
                0.0
            } else {
                d * e * s * 0.5 + beta_kl * 0.5 * (lv.exp() - 1.0)
            }
        })
        .collect();

    let mut d_h1_a = vec![0.0; arch.encoder_hidden];
    model.enc_mu.backward(&h1, &d_mean, &mut grads.enc_mu, &mut d_h1_a);
    let mut d_h1_b = vec![0.0; arch.encoder_hidden];
    model.enc_lv.backward(&h1, &d_lv, &mut grads.enc_lv, &mut d_h1_b);
    let d_h1_pre: Vec<f64> = d_h1_a
        .iter()
        .zip(&d_h1_b)
        .zip(&h1_pre)
        .map(|((a, b), p)| if *p > 0.0 { a + b } else { 0.0 })
        .collect();
    let mut d_y = vec![0.0; arch.input_dim];
    model.enc1.backward(y_received, &d_h1_pre, &mut grads.enc1, &mut d_y);

    Ok(parts)
}

/// Compares the analytic parameter gradients of one sample against central
/// finite differences with the given step. Returns the worst per-layer
/// relative l2 error between the two gradients.
pub fn gradient_check(
    model: &VaeModel,
    y_received: &[f64],
    matrix: &MeasurementMatrix,
    lambda_l1: f64,
    beta_kl: f64,
    noise_draw: &[f64],
    step: f64,
) -> Result<f64> {
    let mut grads = Gradients::zeros(model);
    sample_grad(model, y_received, matrix, lambda_l1, beta_kl, noise_draw, &mut grads)?;

    let full_loss = |m: &VaeModel| -> Result<f64> {
        let sample = encode_with_noise(m, y_received, noise_draw.to_vec())?;
        Ok(loss(m, y_received, matrix, lambda_l1, beta_kl, &sample)?.total)
    };

    let analytic = [
        &grads.enc1,
        &grads.enc_mu,
        &grads.enc_lv,
        &grads.dec1,
        &grads.dec2,
    ];
    let mut worst = 0.0f64;
    for layer_idx in 0..5 {
        let (n_w, n_b) = {
            let l = [&model.enc1, &model.enc_mu, &model.enc_lv, &model.dec1, &model.dec2][layer_idx];
            (l.w.len(), l.b.len())
        };
        let mut num_sq = 0.0;
        let mut diff_sq = 0.0;
        for p in 0..n_w + n_b {
            let probe = |delta: f64| -> Result<f64> {
                let mut m = model.clone();
                let l = [
                    &mut m.enc1,
                    &mut m.enc_mu,
                    &mut m.enc_lv,
                    &mut m.dec1,
                    &mut m.dec2,
                ]
                .into_iter()
                .nth(layer_idx)
                .unwrap();
                if p < n_w {
                    l.w[p] += delta;
                } else {
                    l.b[p - n_w] += delta;
                }
                full_loss(&m)
            };
            let numeric = (probe(step)? - probe(-step)?) / (2.0 * step);
            let a = if p < n_w {
                analytic[layer_idx].w[p]
            } else {
                analytic[layer_idx].b[p - n_w]
            };
            num_sq += numeric * numeric;
            diff_sq += (numeric - a) * (numeric - a);
        }
        worst = worst.max((diff_sq / num_sq.max(1e-30)).sqrt());
    }
    Ok(worst)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Trains in place over the measurement pipeline: per epoch, shuffle frames,
/// project y = Ax, draw fresh channel noise, one adaptive-moment step per
/// batch on the mean loss. Returns the trained model with its trace.
pub fn train(
    mut model: VaeModel,
    dataset: &Dataset,
    matrix: &MeasurementMatrix,
    channel: &ChannelConfig,
    config: &TrainConfig,
) -> Result<VaeModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    if dataset.dim() != matrix.n() || model.arch.output_dim != matrix.n() {
        return Err(Error::DimensionMismatch {
            expected: matrix.n(),
            found: dataset.dim(),
        });
    }
    if model.arch.input_dim != matrix.m() {
        return Err(Error::DimensionMismatch {
            expected: matrix.m(),
            found: model.arch.input_dim,
        });
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
    }

    let normalize_l2 = matrix.design().scheme.l2_normalizes();
    // A is fixed: clean projections are computed once
    let clean: Vec<Vec<f64>> = dataset
        .frames()
        .iter()
        .map(|f| {
            let y = matrix.project(f)?;
            if normalize_l2 {
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroMeasurement);
                }
                Ok(y.into_iter().map(|v| v / norm).collect())
            } else {
                Ok(y)
            }
        })
        .collect::<Result<_>>()?;

    let mut shuffle_rng = derived_rng(config.seed, 1);
    let mut reparam_rng = derived_rng(config.seed, 2);
    let mut adam = [
        AdamState::new(model.enc1.w.len() + model.enc1.b.len()),
        AdamState::new(model.enc_mu.w.len() + model.enc_mu.b.len()),
        AdamState::new(model.enc_lv.w.len() + model.enc_lv.b.len()),
        AdamState::new(model.dec1.w.len() + model.dec1.b.len()),
        AdamState::new(model.dec2.w.len() + model.dec2.b.len()),
    ];
    let mut step = 0usize;
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut noise_rng = channel.rng(epoch as u64 + 1);
        let mut epoch_loss = 0.0;
        let mut epoch_frames = 0usize;
        for (batch_idx, batch) in indices.chunks(config.batch_size).enumerate() {
            let mut grads = Gradients::zeros(&model);
            let mut batch_loss = 0.0;
            for &frame in batch {
                let mut y = clean[frame].clone();
                if channel.sigma_n > 0.0 {
                    for v in y.iter_mut() {
                        let e: f64 = StandardNormal.sample(&mut noise_rng);
                        *v += channel.sigma_n * e;
                    }
                }
                let noise = standard_normal_vec(model.arch.latent_dim, &mut reparam_rng);
                let parts = sample_grad(
                    &model,
                    &y,
                    matrix,
                    config.lambda_l1,
                    config.beta_kl,
                    &noise,
                    &mut grads,
                )?;
                batch_loss += parts.total;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            step += 1;
            apply_adam(&mut model, &mut adam, &config.optimizer, step, &grads);
            epoch_loss += batch_loss;
            epoch_frames += batch.len();
        }
        trace.push(epoch_loss / epoch_frames as f64);
    }

    if !model.params_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            batch: 0,
        });
    }
    model.bound_design = Some(matrix.design().clone());
    model.training_trace = trace;
    Ok(model)
}

fn apply_adam(
    model: &mut VaeModel,
    states: &mut [AdamState; 5],
    config: &AdamConfig,
    step: usize,
    grads: &Gradients,
) {
    let layers: [(&mut Dense, &DenseGrad); 5] = [
        (&mut model.enc1, &grads.enc1),
        (&mut model.enc_mu, &grads.enc_mu),
        (&mut model.enc_lv, &grads.enc_lv),
        (&mut model.dec1, &grads.dec1),
        (&mut model.dec2, &grads.dec2),
    ];
    for ((layer, grad), state) in layers.into_iter().zip(states.iter_mut()) {
        let mut params: Vec<f64> = layer.w.iter().chain(&layer.b).copied().collect();
        let flat_grad: Vec<f64> = grad.w.iter().chain(&grad.b).copied().collect();
        state.update(config, step, &mut params, &flat_grad);
        let (w, b) = params.split_at(layer.w.len());
        layer.w.copy_from_slice(w);
        layer.b.copy_from_slice(b);
    }
}

/// Deterministic inference: decode the posterior mean (no latent sampling).
pub fn reconstruct(model: &VaeModel, y_received: &[f64]) -> Result<Vec<f64>> {
    let sample = encode_with_noise(model, y_received, vec![0.0; model.arch.latent_dim])?;
    decode(model, &sample.mean)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentOptResult {
    pub x_hat: Vec<f64>,
    pub best_objective: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LatentOptConfig {
    pub restarts: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub lambda_l1: f64,
    pub seed: u64,
}

impl Default for LatentOptConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            steps: 200,
            learning_rate: 0.05,
            lambda_l1: 1e-5,
            seed: 0,
        }
    }
}

/// Objective and gradient wrt z of ||A*G(z) - y||^2 + lambda*||G(z)||_1
/// (decoder frozen). `matrix` of None drops A: ||G(z) - target||^2, used to
/// approximate the representation error against a known frame.
fn latent_objective(
    model: &VaeModel,
    z: &[f64],
    target: &[f64],
    matrix: Option<&MeasurementMatrix>,
    lambda_l1: f64,
) -> Result<(f64, Vec<f64>)> {
    let arch = &model.arch;
    let mut h2_pre = Vec::new();
    model.dec1.forward(z, &mut h2_pre);
    let h2: Vec<f64> = h2_pre.iter().map(|v| v.max(0.0)).collect();
    let mut out_pre = Vec::new();
    model.dec2.forward(&h2, &mut out_pre);
    let g: Vec<f64> = out_pre.iter().map(|v| v.tanh()).collect();

    let (obj, mut d_g): (f64, Vec<f64>) = match matrix {
        Some(a) => {
            let ag = a.project_slice(&g)?;
            let r: Vec<f64> = ag.iter().zip(target).map(|(p, q)| p - q).collect();
            let obj = r.iter().map(|v| v * v).sum::<f64>()
                + lambda_l1 * g.iter().map(|v| v.abs()).sum::<f64>();
            let at_r = a.project_transpose(&r)?;
            let d_g = at_r
                .iter()
                .zip(&g)
                .map(|(v, gv)| 2.0 * v + lambda_l1 * sign(*gv))
                .collect();
            (obj, d_g)
        }
        None => {
            let r: Vec<f64> = g.iter().zip(target).map(|(p, q)| p - q).collect();
            let obj = r.iter().map(|v| v * v).sum::<f64>();
            let d_g = r.iter().map(|v| 2.0 * v).collect();
            (obj, d_g)
        }
    };

    for (d, gv) in d_g.iter_mut().zip(&g) {
        *d *= 1.0 - gv * gv;
    }
    let mut scratch = DenseGrad::zeros(&model.dec2);
    let mut d_h2 = vec![0.0; arch.decoder_hidden];
    model.dec2.backward(&h2, &d_g, &mut scratch, &mut d_h2);
    let d_h2_pre: Vec<f64> = d_h2
        .iter()
        .zip(&h2_pre)
        .map(|(d, p)| if *p > 0.0 { *d } else { 0.0 })
        .collect();
    let mut scratch1 = DenseGrad::zeros(&model.dec1);
    let mut d_z = vec![0.0; arch.latent_dim];
    model.dec1.backward(z, &d_h2_pre, &mut scratch1, &mut d_z);
    Ok((obj, d_z))
}

fn latent_descent(
    model: &VaeModel,
    target: &[f64],
    matrix: Option<&MeasurementMatrix>,
    config: &LatentOptConfig,
) -> Result<LatentOptResult> {
    if config.restarts == 0 {
        return Err(Error::InvalidConfig("restarts must be >= 1".into()));
    }
    let mut rng = seeded_rng(config.seed);
    let mut best: Option<LatentOptResult> = None;
    for _ in 0..config.restarts {
        let mut z = standard_normal_vec(model.arch.latent_dim, &mut rng);
        let (mut obj, mut grad) = latent_objective(model, &z, target, matrix, config.lambda_l1)?;
        let mut lr = config.learning_rate;
        for _ in 0..config.steps {
            // backtracking: halve the step until the objective does not increase
            let mut accepted = false;
            for _ in 0..30 {
                let candidate: Vec<f64> =
                    z.iter().zip(&grad).map(|(v, g)| v - lr * g).collect();
                let (new_obj, new_grad) =
                    latent_objective(model, &candidate, target, matrix, config.lambda_l1)?;
                if new_obj <= obj {
                    z = candidate;
                    obj = new_obj;
                    grad = new_grad;
                    accepted = true;
                    break;
                }
                lr /= 2.0;
            }
            if !accepted {
                break;
            }
        }
        let x_hat = decode(model, &z)?;
        if best.as_ref().map_or(true, |b| obj < b.best_objective) {
            best = Some(LatentOptResult {
                x_hat,
                best_objective: obj,
                z,
            });
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Recovery by gradient descent in latent space (the optimization mode):
/// min_z ||A*G(z) - y||^2 + lambda*||G(z)||_1 from seeded restarts.
pub fn reconstruct_via_latent_opt(
    model: &VaeModel,
    y_received: &[f64],
    matrix: &MeasurementMatrix,
    config: &LatentOptConfig,
) -> Result<LatentOptResult> {
    check_finite("latent-opt input", y_received)?;
    latent_descent(model, y_received, Some(matrix), config)
}

/// Best ||G(z) - x||_2 found by latent descent against a frame directly; an
/// approximation of the representation error min_z ||G(z) - x||_2.
pub fn representation_error(
    model: &VaeModel,
    x_star: &[f64],
    config: &LatentOptConfig,
) -> Result<f64> {
    let fit = latent_descent(model, x_star, None, config)?;
    Ok(fit
        .x_hat
        .iter()
        .zip(x_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Samples pairs of decoder-range points (G(z1), G(z2)) with z ~ N(0, I),
/// for S-REC certification over the generator's range.
pub fn decoder_pair_sampler(
    model: &VaeModel,
) -> impl FnMut(&mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) + '_ {
    move |rng| {
        let z1 = standard_normal_vec(model.arch.latent_dim, rng);
        let z2 = standard_normal_vec(model.arch.latent_dim, rng);
        (
            decode(model, &z1).expect("finite latent draw"),
            decode(model, &z2).expect("finite latent draw"),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostic {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Reconstruction-error bound check: ||x_hat - x*|| against
/// 6*representation_error + 3*||eta|| + 2*epsilon. A diagnostic only: the
/// representation error is approximated and the bound is probabilistic.
pub fn bound_diagnostic(
    x_star: &[f64],
    x_hat: &[f64],
    eta_norm: f64,
    representation_error: f64,
    epsilon: f64,
) -> BoundDiagnostic {
    let lhs = x_star
        .iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rhs = 6.0 * representation_error + 3.0 * eta_norm + 2.0 * epsilon;
    BoundDiagnostic {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

#[cfg(test)]
mod tests;

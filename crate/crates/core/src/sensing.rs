//! Measurement matrices, the linear projection, and the AWGN channel.
//!
//! The power-constrained scheme draws i.i.d. zero-mean Gaussian entries with
//! variance P_T / (n^2 d^2 (d*sigma_x + mu_x)^2), which keeps the transmitted
//! vector y = Ax within the per-channel-use power budget for all but a
//! Chebyshev-small fraction of frames. Violating frames are transmitted
//! unmodified and counted; clipping would break linearity of the sensing map.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, seeded_rng};
use crate::signals::{Signal, SourceStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixScheme {
    /// Power-constrained Gaussian design.
    Prop1,
    /// Gaussian entries with variance 1/m, no power constraint.
    UnitVarianceBaseline,
    /// Rows are standard basis vectors: transmit a subset of raw features.
    SensorSelection,
    /// The power-constrained matrix, with measurements l2-normalized before
    /// transmission (the receiver is not told the norm).
    Prop1L2Norm,
}

impl MatrixScheme {
    pub fn l2_normalizes(self) -> bool {
        matches!(self, MatrixScheme::Prop1L2Norm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDesign {
    pub scheme: MatrixScheme,
    pub m: usize,
    pub n: usize,
    /// Power budget per channel use.
    pub p_t: f64,
    /// Chebyshev parameter; coverage target is 1 - 1/d^2.
    pub d: f64,
    pub stats: SourceStats,
    pub seed: u64,
    /// Sensor-selection only.
    pub selected_indices: Option<Vec<usize>>,
}

impl MatrixDesign {
    pub fn gaussian(
        scheme: MatrixScheme,
        m: usize,
        n: usize,
        p_t: f64,
        d: f64,
        stats: SourceStats,
        seed: u64,
    ) -> Self {
        Self {
            scheme,
            m,
            n,
            p_t,
            d,
            stats,
            seed,
            selected_indices: None,
        }
    }

    pub fn sensor_selection(indices: Vec<usize>, n: usize, seed: u64) -> Self {
        Self {
            scheme: MatrixScheme::SensorSelection,
            m: indices.len(),
            n,
            p_t: 1.0,
            d: 1.0,
            stats: SourceStats {
                mu_x: 0.0,
                sigma_x: 0.0,
            },
            seed,
            selected_indices: Some(indices),
        }
    }

    /// Entry variance of the scheme's Gaussian draw.
    pub fn entry_variance(&self) -> Result<f64> {
        match self.scheme {
            MatrixScheme::Prop1 | MatrixScheme::Prop1L2Norm => {
                let scale = self.d * self.stats.sigma_x + self.stats.mu_x;
                if scale == 0.0 {
                    return Err(Error::InvalidDesign(
                        "d*sigma_x + mu_x = 0: entry variance undefined".into(),
                    ));
                }
                let n = self.n as f64;
                Ok(self.p_t / (n * n * self.d * self.d * scale * scale))
            }
            MatrixScheme::UnitVarianceBaseline => Ok(1.0 / self.m as f64),
            MatrixScheme::SensorSelection => Err(Error::InvalidDesign(
                "sensor selection rows are deterministic".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidDesign(format!(
                "need 1 <= m <= n (m = {}, n = {})",
                self.m, self.n
            )));
        }
        if self.p_t <= 0.0 || self.d <= 0.0 {
            return Err(Error::InvalidDesign("P_T and d must be positive".into()));
        }
        match self.scheme {
            MatrixScheme::SensorSelection => {
                let indices = self
                    .selected_indices
                    .as_ref()
                    .ok_or_else(|| Error::InvalidDesign("missing selected_indices".into()))?;
                if indices.len() != self.m {
                    return Err(Error::InvalidDesign("selected_indices length != m".into()));
                }
                let mut seen = vec![false; self.n];
                for &i in indices {
                    if i >= self.n {
                        return Err(Error::InvalidDesign(format!("index {i} out of range")));
                    }
                    if seen[i] {
                        return Err(Error::InvalidDesign(format!("duplicate index {i}")));
                    }
                    seen[i] = true;
                }
                Ok(())
            }
            _ => {
                self.entry_variance()?;
                Ok(())
            }
        }
    }
}

/// A realized m x n measurement matrix, reproducible from its design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMatrix {
    design: MatrixDesign,
    /// Row-major entries.
    entries: Vec<f64>,
}

/// Draws the matrix for a design. Identical designs give bit-identical
/// matrices.
pub fn build_matrix(design: &MatrixDesign) -> Result<MeasurementMatrix> {
    design.validate()?;
    let entries = match design.scheme {
        MatrixScheme::SensorSelection => {
            let indices = design.selected_indices.as_ref().unwrap();
            let mut entries = vec![0.0; design.m * design.n];
            for (row, &i) in indices.iter().enumerate() {
                entries[row * design.n + i] = 1.0;
            }
            entries
        }
        _ => {
            let sigma = design.entry_variance()?.sqrt();
            let normal = Normal::new(0.0, sigma).expect("finite variance");
            let mut rng = seeded_rng(design.seed);
            (0..design.m * design.n)
                .map(|_| normal.sample(&mut rng))
                .collect()
        }
    };
    Ok(MeasurementMatrix {
        design: design.clone(),
        entries,
    })
}

impl MeasurementMatrix {
    pub fn design(&self) -> &MatrixDesign {
        &self.design
    }

    pub fn m(&self) -> usize {
        self.design.m
    }

    pub fn n(&self) -> usize {
        self.design.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.design.n..(i + 1) * self.design.n]
    }

    /// Column j copied out (the storage is row-major).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.design.m)
            .map(|i| self.entries[i * self.design.n + j])
            .collect()
    }

    /// y = A x.
    pub fn project(&self, x: &Signal) -> Result<Vec<f64>> {
        self.project_slice(x.values())
    }

    pub fn project_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.design.n {
            return Err(Error::DimensionMismatch {
                expected: self.design.n,
                found: x.len(),
            });
        }
        Ok((0..self.design.m)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect())
    }

    /// A^T v.
    pub fn project_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.design.m {
            return Err(Error::DimensionMismatch {
                expected: self.design.m,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.design.n];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
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

    pub fn load(path: impl AsRef<Path>) -> Result<MeasurementMatrix> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Noise standard deviation per measurement.
    pub sigma_n: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(sigma_n: f64, seed: u64) -> Result<Self> {
        if sigma_n < 0.0 || !sigma_n.is_finite() {
            return Err(Error::InvalidConfig("sigma_n must be finite and >= 0".into()));
        }
        Ok(Self { sigma_n, seed })
    }

    /// Independent noise stream for a sub-run (one epoch, one frame batch...).
    pub fn rng(&self, stream: u64) -> rand_chacha::ChaCha8Rng {
        derived_rng(self.seed, stream)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyMeasurement {
    pub y_clean: Vec<f64>,
    pub y_received: Vec<f64>,
    pub sigma_n: f64,
}

/// Sends y through the AWGN channel. With `normalize_l2`, y is first divided
/// by its l2 norm; the norm is not conveyed to the receiver.
pub fn apply_channel(
    y: &[f64],
    channel: &ChannelConfig,
    normalize_l2: bool,
    rng: &mut impl Rng,
) -> Result<NoisyMeasurement> {
    if y.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let y_clean: Vec<f64> = if normalize_l2 {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroMeasurement);
        }
        y.iter().map(|v| v / norm).collect()
    } else {
        y.to_vec()
    };
    let y_received = if channel.sigma_n == 0.0 {
        y_clean.clone()
    } else {
        let normal = Normal::new(0.0, channel.sigma_n).expect("finite sigma");
        y_clean.iter().map(|v| v + normal.sample(rng)).collect()
    };
    Ok(NoisyMeasurement {
        y_clean,
        y_received,
        sigma_n: channel.sigma_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCheck {
    pub satisfied: bool,
    pub ratio: f64,
}

///// Power-constraint variant: the printed form uses the l2 norm itself; the
/// squared form treats (1/m)||y||^2 as average power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerConstraint {
    NormOverM,
    SquaredNormOverM,
}

/// Checks (1/m)||y||_2 <= P_T (or the squared variant).
pub fn check_power(y: &[f64], p_t: f64, variant: PowerConstraint) -> PowerCheck {
    let m = y.len() as f64;
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lhs = match variant {
        PowerConstraint::NormOverM => norm / m,
        PowerConstraint::SquaredNormOverM => norm * norm / m,
    };
    let ratio = lhs / p_t;
    PowerCheck {
        satisfied: ratio <= 1.0,
        ratio,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SRecCertificate {
    /// Largest gamma such that every sampled pair satisfies
    /// ||A(x1 - x2)|| >= gamma*||x1 - x2|| - kappa.
    pub gamma_hat: f64,
    pub kappa: f64,
    pub pairs_tested: usize,
    /// Violation rate at (gamma_hat, kappa): zero by construction.
    pub violation_rate: f64,
}

const DEGENERATE_PAIR_NORM: f64 = 1e-9;

/// Monte-Carlo S-REC certification over pairs produced by `sampler`.
/// REC (Definition 1) is the kappa = 0 case with a k-sparse sampler.
pub fn certify_srec<F>(
    matrix: &MeasurementMatrix,
    mut sampler: F,
    kappa: f64,
    pairs: usize,
    seed: u64,
) -> Result<SRecCertificate>
where
    F: FnMut(&mut rand_chacha::ChaCha8Rng) -> (Vec<f64>, Vec<f64>),
{
    if pairs == 0 {
        return Err(Error::InvalidConfig("pairs must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut gamma_hat = f64::INFINITY;
    let mut tested = 0usize;
    for _ in 0..pairs {
        let (x1, x2) = sampler(&mut rng);
        let diff: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - b).collect();
        let diff_norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if diff_norm < DEGENERATE_PAIR_NORM {
            continue;
        }
        let proj = matrix.project_slice(&diff)?;
        let proj_norm = proj.iter().map(|v| v * v).sum::<f64>().sqrt();
        gamma_hat = gamma_hat.min((proj_norm + kappa) / diff_norm);
        tested += 1;
    }
    if tested == 0 {
        return Err(Error::DegeneratePairs);
    }
    Ok(SRecCertificate {
        gamma_hat,
        kappa,
        pairs_tested: tested,
        violation_rate: 0.0,
    })
}

/// Samples pairs of k-sparse vectors with unit-scale Gaussian entries, for
/// REC-style certification.
pub fn sparse_pair_sampler(
    n: usize,
    k: usize,
) -> impl FnMut(&mut rand_chacha::ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    move |rng| {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut x = vec![0.0; n];
            for _ in 0..k {
                let idx = rng.gen_range(0..n);
                x[idx] = normal.sample(rng);
            }
            x
        };
        (draw(rng), draw(rng))
    }
}

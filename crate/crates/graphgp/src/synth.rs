//! Synthetic graph-signal generators used by the examples and the
//! recovery tests: white noise pushed through a known spectral filter,
//! optionally with correlated inputs drawn from an inverse-Wishart prior.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::{eigendecompose, laplacian, Graph, GraphError, LaplacianVariant};
use crate::kernels::{KernelError, PolynomialGraphFilter};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need at least one signal")]
    EmptyBatch,
    #[error("signal-to-noise ratio must be finite")]
    InvalidSnr,
    #[error("generated signals have zero power, cannot calibrate noise")]
    ZeroPower,
    #[error("input covariance sampling failed repeatedly")]
    CovarianceSampling,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A named polynomial filter acting on the scaled Laplacian spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFilter {
    name: String,
    filter: PolynomialGraphFilter,
}

impl GroundTruthFilter {
    /// Degree-4 Taylor expansion of `exp(-0.75 lambda)` around 0, a smooth
    /// low-pass response on [0, 1].
    pub fn low_pass_taylor() -> Self {
        Self {
            name: "low-pass".into(),
            filter: PolynomialGraphFilter::new(vec![1.0, -1.5, 1.125, -0.5625, 0.2109375])
                .unwrap(),
        }
    }

    /// Cubic that vanishes at both ends of [0, 1] and peaks in the interior.
    pub fn band_pass() -> Self {
        Self {
            name: "band-pass".into(),
            filter: PolynomialGraphFilter::new(vec![0.0, 1.0, 4.0, 1.0, -6.0]).unwrap(),
        }
    }

    pub fn custom(name: &str, coefficients: Vec<f64>) -> Result<Self, SynthError> {
        Ok(Self {
            name: name.into(),
            filter: PolynomialGraphFilter::new(coefficients)?,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn filter(&self) -> &PolynomialGraphFilter {
        &self.filter
    }

    pub fn coefficients(&self) -> &[f64] {
        self.filter.coefficients()
    }
}

/// Generated signals plus everything needed to reproduce or evaluate them.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    inputs: DMatrix<f64>,
    signals: DMatrix<f64>,
    clean_signals: DMatrix<f64>,
    filter: GroundTruthFilter,
    snr_db: Option<f64>,
    noise_variance: f64,
    seed: u64,
    input_covariance: Option<DMatrix<f64>>,
}

impl SyntheticDataset {
    /// Index inputs (row i is the scalar i); signals are one graph signal
    /// per row.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn signals(&self) -> &DMatrix<f64> {
        &self.signals
    }

    pub fn clean_signals(&self) -> &DMatrix<f64> {
        &self.clean_signals
    }

    pub fn filter(&self) -> &GroundTruthFilter {
        &self.filter
    }

    pub fn snr_db(&self) -> Option<f64> {
        self.snr_db
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Present only for the correlated-input generator.
    pub fn input_covariance(&self) -> Option<&DMatrix<f64>> {
        self.input_covariance.as_ref()
    }
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Adds white noise calibrated against the batch's mean squared value:
/// `noise variance = power / 10^(snr_db / 10)`. Returns the noisy signals
/// and the variance used.
pub fn add_noise_snr(
    signals: &DMatrix<f64>,
    snr_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, f64), SynthError> {
    if !snr_db.is_finite() {
        return Err(SynthError::InvalidSnr);
    }
    let total = (signals.nrows() * signals.ncols()) as f64;
    if total == 0.0 {
        return Err(SynthError::EmptyBatch);
    }
    let power = signals.iter().map(|v| v * v).sum::<f64>() / total;
    if power <= 0.0 {
        return Err(SynthError::ZeroPower);
    }
    let noise_variance = power / 10f64.powf(snr_db / 10.0);
    let sd = noise_variance.sqrt();
    let noisy = signals.map(|v| v + sd * rng.sample::<f64, _>(StandardNormal));
    Ok((noisy, noise_variance))
}

/// Independent signals: each row is white noise filtered through the ground
/// truth response of the scaled Laplacian, plus SNR-calibrated noise.
pub fn generate_filtered_signals(
    graph: &Graph,
    truth: &GroundTruthFilter,
    num_signals: usize,
    snr_db: f64,
    seed: u64,
) -> Result<SyntheticDataset, SynthError> {
    if num_signals == 0 {
        return Err(SynthError::EmptyBatch);
    }
    let sd = eigendecompose(&laplacian(graph, LaplacianVariant::Scaled)?, LaplacianVariant::Scaled)?;
    let h = truth.filter().filter_matrix(&sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = standard_normal_matrix(&mut rng, num_signals, graph.num_nodes());
    // h is symmetric, so filtering each row is one product with h
    let clean = &z * &h;
    let (signals, noise_variance) = add_noise_snr(&clean, snr_db, &mut rng)?;
    let inputs = DMatrix::from_fn(num_signals, 1, |i, _| i as f64);
    Ok(SyntheticDataset {
        inputs,
        signals,
        clean_signals: clean,
        filter: truth.clone(),
        snr_db: Some(snr_db),
        noise_variance,
        seed,
        input_covariance: None,
    })
}

const WISHART_RETRIES: usize = 50;

/// Correlated signals: an N x N input covariance `C` is drawn from an
/// inverse-Wishart prior (identity scale, N + 2 degrees of freedom), rows of
/// `chol(C) Z` are filtered through the ground truth, and noise is added at
/// the requested ratio (None leaves the signals clean).
pub fn generate_wishart_dataset(
    graph: &Graph,
    truth: &GroundTruthFilter,
    num_signals: usize,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<SyntheticDataset, SynthError> {
    if num_signals == 0 {
        return Err(SynthError::EmptyBatch);
    }
    if let Some(snr) = snr_db {
        if !snr.is_finite() {
            return Err(SynthError::InvalidSnr);
        }
    }
    let sd = eigendecompose(&laplacian(graph, LaplacianVariant::Scaled)?, LaplacianVariant::Scaled)?;
    let h = truth.filter().filter_matrix(&sd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n = num_signals;
    let df = n + 2;
    let mut chol_c = None;
    let mut covariance = DMatrix::zeros(n, n);
    for _ in 0..WISHART_RETRIES {
        let mut w = DMatrix::zeros(n, n);
        for _ in 0..df {
            let z = standard_normal_matrix(&mut rng, n, 1);
            w += &z * z.transpose();
        }
        let Some(w_chol) = w.clone().cholesky() else {
            continue;
        };
        let c = w_chol.inverse();
        if let Some(c_chol) = c.clone().cholesky() {
            covariance = c;
            chol_c = Some(c_chol.l());
            break;
        }
    }
    let l = chol_c.ok_or(SynthError::CovarianceSampling)?;

    let z = standard_normal_matrix(&mut rng, n, graph.num_nodes());
    let clean = l * z * &h;
    let (signals, noise_variance) = match snr_db {
        Some(snr) => add_noise_snr(&clean, snr, &mut rng)?,
        None => (clean.clone(), 0.0),
    };
    let inputs = DMatrix::from_fn(n, 1, |i, _| i as f64);
    Ok(SyntheticDataset {
        inputs,
        signals,
        clean_signals: clean,
        filter: truth.clone(),
        snr_db,
        noise_variance,
        seed,
        input_covariance: Some(covariance),
    })
}

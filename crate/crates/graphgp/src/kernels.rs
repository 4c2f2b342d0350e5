//! Kernels: the polynomial graph filter, the squared-exponential input
//! kernel, baseline kernels on graphs, and the Vandermonde constraint matrix.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::graph::{eigendecompose, laplacian, Graph, GraphError, LaplacianVariant,
    SpectralDecomposition};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("filter matrix needs the scaled Laplacian variant, got {0}")]
    VariantMismatch(&'static str),
    #[error("filter spectrum is non-positive over [0,1]; cannot scale")]
    DegenerateFilter,
    #[error("p-step random walk needs alpha >= lambda_max(normalized L) = {lambda_max}, got {alpha}")]
    AlphaTooSmall { alpha: f64, lambda_max: f64 },
    #[error("kernel kind {0} takes no alpha parameter")]
    UnexpectedAlpha(&'static str),
    #[error("kernel kind {0} requires an alpha parameter")]
    MissingAlpha(&'static str),
    #[error("input dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Polynomial spectral filter `g(lambda) = beta_0 + beta_1 lambda + ... +
/// beta_P lambda^P`, equivalently `B = sum_i beta_i L_S^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialGraphFilter {
    coefficients: Vec<f64>,
}

impl PolynomialGraphFilter {
    pub fn new(coefficients: Vec<f64>) -> Result<Self, KernelError> {
        if coefficients.is_empty() {
            return Err(KernelError::InvalidParameter(
                "filter needs at least one coefficient".into(),
            ));
        }
        Ok(Self { coefficients })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Horner evaluation of `g` at one point.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * lambda + c)
    }

    pub fn evaluate_spectrum(&self, lambdas: &[f64]) -> Vec<f64> {
        lambdas.iter().map(|&l| self.evaluate(l)).collect()
    }

    /// `g(lambda_i) >= -1e-8` at every eigenvalue of `sd`.
    pub fn is_feasible(&self, sd: &SpectralDecomposition) -> bool {
        sd.eigenvalues().iter().all(|&l| self.evaluate(l) >= -1e-8)
    }

    /// `B = U g(Lambda) U^T` on the scaled Laplacian decomposition.
    pub fn filter_matrix(&self, sd: &SpectralDecomposition) -> Result<DMatrix<f64>, KernelError> {
        if sd.variant() != LaplacianVariant::Scaled {
            return Err(KernelError::VariantMismatch(sd.variant().as_str()));
        }
        let g = DVector::from_vec(self.evaluate_spectrum(sd.eigenvalues().as_slice()));
        let u = sd.eigenvectors();
        let b = u * DMatrix::from_diagonal(&g) * u.transpose();
        // exact symmetry for downstream validation
        Ok(0.5 * (&b + b.transpose()))
    }

    /// Divide by `c = max_{[0,1]} g` so the scaled spectrum peaks at 1.
    ///
    /// The maximum comes from a dense 1e-4 grid plus endpoints; errors if the
    /// maximum is non-positive.
    pub fn scale(&self) -> Result<(Self, f64), KernelError> {
        let c = self.max_on_unit_interval();
        if c <= 0.0 {
            return Err(KernelError::DegenerateFilter);
        }
        let scaled = Self {
            coefficients: self.coefficients.iter().map(|b| b / c).collect(),
        };
        Ok((scaled, c))
    }

    /// Maximum of `g` over `[0,1]` on a dense grid (step 1e-4).
    pub fn max_on_unit_interval(&self) -> f64 {
        let steps = 10_000usize;
        let mut max = f64::NEG_INFINITY;
        for i in 0..=steps {
            let x = i as f64 / steps as f64;
            max = max.max(self.evaluate(x));
        }
        max
    }
}

/// Vandermonde matrix of eigenvalues: row i = `(1, l_i, l_i^2, ..., l_i^P)`.
pub fn vandermonde(lambdas: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(lambdas.len(), degree + 1, |i, j| lambdas[i].powi(j as i32))
}

/// Squared-exponential input kernel
/// `K_ij = variance * exp(-||x_i - x_j||^2 / (2 * lengthscale))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputKernelConfig {
    pub lengthscale: f64,
    pub variance: f64,
}

impl InputKernelConfig {
    pub fn new(lengthscale: f64, variance: f64) -> Result<Self, KernelError> {
        if lengthscale <= 0.0 || !lengthscale.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "lengthscale must be positive, got {lengthscale}"
            )));
        }
        if variance <= 0.0 || !variance.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "variance must be positive, got {variance}"
            )));
        }
        Ok(Self {
            lengthscale,
            variance,
        })
    }
}

/// Cross kernel matrix between coordinate rows of `x` and `x2`.
pub fn input_kernel_matrix(
    cfg: &InputKernelConfig,
    x: &DMatrix<f64>,
    x2: &DMatrix<f64>,
) -> Result<DMatrix<f64>, KernelError> {
    if x.ncols() != x2.ncols() {
        return Err(KernelError::DimensionMismatch {
            left: x.ncols(),
            right: x2.ncols(),
        });
    }
    Ok(DMatrix::from_fn(x.nrows(), x2.nrows(), |i, j| {
        let d2 = (x.row(i) - x2.row(j)).norm_squared();
        cfg.variance * (-d2 / (2.0 * cfg.lengthscale)).exp()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// `B = I`.
    Standard,
    /// `B = (I + alpha L)^{-1}`.
    GlobalFiltering,
    /// `B = (I + alpha D)^{-1} (I + alpha A)`.
    LocalAveraging,
    /// `BB^T = pseudo-inverse of L`.
    LaplacianPseudoinverse,
    /// `BB^T = (I + alpha L~)^{-1}`.
    RegularizedLaplacian,
    /// `BB^T = exp(-alpha/2 L~)`.
    Diffusion,
    /// `BB^T = (alpha I - L~)^p`.
    PStepRandomWalk { p: usize },
    /// `BB^T = cos(L~ pi / 4)`.
    Cosine,
}

impl BaselineKind {
    pub fn takes_alpha(&self) -> bool {
        matches!(
            self,
            BaselineKind::GlobalFiltering
                | BaselineKind::LocalAveraging
                | BaselineKind::RegularizedLaplacian
                | BaselineKind::Diffusion
                | BaselineKind::PStepRandomWalk { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Standard => "standard",
            BaselineKind::GlobalFiltering => "global-filtering",
            BaselineKind::LocalAveraging => "local-averaging",
            BaselineKind::LaplacianPseudoinverse => "laplacian-pseudoinverse",
            BaselineKind::RegularizedLaplacian => "regularized-laplacian",
            BaselineKind::Diffusion => "diffusion",
            BaselineKind::PStepRandomWalk { .. } => "p-step-random-walk",
            BaselineKind::Cosine => "cosine",
        }
    }
}

/// A baseline kernel on graphs with its scalar hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineGraphKernel {
    pub kind: BaselineKind,
    pub alpha: Option<f64>,
}

impl BaselineGraphKernel {
    /// Validates `alpha` against the kind and graph. The p-step walk needs
    /// `alpha >= lambda_max(normalized L)` to stay PSD.
    pub fn new(kind: BaselineKind, alpha: Option<f64>, g: &Graph) -> Result<Self, KernelError> {
        match (kind.takes_alpha(), alpha) {
            (true, None) => return Err(KernelError::MissingAlpha(kind.name())),
            (false, Some(_)) => return Err(KernelError::UnexpectedAlpha(kind.name())),
            (true, Some(a)) if !(a > 0.0 && a.is_finite()) => {
                return Err(KernelError::InvalidParameter(format!(
                    "alpha must be positive, got {a}"
                )))
            }
            _ => {}
        }
        if let BaselineKind::PStepRandomWalk { p } = kind {
            if p == 0 {
                return Err(KernelError::InvalidParameter("p must be >= 1".into()));
            }
            let lambda_max = normalized_lambda_max(g)?;
            let a = alpha.unwrap();
            if a < lambda_max {
                return Err(KernelError::AlphaTooSmall { alpha: a, lambda_max });
            }
        }
        Ok(Self { kind, alpha })
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            kind: self.kind,
            alpha: Some(alpha),
        }
    }
}

pub fn normalized_lambda_max(g: &Graph) -> Result<f64, KernelError> {
    let lt = laplacian(g, LaplacianVariant::Normalized)?;
    let sd = eigendecompose(&lt, LaplacianVariant::Normalized)?;
    Ok(sd.eigenvalues()[g.num_nodes() - 1])
}

fn spectral_apply(
    l: &DMatrix<f64>,
    variant: LaplacianVariant,
    f: impl Fn(f64) -> f64,
) -> Result<DMatrix<f64>, KernelError> {
    let sd = eigendecompose(l, variant)?;
    let vals = DVector::from_iterator(
        sd.num_nodes(),
        sd.eigenvalues().iter().map(|&x| f(x)),
    );
    let u = sd.eigenvectors();
    let m = u * DMatrix::from_diagonal(&vals) * u.transpose();
    Ok(0.5 * (&m + m.transpose()))
}

/// Output-space Gram `BB^T` for a baseline kernel.
///
/// Kinds defined through `B` (standard, global filtering, local averaging)
/// return the product `BB^T`; the rest apply their transfer function to the
/// relevant Laplacian spectrally.
pub fn baseline_output_gram(
    b: &BaselineGraphKernel,
    g: &Graph,
) -> Result<DMatrix<f64>, KernelError> {
    let m = g.num_nodes();
    match b.kind {
        BaselineKind::Standard => Ok(DMatrix::identity(m, m)),
        BaselineKind::GlobalFiltering => {
            let alpha = b.alpha.unwrap();
            let l = laplacian(g, LaplacianVariant::Combinatorial)?;
            spectral_apply(&l, LaplacianVariant::Combinatorial, |x| {
                1.0 / ((1.0 + alpha * x) * (1.0 + alpha * x))
            })
        }
        BaselineKind::LocalAveraging => {
            let bm = local_averaging_b(g, b.alpha.unwrap());
            let gram = &bm * bm.transpose();
            Ok(0.5 * (&gram + gram.transpose()))
        }
        BaselineKind::LaplacianPseudoinverse => {
            let l = laplacian(g, LaplacianVariant::Combinatorial)?;
            let sd = eigendecompose(&l, LaplacianVariant::Combinatorial)?;
            let lambda_max = sd.eigenvalues()[m - 1];
            let tol = 1e-10 * lambda_max;
            spectral_apply(&l, LaplacianVariant::Combinatorial, |x| {
                if x > tol {
                    1.0 / x
                } else {
                    0.0
                }
            })
        }
        BaselineKind::RegularizedLaplacian => {
            let alpha = b.alpha.unwrap();
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| 1.0 / (1.0 + alpha * x))
        }
        BaselineKind::Diffusion => {
            let alpha = b.alpha.unwrap();
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| (-alpha / 2.0 * x).exp())
        }
        BaselineKind::PStepRandomWalk { p } => {
            let alpha = b.alpha.unwrap();
            let lambda_max = normalized_lambda_max(g)?;
            if alpha < lambda_max {
                return Err(KernelError::AlphaTooSmall { alpha, lambda_max });
            }
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| {
                (alpha - x).powi(p as i32)
            })
        }
        BaselineKind::Cosine => {
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| {
                (x * std::f64::consts::FRAC_PI_4).cos()
            })
        }
    }
}

/// `d(BB^T)/d alpha` for baselines with an alpha parameter; `None` otherwise.
pub fn baseline_gram_alpha_gradient(
    b: &BaselineGraphKernel,
    g: &Graph,
) -> Result<Option<DMatrix<f64>>, KernelError> {
    let alpha = match b.alpha {
        Some(a) if b.kind.takes_alpha() => a,
        _ => return Ok(None),
    };
    let grad = match b.kind {
        BaselineKind::GlobalFiltering => {
            let l = laplacian(g, LaplacianVariant::Combinatorial)?;
            spectral_apply(&l, LaplacianVariant::Combinatorial, |x| {
                -2.0 * x / (1.0 + alpha * x).powi(3)
            })?
        }
        BaselineKind::LocalAveraging => {
            // product rule on B = (I + aD)^{-1} (I + aA)
            let m = g.num_nodes();
            let eye = DMatrix::<f64>::identity(m, m);
            let d = DMatrix::from_diagonal(&g.degrees());
            let a = g.adjacency();
            let inv = DMatrix::from_diagonal(&DVector::from_iterator(
                m,
                g.degrees().iter().map(|&deg| 1.0 / (1.0 + alpha * deg)),
            ));
            let bm = &inv * (&eye + alpha * a);
            let db = -&inv * &d * &inv * (&eye + alpha * a) + &inv * a;
            let grad = &db * bm.transpose() + &bm * db.transpose();
            0.5 * (&grad + grad.transpose())
        }
        BaselineKind::RegularizedLaplacian => {
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| {
                -x / (1.0 + alpha * x).powi(2)
            })?
        }
        BaselineKind::Diffusion => {
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| {
                -x / 2.0 * (-alpha / 2.0 * x).exp()
            })?
        }
        BaselineKind::PStepRandomWalk { p } => {
            let lt = laplacian(g, LaplacianVariant::Normalized)?;
            spectral_apply(&lt, LaplacianVariant::Normalized, |x| {
                p as f64 * (alpha - x).powi(p as i32 - 1)
            })?
        }
        _ => return Ok(None),
    };
    Ok(Some(grad))
}

fn local_averaging_b(g: &Graph, alpha: f64) -> DMatrix<f64> {
    let m = g.num_nodes();
    let eye = DMatrix::<f64>::identity(m, m);
    let inv = DMatrix::from_diagonal(&DVector::from_iterator(
        m,
        g.degrees().iter().map(|&deg| 1.0 / (1.0 + alpha * deg)),
    ));
    inv * (eye + alpha * g.adjacency())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;
    use crate::graph::RandomGraphKind;
    use crate::linalg::{max_abs, sym_eigh};
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scaled_sd(g: &Graph) -> SpectralDecomposition {
        let l = laplacian(g, LaplacianVariant::Scaled).unwrap();
        eigendecompose(&l, LaplacianVariant::Scaled).unwrap()
    }

    fn path2() -> Graph {
        Graph::from_adjacency(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap()
    }

    #[test]
    fn filter_matrix_identity_and_laplacian() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 10 }, 1).unwrap();
        let sd = scaled_sd(&g);
        let ls = laplacian(&g, LaplacianVariant::Scaled).unwrap();

        let ident = PolynomialGraphFilter::new(vec![1.0]).unwrap();
        let b = ident.filter_matrix(&sd).unwrap();
        assert!(max_abs(&(b - DMatrix::identity(10, 10))) < 1e-10);

        let lin = PolynomialGraphFilter::new(vec![0.0, 1.0]).unwrap();
        let b = lin.filter_matrix(&sd).unwrap();
        assert!(max_abs(&(b - ls)) < 1e-8);
    }

    #[test]
    fn filter_matrix_matches_power_sum_for_lowpass_taylor() {
        // first 5 Taylor terms of exp(-1.5 lambda)
        let beta = vec![1.0, -1.5, 1.125, -0.5625, 0.2109375];
        let g = random_graph(RandomGraphKind::Sensor { nodes: 30 }, 13).unwrap();
        let sd = scaled_sd(&g);
        let ls = laplacian(&g, LaplacianVariant::Scaled).unwrap();
        let f = PolynomialGraphFilter::new(beta.clone()).unwrap();
        let b = f.filter_matrix(&sd).unwrap();

        // matrix-power oracle
        let mut expected = DMatrix::zeros(30, 30);
        let mut power = DMatrix::identity(30, 30);
        for c in &beta {
            expected += *c * &power;
            power = &power * &ls;
        }
        assert!(max_abs(&(b - expected)) <= 1e-8);
    }

    #[test]
    fn filter_matrix_rejects_unscaled_variant() {
        let g = path2();
        let l = laplacian(&g, LaplacianVariant::Combinatorial).unwrap();
        let sd = eigendecompose(&l, LaplacianVariant::Combinatorial).unwrap();
        let f = PolynomialGraphFilter::new(vec![1.0]).unwrap();
        assert!(matches!(
            f.filter_matrix(&sd),
            Err(KernelError::VariantMismatch(_))
        ));
    }

    #[test]
    fn evaluate_spectrum_cases() {
        let f = PolynomialGraphFilter::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.evaluate(0.7), 1.0);
        let band = PolynomialGraphFilter::new(vec![0.0, 1.0, 4.0, 1.0, -6.0]).unwrap();
        assert!(band.evaluate(1.0).abs() < 1e-12);
        // 0.5 + 4*0.25 + 0.125 - 6*0.0625
        assert!((band.evaluate(0.5) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn scale_polynomial_cases() {
        let constant = PolynomialGraphFilter::new(vec![2.0]).unwrap();
        let (scaled, c) = constant.scale().unwrap();
        assert_eq!(c, 2.0);
        assert_eq!(scaled.coefficients(), &[1.0]);

        let linear = PolynomialGraphFilter::new(vec![0.0, 1.0]).unwrap();
        let (scaled, c) = linear.scale().unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(scaled.coefficients(), &[0.0, 1.0]);

        let band = PolynomialGraphFilter::new(vec![0.0, 1.0, 4.0, 1.0, -6.0]).unwrap();
        let (scaled, c) = band.scale().unwrap();
        // dense-grid maximization oracle at finer resolution
        let mut oracle = f64::NEG_INFINITY;
        for i in 0..=100_000 {
            oracle = oracle.max(band.evaluate(i as f64 / 100_000.0));
        }
        assert!((c - oracle).abs() < 1e-4);
        assert!((scaled.max_on_unit_interval() - 1.0).abs() <= 1e-3);

        let negative = PolynomialGraphFilter::new(vec![-1.0]).unwrap();
        assert!(matches!(negative.scale(), Err(KernelError::DegenerateFilter)));
    }

    #[test]
    fn input_kernel_values_and_psd() {
        let cfg = InputKernelConfig::new(2.0, 1.0).unwrap();
        let x = dmatrix![0.0; 2.0]; // squared distance 4 = 2l
        let k = input_kernel_matrix(&cfg, &x, &x).unwrap();
        assert!((k[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((k[(0, 1)] - (-1.0f64).exp()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DMatrix::from_fn(6, 3, |_, _| rng.gen::<f64>());
        let cfg = InputKernelConfig::new(0.7, 1.3).unwrap();
        let k = input_kernel_matrix(&cfg, &x, &x).unwrap();
        let (vals, _) = sym_eigh(&k).unwrap();
        assert!(vals[0] >= -1e-10);

        assert!(InputKernelConfig::new(0.0, 1.0).is_err());
        assert!(InputKernelConfig::new(1.0, -1.0).is_err());
    }

    #[test]
    fn vandermonde_rows() {
        let bv = vandermonde(&[0.0, 1.0], 2);
        assert_eq!(bv, dmatrix![1.0, 0.0, 0.0; 1.0, 1.0, 1.0]);
        let bv = vandermonde(&[0.5], 3);
        assert_eq!(bv, dmatrix![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn vandermonde_times_beta_evaluates_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let degree = rng.gen_range(0..=5);
            let beta: Vec<f64> = (0..=degree).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let lambdas: Vec<f64> = (0..7).map(|_| rng.gen::<f64>()).collect();
            let f = PolynomialGraphFilter::new(beta.clone()).unwrap();
            let bv = vandermonde(&lambdas, degree);
            let via_matrix = bv * DVector::from_vec(beta);
            let direct = f.evaluate_spectrum(&lambdas);
            for i in 0..lambdas.len() {
                assert!((via_matrix[i] - direct[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feasibility_matches_vandermonde_constraint() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 12 }, 6).unwrap();
        let sd = scaled_sd(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let beta: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let f = PolynomialGraphFilter::new(beta.clone()).unwrap();
            let bv = vandermonde(sd.eigenvalues().as_slice(), 3);
            let vals = &bv * DVector::from_vec(beta);
            let constraint_ok = vals.iter().all(|&v| -v <= 1e-8);
            assert_eq!(f.is_feasible(&sd), constraint_ok);
        }
    }

    #[test]
    fn baseline_standard_is_identity() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 9 }, 2).unwrap();
        let b = BaselineGraphKernel::new(BaselineKind::Standard, None, &g).unwrap();
        let gram = baseline_output_gram(&b, &g).unwrap();
        assert_eq!(gram, DMatrix::identity(9, 9));
    }

    #[test]
    fn baseline_spectra_on_two_node_path() {
        // normalized Laplacian of the 2-path has eigenvalues (0, 2)
        let g = path2();

        let b = BaselineGraphKernel::new(BaselineKind::RegularizedLaplacian, Some(1.0), &g).unwrap();
        let gram = baseline_output_gram(&b, &g).unwrap();
        let (vals, _) = sym_eigh(&gram).unwrap();
        assert!((vals[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!((vals[1] - 1.0).abs() < 1e-10);

        let b = BaselineGraphKernel::new(BaselineKind::Diffusion, Some(2.0), &g).unwrap();
        let gram = baseline_output_gram(&b, &g).unwrap();
        let (vals, _) = sym_eigh(&gram).unwrap();
        assert!((vals[0] - (-2.0f64).exp()).abs() < 1e-10);
        assert!((vals[1] - 1.0).abs() < 1e-10);

        let b = BaselineGraphKernel::new(BaselineKind::Cosine, None, &g).unwrap();
        let gram = baseline_output_gram(&b, &g).unwrap();
        let (vals, _) = sym_eigh(&gram).unwrap();
        assert!(vals[0].abs() < 1e-10);
        assert!((vals[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn baseline_grams_are_psd_on_random_graph() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 14 }, 19).unwrap();
        let lmax = normalized_lambda_max(&g).unwrap();
        let kernels = vec![
            BaselineGraphKernel::new(BaselineKind::Standard, None, &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::GlobalFiltering, Some(0.8), &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::LocalAveraging, Some(0.5), &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::LaplacianPseudoinverse, None, &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::RegularizedLaplacian, Some(2.0), &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::Diffusion, Some(1.5), &g).unwrap(),
            BaselineGraphKernel::new(
                BaselineKind::PStepRandomWalk { p: 3 },
                Some(lmax + 0.5),
                &g,
            )
            .unwrap(),
            BaselineGraphKernel::new(BaselineKind::Cosine, None, &g).unwrap(),
        ];
        for b in kernels {
            let gram = baseline_output_gram(&b, &g).unwrap();
            let (vals, _) = sym_eigh(&gram).unwrap();
            assert!(vals[0] >= -1e-8, "{} not PSD: {}", b.kind.name(), vals[0]);
        }
    }

    #[test]
    fn p_step_rejects_small_alpha() {
        let g = path2(); // lambda_max(L~) = 2
        assert!(matches!(
            BaselineGraphKernel::new(BaselineKind::PStepRandomWalk { p: 2 }, Some(1.0), &g),
            Err(KernelError::AlphaTooSmall { .. })
        ));
    }

    #[test]
    fn alpha_parameter_validation() {
        let g = path2();
        assert!(matches!(
            BaselineGraphKernel::new(BaselineKind::Diffusion, None, &g),
            Err(KernelError::MissingAlpha(_))
        ));
        assert!(matches!(
            BaselineGraphKernel::new(BaselineKind::Cosine, Some(1.0), &g),
            Err(KernelError::UnexpectedAlpha(_))
        ));
    }

    #[test]
    fn gram_shares_eigenvectors_with_scaled_laplacian() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 12 }, 23).unwrap();
        let sd = scaled_sd(&g);
        let f = PolynomialGraphFilter::new(vec![0.3, -0.8, 1.1]).unwrap();
        let b = f.filter_matrix(&sd).unwrap();
        let gram = &b * b.transpose();
        // eigenvalues of BB^T along U should be g(lambda)^2
        let rotated = sd.eigenvectors().transpose() * gram * sd.eigenvectors();
        for (j, &l) in sd.eigenvalues().iter().enumerate() {
            let expected = f.evaluate(l).powi(2);
            assert!((rotated[(j, j)] - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn baseline_alpha_gradient_matches_finite_difference() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 8 }, 31).unwrap();
        let lmax = normalized_lambda_max(&g).unwrap();
        let cases = vec![
            BaselineGraphKernel::new(BaselineKind::GlobalFiltering, Some(0.7), &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::LocalAveraging, Some(0.9), &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::RegularizedLaplacian, Some(1.2), &g).unwrap(),
            BaselineGraphKernel::new(BaselineKind::Diffusion, Some(0.6), &g).unwrap(),
            BaselineGraphKernel::new(
                BaselineKind::PStepRandomWalk { p: 2 },
                Some(lmax + 1.0),
                &g,
            )
            .unwrap(),
        ];
        let h = 1e-6;
        for b in cases {
            let grad = baseline_gram_alpha_gradient(&b, &g).unwrap().unwrap();
            let a = b.alpha.unwrap();
            let plus = baseline_output_gram(&b.with_alpha(a + h), &g).unwrap();
            let minus = baseline_output_gram(&b.with_alpha(a - h), &g).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            assert!(
                max_abs(&(grad - fd)) < 1e-5,
                "alpha gradient mismatch for {}",
                b.kind.name()
            );
        }
    }
}

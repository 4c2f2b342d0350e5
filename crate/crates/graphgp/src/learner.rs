//! Constrained maximum-likelihood learning of the polynomial spectral kernel:
//! analytic gradients in the rotated Kronecker basis, dual ascent on the
//! Lagrangian (alternating beta descent and multiplier updates), and the
//! grid-search initialization pipeline.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gp::{GpError, GraphContext, Hyperparameters, InputModel, OutputKernel, TrainingSet};
use crate::kernels::{
    normalized_lambda_max, vandermonde, BaselineGraphKernel, BaselineKind, InputKernelConfig,
    KernelError, PolynomialGraphFilter,
};
use crate::linalg::sym_eigh;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("optimization diverged: {0}")]
    Diverged(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("constrained fit requires a polynomial output kernel")]
    NotPolynomial,
    #[error("all initialization candidates failed numerically")]
    InitializationFailed,
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Lagrange multipliers stored through their logarithms so they stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeState {
    log_multipliers: DVector<f64>,
}

impl LagrangeState {
    pub fn zeros(m: usize) -> Self {
        Self {
            log_multipliers: DVector::zeros(m),
        }
    }

    pub fn from_log(log_multipliers: DVector<f64>) -> Self {
        Self { log_multipliers }
    }

    pub fn log_multipliers(&self) -> &DVector<f64> {
        &self.log_multipliers
    }

    pub fn multipliers(&self) -> DVector<f64> {
        self.log_multipliers.map(f64::exp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub gamma_beta: f64,
    pub gamma_lagrange: f64,
    pub gamma_lengthscale: f64,
    pub gamma_noise: f64,
    /// Outer iterations of the alternating dual scheme.
    pub max_outer: usize,
    /// Beta gradient steps per outer iteration.
    pub inner_steps: usize,
    /// Convergence threshold on the Lagrangian.
    pub tolerance: f64,
    /// Iteration budget of the unconstrained refinement.
    pub unconstrained_iters: usize,
    /// Grid candidates are sampled down to this many when the full grid is
    /// larger.
    pub grid_limit: usize,
    pub grid_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gamma_beta: 1.0,
            gamma_lagrange: 0.1,
            gamma_lengthscale: 1.0,
            gamma_noise: 1.0,
            max_outer: 2000,
            inner_steps: 50,
            tolerance: 1e-6,
            unconstrained_iters: 500,
            grid_limit: 20_000,
            grid_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let rates = [
            self.gamma_beta,
            self.gamma_lagrange,
            self.gamma_lengthscale,
            self.gamma_noise,
        ];
        if rates.iter().any(|r| !(*r > 0.0)) {
            return Err(FitError::InvalidConfig("learning rates must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(FitError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.max_outer == 0 || self.inner_steps == 0 {
            return Err(FitError::InvalidConfig("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumHint {
    LowPass,
    General,
}

impl SpectrumHint {
    fn grid_values(&self) -> Vec<f64> {
        match self {
            SpectrumHint::LowPass => (-5..=5).map(|v| v as f64).collect(),
            SpectrumHint::General => (-5..=5).map(|v| (2 * v) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub lagrangian: f64,
    pub nll: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitRecord {
    pub candidates_evaluated: usize,
    pub grid_beta: Vec<f64>,
    pub grid_noise: f64,
    pub grid_lml: f64,
    pub refined_lml: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub hyperparameters: Hyperparameters,
    pub multipliers: DVector<f64>,
    pub trace: Vec<TracePoint>,
    pub feasible: bool,
    pub initialization: Option<InitRecord>,
}

/// Analytic gradient of the negative log-marginal likelihood.
///
/// Entries are `None` when the corresponding hyperparameter is absent from
/// the model; positivity-constrained parameters are differentiated through
/// their logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub nll: f64,
    pub beta: Option<Vec<f64>>,
    pub log_lengthscale: Option<f64>,
    pub log_variance: Option<f64>,
    pub log_noise: f64,
    pub log_alpha: Option<f64>,
}

/// Shared pieces of an NLL evaluation in the rotated basis.
struct Rotated {
    lk: DVector<f64>,
    uk: DMatrix<f64>,
    lb: DVector<f64>,
    ub: DMatrix<f64>,
    /// `U_K^T Y U_B`.
    a: DMatrix<f64>,
}

fn rotate_model(
    h: &Hyperparameters,
    data: &TrainingSet,
    ctx: &GraphContext,
) -> Result<Rotated, FitError> {
    // the identity input kernel needs no eigensolve: its rotation is trivial
    if matches!(h.input, InputModel::Identity) {
        let n = data.num_signals();
        let (ub, lb) = h.output.gram_eig(ctx)?;
        let a = data.signals() * &ub;
        return Ok(Rotated {
            lk: DVector::from_element(n, 1.0),
            uk: DMatrix::identity(n, n),
            lb,
            ub,
            a,
        });
    }
    let k = h.input.gram(data.inputs(), data.inputs())?;
    let (mut lk, uk) = sym_eigh(&k)
        .ok_or_else(|| GpError::NumericalFailure("input kernel eigensolver".into()))?;
    for v in lk.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let (ub, lb) = h.output.gram_eig(ctx)?;
    let a = uk.transpose() * data.signals() * &ub;
    Ok(Rotated { lk, uk, lb, ub, a })
}

fn nll_from_rotated(r: &Rotated, noise: f64) -> Result<f64, FitError> {
    let (n, m) = r.a.shape();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..m {
            let d = r.lk[i] * r.lb[j] + noise;
            if d <= 0.0 {
                return Err(FitError::Gp(GpError::NumericalFailure(format!(
                    "non-positive covariance frequency d[{i},{j}] = {d}"
                ))));
            }
            acc += d.ln() + r.a[(i, j)].powi(2) / d;
        }
    }
    let nll = 0.5 * acc + 0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI).ln();
    if nll.is_finite() {
        Ok(nll)
    } else {
        Err(FitError::Gp(GpError::NumericalFailure("non-finite NLL".into())))
    }
}

/// Negative log-marginal likelihood and its analytic gradient.
pub fn nll_gradient(
    h: &Hyperparameters,
    data: &TrainingSet,
    ctx: &GraphContext,
) -> Result<Gradient, FitError> {
    let r = rotate_model(h, data, ctx)?;
    let noise = h.noise_variance;
    let nll = nll_from_rotated(&r, noise)?;
    let (n, m) = r.a.shape();

    // W_ij = 1/(2 d) - a^2/(2 d^2); d(NLL)/d(theta) = sum W * dd/dtheta for
    // any parameter whose perturbation stays diagonal in the rotated basis
    let w = DMatrix::from_fn(n, m, |i, j| {
        let d = r.lk[i] * r.lb[j] + noise;
        0.5 / d - r.a[(i, j)].powi(2) / (2.0 * d * d)
    });

    let beta = match &h.output {
        OutputKernel::Polynomial(f) => {
            let lambdas = ctx.scaled().eigenvalues();
            let p = f.degree();
            // s_j = sum_i W_ij lk_i; dd_ij/dbeta_k = 2 lk_i g(l_j) l_j^k
            let mut grad = vec![0.0; p + 1];
            for j in 0..m {
                let mut s = 0.0;
                for i in 0..n {
                    s += w[(i, j)] * r.lk[i];
                }
                let g = f.evaluate(lambdas[j]);
                let mut pow = 1.0;
                for gk in grad.iter_mut() {
                    *gk += s * 2.0 * g * pow;
                    pow *= lambdas[j];
                }
            }
            Some(grad)
        }
        OutputKernel::Baseline(_) => None,
    };

    let log_noise = noise * w.sum();

    let (log_lengthscale, log_variance) = match &h.input {
        InputModel::SquaredExponential(cfg) => {
            // dK/d(log l) = K .* r^2/(2l)
            let x = data.inputs();
            let g = DMatrix::from_fn(n, n, |p_, q| {
                let d2 = (x.row(p_) - x.row(q)).norm_squared();
                cfg.variance * (-d2 / (2.0 * cfg.lengthscale)).exp() * d2
                    / (2.0 * cfg.lengthscale)
            });
            let gt = r.uk.transpose() * g * &r.uk;
            let grad_l = half_trace_minus_quad_input(&r, noise, &gt);
            // dK/d(log var) = K: diagonal in the rotated basis
            let mut grad_v = 0.0;
            for i in 0..n {
                for j in 0..m {
                    grad_v += w[(i, j)] * r.lk[i] * r.lb[j];
                }
            }
            let var_grad = if matches!(h.output, OutputKernel::Polynomial(_)) {
                None // variance pinned to 1, amplitude lives in beta
            } else {
                Some(grad_v)
            };
            (Some(grad_l), var_grad)
        }
        InputModel::FixedGram { .. } => {
            let mut grad_v = 0.0;
            for i in 0..n {
                for j in 0..m {
                    grad_v += w[(i, j)] * r.lk[i] * r.lb[j];
                }
            }
            let var_grad = if matches!(h.output, OutputKernel::Polynomial(_)) {
                None
            } else {
                Some(grad_v)
            };
            (None, var_grad)
        }
        InputModel::Identity => (None, None),
    };

    let log_alpha = match &h.output {
        OutputKernel::Baseline(b) if b.kind.takes_alpha() => {
            let alpha = b.alpha.unwrap();
            let gb = crate::kernels::baseline_gram_alpha_gradient(b, ctx.graph())?
                .expect("alpha-bearing kind has a gradient");
            let gbt = r.ub.transpose() * gb * &r.ub;
            let grad_alpha = half_trace_minus_quad_output(&r, noise, &gbt);
            // p-step reparameterizes alpha = lambda_max + softplus(raw);
            // everything else optimizes log alpha
            let chain = match b.kind {
                BaselineKind::PStepRandomWalk { .. } => {
                    let lmax = normalized_lambda_max(ctx.graph())?;
                    let margin = alpha - lmax;
                    // d alpha / d raw with raw = softplus^{-1}(margin)
                    1.0 - (-margin).exp()
                }
                _ => alpha,
            };
            Some(grad_alpha * chain)
        }
        _ => None,
    };

    Ok(Gradient {
        nll,
        beta,
        log_lengthscale,
        log_variance,
        log_noise,
        log_alpha,
    })
}

/// Gradient term for `dSigma = G (x) BB^T` with `G~ = U_K^T G U_K`:
/// `1/2 tr(Sigma^{-1} dSigma) - 1/2 y~^T Sigma^{-1} dSigma Sigma^{-1} y~`.
fn half_trace_minus_quad_input(r: &Rotated, noise: f64, gt: &DMatrix<f64>) -> f64 {
    let (n, m) = r.a.shape();
    let mut trace = 0.0;
    let mut quad = 0.0;
    for j in 0..m {
        let wj = DVector::from_fn(n, |i, _| r.a[(i, j)] / (r.lk[i] * r.lb[j] + noise));
        for i in 0..n {
            trace += gt[(i, i)] * r.lb[j] / (r.lk[i] * r.lb[j] + noise);
        }
        quad += r.lb[j] * wj.dot(&(gt * &wj));
    }
    0.5 * trace - 0.5 * quad
}

/// Same as above for `dSigma = K (x) G_B` with `G~_B = U_B^T G_B U_B`.
fn half_trace_minus_quad_output(r: &Rotated, noise: f64, gbt: &DMatrix<f64>) -> f64 {
    let (n, m) = r.a.shape();
    let mut trace = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        let vi = DVector::from_fn(m, |j, _| r.a[(i, j)] / (r.lk[i] * r.lb[j] + noise));
        for j in 0..m {
            trace += r.lk[i] * gbt[(j, j)] / (r.lk[i] * r.lb[j] + noise);
        }
        quad += r.lk[i] * vi.dot(&(gbt * &vi));
    }
    0.5 * trace - 0.5 * quad
}

/// Fixed-rotation objective for the beta-only loops: the input kernel, noise
/// and graph rotation never change, so an evaluation is O(NM).
struct BetaObjective {
    lambdas: Vec<f64>,
    lk: DVector<f64>,
    a: DMatrix<f64>,
    col_power: Vec<f64>,
    /// Set when every input-kernel eigenvalue coincides (e.g. K = I); the
    /// row dimension then collapses out of the objective.
    lk_uniform: Option<f64>,
    noise: f64,
}

impl BetaObjective {
    fn new(h: &Hyperparameters, data: &TrainingSet, ctx: &GraphContext) -> Result<Self, FitError> {
        let r = rotate_model(h, data, ctx)?;
        let (n, m) = r.a.shape();
        let col_power = (0..m)
            .map(|j| (0..n).map(|i| r.a[(i, j)].powi(2)).sum())
            .collect();
        let spread = r.lk.max() - r.lk.min();
        let lk_uniform = if spread.abs() < 1e-12 {
            Some(r.lk[0])
        } else {
            None
        };
        Ok(Self {
            lambdas: ctx.scaled().eigenvalues().as_slice().to_vec(),
            lk: r.lk,
            a: r.a,
            col_power,
            lk_uniform,
            noise: h.noise_variance,
        })
    }

    /// Mean squared entry of the rotated observations; an upper scale for any
    /// sensible noise variance.
    fn mean_power(&self) -> f64 {
        let (n, m) = self.a.shape();
        self.col_power.iter().sum::<f64>() / (n * m) as f64
    }

    /// NLL plus gradients for beta and log noise at an explicit noise level.
    fn nll_grad_at(&self, f: &PolynomialGraphFilter, noise: f64) -> (f64, Vec<f64>, f64) {
        let (n, m) = self.a.shape();
        let p = f.degree();
        let mut grad = vec![0.0; p + 1];
        let mut acc = 0.0;
        let mut w_sum = 0.0;
        for j in 0..m {
            let g = f.evaluate(self.lambdas[j]);
            let lb = g * g;
            let s = if let Some(lk) = self.lk_uniform {
                let d = lk * lb + noise;
                if d <= 0.0 {
                    return (f64::INFINITY, grad, 0.0);
                }
                acc += n as f64 * d.ln() + self.col_power[j] / d;
                let w = n as f64 / (2.0 * d) - self.col_power[j] / (2.0 * d * d);
                w_sum += w;
                lk * w
            } else {
                let mut s = 0.0;
                for i in 0..n {
                    let d = self.lk[i] * lb + noise;
                    if d <= 0.0 {
                        return (f64::INFINITY, grad, 0.0);
                    }
                    acc += d.ln() + self.a[(i, j)].powi(2) / d;
                    let w = 0.5 / d - self.a[(i, j)].powi(2) / (2.0 * d * d);
                    w_sum += w;
                    s += self.lk[i] * w;
                }
                s
            };
            let mut pow = 1.0;
            for gk in grad.iter_mut() {
                *gk += s * 2.0 * g * pow;
                pow *= self.lambdas[j];
            }
        }
        let nll = 0.5 * acc + 0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI).ln();
        (nll, grad, noise * w_sum)
    }

    fn nll_at(&self, f: &PolynomialGraphFilter, noise: f64) -> f64 {
        let (n, m) = self.a.shape();
        let mut acc = 0.0;
        if let Some(lk) = self.lk_uniform {
            for j in 0..m {
                let d = lk * f.evaluate(self.lambdas[j]).powi(2) + noise;
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                acc += n as f64 * d.ln() + self.col_power[j] / d;
            }
        } else {
            for j in 0..m {
                let lb = f.evaluate(self.lambdas[j]).powi(2);
                for i in 0..n {
                    let d = self.lk[i] * lb + noise;
                    if d <= 0.0 {
                        return f64::INFINITY;
                    }
                    acc += d.ln() + self.a[(i, j)].powi(2) / d;
                }
            }
        }
        0.5 * acc + 0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn nll(&self, f: &PolynomialGraphFilter) -> f64 {
        let (n, m) = self.a.shape();
        let mut acc = 0.0;
        if let Some(lk) = self.lk_uniform {
            for j in 0..m {
                let d = lk * f.evaluate(self.lambdas[j]).powi(2) + self.noise;
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                acc += n as f64 * d.ln() + self.col_power[j] / d;
            }
        } else {
            for j in 0..m {
                let lb = f.evaluate(self.lambdas[j]).powi(2);
                for i in 0..n {
                    let d = self.lk[i] * lb + self.noise;
                    if d <= 0.0 {
                        return f64::INFINITY;
                    }
                    acc += d.ln() + self.a[(i, j)].powi(2) / d;
                }
            }
        }
        0.5 * acc + 0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn nll_grad(&self, f: &PolynomialGraphFilter) -> (f64, Vec<f64>) {
        let (n, m) = self.a.shape();
        let p = f.degree();
        let mut grad = vec![0.0; p + 1];
        let mut acc = 0.0;
        for j in 0..m {
            let g = f.evaluate(self.lambdas[j]);
            let lb = g * g;
            let s = if let Some(lk) = self.lk_uniform {
                let d = lk * lb + self.noise;
                if d <= 0.0 {
                    return (f64::INFINITY, grad);
                }
                acc += n as f64 * d.ln() + self.col_power[j] / d;
                lk * (n as f64 / (2.0 * d) - self.col_power[j] / (2.0 * d * d))
            } else {
                let mut s = 0.0;
                for i in 0..n {
                    let d = self.lk[i] * lb + self.noise;
                    if d <= 0.0 {
                        return (f64::INFINITY, grad);
                    }
                    acc += d.ln() + self.a[(i, j)].powi(2) / d;
                    s += self.lk[i] * (0.5 / d - self.a[(i, j)].powi(2) / (2.0 * d * d));
                }
                s
            };
            let mut pow = 1.0;
            for gk in grad.iter_mut() {
                *gk += s * 2.0 * g * pow;
                pow *= self.lambdas[j];
            }
        }
        let nll = 0.5 * acc + 0.5 * (n * m) as f64 * (2.0 * std::f64::consts::PI).ln();
        (nll, grad)
    }
}

/// Lagrangian `L(beta, multipliers) = -l(beta) - multipliers^T B_v beta` with
/// multipliers `exp(log_multipliers)`.
pub fn lagrangian(
    beta: &PolynomialGraphFilter,
    lagrange: &LagrangeState,
    base: &Hyperparameters,
    data: &TrainingSet,
    ctx: &GraphContext,
) -> Result<f64, FitError> {
    let h = Hyperparameters {
        output: OutputKernel::Polynomial(beta.clone()),
        input: base.input.clone(),
        noise_variance: base.noise_variance,
    };
    let obj = BetaObjective::new(&h, data, ctx)?;
    let bv = vandermonde(ctx.scaled().eigenvalues().as_slice(), beta.degree());
    let constraint = &bv * DVector::from_column_slice(beta.coefficients());
    let value = obj.nll(beta) - lagrange.multipliers().dot(&constraint);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FitError::Gp(GpError::NumericalFailure("non-finite Lagrangian".into())))
    }
}

const MAX_HALVINGS: usize = 30;
const LOG_MULTIPLIER_CAP: f64 = 30.0;
const CONVERGED_STREAK: usize = 5;

/// Outer alternation budget for the post-dual feasible polish.
const POLISH_ROUNDS: usize = 500;

/// Alternating dual ascent on the Lagrangian (fixed inner beta budget per
/// outer iteration, multiplier step in the log domain). All hyperparameters
/// other than beta stay fixed at their initialization values.
pub fn constrained_fit(
    data: &TrainingSet,
    ctx: &GraphContext,
    degree: usize,
    cfg: &OptimizerConfig,
    init: &Hyperparameters,
) -> Result<FitReport, FitError> {
    cfg.validate()?;
    let init_beta = match &init.output {
        OutputKernel::Polynomial(f) => {
            let mut c = f.coefficients().to_vec();
            c.resize(degree + 1, 0.0);
            canonicalize_sign(&mut c, ctx.scaled().eigenvalues().as_slice());
            c
        }
        OutputKernel::Baseline(_) => return Err(FitError::NotPolynomial),
    };
    let obj = BetaObjective::new(init, data, ctx)?;
    let lambdas = ctx.scaled().eigenvalues().as_slice().to_vec();
    let bv = vandermonde(&lambdas, degree);
    let m = lambdas.len();

    let mut beta = DVector::from_vec(init_beta);
    let mut lag = LagrangeState::zeros(m);
    let mut trace = Vec::new();

    let eval = |beta: &DVector<f64>, lag: &LagrangeState| -> (f64, f64) {
        let f = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();
        let nll = obj.nll(&f);
        let penalty = lag.multipliers().dot(&(&bv * beta));
        (nll - penalty, nll)
    };

    let mut streak = 0usize;
    let mut prev_lagrangian = f64::INFINITY;
    for outer in 0..cfg.max_outer {
        // step 2: descend on beta at fixed multipliers
        let mult = lag.multipliers();
        let penalty_grad = bv.transpose() * &mult;
        let mut step = cfg.gamma_beta;
        for _ in 0..cfg.inner_steps {
            let f = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();
            let (nll, nll_grad) = obj.nll_grad(&f);
            let current = nll - mult.dot(&(&bv * &beta));
            if !current.is_finite() {
                return Err(FitError::Diverged(format!(
                    "non-finite Lagrangian at outer iteration {outer}"
                )));
            }
            let grad = DVector::from_vec(nll_grad) - &penalty_grad;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let candidate = &beta - step * &grad;
                let (cand_l, _) = eval(&candidate, &lag);
                if cand_l.is_finite() && cand_l <= current {
                    beta = candidate;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break; // beta is at the resolution limit for this multiplier
            }
        }

        // step 3: ascend on the log multipliers
        let constraint = &bv * &beta;
        for i in 0..m {
            let grad_i = -mult[i] * constraint[i];
            let updated = (lag.log_multipliers[i] + cfg.gamma_lagrange * grad_i)
                .clamp(-LOG_MULTIPLIER_CAP, LOG_MULTIPLIER_CAP);
            lag.log_multipliers[i] = updated;
        }

        let (lagrangian_value, nll) = eval(&beta, &lag);
        let max_violation = constraint.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
        trace.push(TracePoint {
            iteration: outer,
            lagrangian: lagrangian_value,
            nll,
            max_violation,
        });
        if !lagrangian_value.is_finite() {
            return Err(FitError::Diverged(format!(
                "non-finite Lagrangian at outer iteration {outer}"
            )));
        }

        // step 4: stop once the Lagrangian settles
        if (lagrangian_value - prev_lagrangian).abs() < cfg.tolerance {
            streak += 1;
            if streak >= CONVERGED_STREAK {
                break;
            }
        } else {
            streak = 0;
        }
        prev_lagrangian = lagrangian_value;
    }

    // dual ascent converges to feasibility only in the limit; lift the
    // constant coefficient over any residual violation so the returned
    // spectrum honors the positivity contract exactly
    let residual = (&bv * &beta).iter().fold(0.0_f64, |acc, &v| acc.max(-v));
    if residual > 1e-8 {
        beta[0] += residual;
    }

    // guard against dual-ascent divergence: once a multiplier grows large the
    // Lagrangian is unbounded below in beta (the penalty is linear while the
    // likelihood grows only logarithmically), which can carry beta far from
    // the likelihood basin. If that happened, restart from the repaired
    // initialization instead.
    {
        let mut init_repaired = DVector::from_vec(match &init.output {
            OutputKernel::Polynomial(f) => {
                let mut c = f.coefficients().to_vec();
                c.resize(degree + 1, 0.0);
                canonicalize_sign(&mut c, &lambdas);
                c
            }
            OutputKernel::Baseline(_) => unreachable!(),
        });
        let init_residual = (&bv * &init_repaired)
            .iter()
            .fold(0.0_f64, |acc, &v| acc.max(-v));
        if init_residual > 0.0 {
            init_repaired[0] += init_residual;
        }
        let nll_dual = obj.nll_at(
            &PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap(),
            init.noise_variance,
        );
        let nll_init = obj.nll_at(
            &PolynomialGraphFilter::new(init_repaired.as_slice().to_vec()).unwrap(),
            init.noise_variance,
        );
        if !(nll_dual <= nll_init) {
            beta = init_repaired;
        }
    }

    // feasible polish: the dual phase parks wherever the multipliers froze,
    // which can leave likelihood on the table (typically absorbed into an
    // inflated noise variance the dual phase never revisits). Alternate an
    // exact 1-d noise update with beta descent that rejects any step whose
    // spectrum goes negative, so the positivity contract survives while the
    // likelihood tightens.
    let mean_power = obj.mean_power();
    let run_polish = |start_beta: DVector<f64>,
                      start_noise: f64|
     -> (DVector<f64>, f64, f64, Vec<f64>) {
        let mut beta = start_beta;
        let mut noise = start_noise;
        let mut current = {
            let f = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();
            obj.nll_at(&f, noise)
        };
        let mut history = Vec::new();
        for _ in 0..POLISH_ROUNDS {
            let round_start = current;
            let f = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();

            // noise by ternary search over log noise; the 1-d slice is
            // well behaved and this sidesteps the bad conditioning between
            // noise and the polynomial tail
            let mut lo = (1e-10 * mean_power).max(1e-300).ln();
            let mut hi = (10.0 * mean_power).ln();
            for _ in 0..100 {
                let a = lo + (hi - lo) / 3.0;
                let b = hi - (hi - lo) / 3.0;
                if obj.nll_at(&f, a.exp()) < obj.nll_at(&f, b.exp()) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            let cand_noise = (0.5 * (lo + hi)).exp();
            let cand_nll = obj.nll_at(&f, cand_noise);
            if cand_nll.is_finite() && cand_nll < current {
                noise = cand_noise;
                current = cand_nll;
            }

            // beta at the updated noise
            let mut scale = 1.0_f64;
            for _ in 0..cfg.inner_steps {
                let f = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();
                let (_, grad_beta, _) = obj.nll_grad_at(&f, noise);
                let grad_beta = DVector::from_vec(grad_beta);
                let mut accepted = false;
                for _ in 0..=MAX_HALVINGS {
                    let mut cand = &beta - scale * cfg.gamma_beta * &grad_beta;
                    // project back onto the feasible set by lifting the
                    // constant term; a raw gradient step at an active
                    // constraint is infeasible at every scale, so rejection
                    // alone would pin the iterate to the boundary
                    let cand_f = PolynomialGraphFilter::new(cand.as_slice().to_vec()).unwrap();
                    let violation = lambdas
                        .iter()
                        .map(|&l| -cand_f.evaluate(l))
                        .fold(0.0_f64, f64::max);
                    if violation > 0.0 {
                        cand[0] += violation;
                    }
                    let cand_f = PolynomialGraphFilter::new(cand.as_slice().to_vec()).unwrap();
                    let cand_nll = obj.nll_at(&cand_f, noise);
                    if cand_nll.is_finite() && cand_nll < current {
                        beta = cand;
                        current = cand_nll;
                        accepted = true;
                        break;
                    }
                    scale *= 0.5;
                }
                if !accepted {
                    break;
                }
                scale = (scale * 2.0).min(1.0);
            }

            history.push(current);
            if round_start - current < cfg.tolerance {
                break;
            }
        }
        (beta, noise, current, history)
    };

    let (mut beta, mut noise, mut best_nll, mut history) =
        run_polish(beta.clone_owned(), init.noise_variance);

    // basin escape: squaring the filter makes every spectrum crossing of zero
    // a stationary point, so a boundary-pinned solution can be a spurious
    // local optimum while a strictly positive spectrum fits better. Retry the
    // polish from lifted copies of the boundary solution and keep whichever
    // likelihood wins.
    {
        let f = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();
        let gvals: Vec<f64> = lambdas.iter().map(|&l| f.evaluate(l)).collect();
        let gmax = gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let gmin = gvals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if gmax > 0.0 && gmin <= 1e-3 * gmax {
            let base_beta = beta.clone_owned();
            let base_noise = noise;
            for frac in [0.05, 0.1, 0.2, 0.4] {
                let mut lifted = base_beta.clone_owned();
                lifted[0] += frac * gmax;
                let (b2, n2, nll2, h2) = run_polish(lifted, base_noise);
                if nll2 < best_nll - 1e-9 {
                    beta = b2;
                    noise = n2;
                    best_nll = nll2;
                    history.extend(h2);
                }
            }
        }
    }

    let trace_offset = trace.len();
    for (round, &nll) in history.iter().enumerate() {
        trace.push(TracePoint {
            iteration: trace_offset + round,
            lagrangian: nll,
            nll,
            max_violation: 0.0,
        });
    }

    let filter = PolynomialGraphFilter::new(beta.as_slice().to_vec()).unwrap();
    let feasible = lambdas.iter().all(|&l| filter.evaluate(l) >= -1e-8);
    Ok(FitReport {
        hyperparameters: Hyperparameters {
            output: OutputKernel::Polynomial(filter),
            input: init.input.clone(),
            noise_variance: noise,
        },
        multipliers: lag.multipliers(),
        trace,
        feasible,
        initialization: None,
    })
}

// ----- unconstrained joint optimization ------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ParamKind {
    Beta(usize),
    LogAlpha,
    RawAlpha,
    LogLengthscale,
    LogVariance,
    LogNoise,
}

struct Packed {
    layout: Vec<ParamKind>,
    pstep_lambda_max: Option<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        (y.exp() - 1.0).max(1e-300).ln()
    }
}

impl Packed {
    fn for_model(h: &Hyperparameters, ctx: &GraphContext) -> Result<Self, FitError> {
        let mut layout = Vec::new();
        let mut pstep_lambda_max = None;
        match &h.output {
            OutputKernel::Polynomial(f) => {
                for k in 0..=f.degree() {
                    layout.push(ParamKind::Beta(k));
                }
            }
            OutputKernel::Baseline(b) if b.kind.takes_alpha() => {
                if matches!(b.kind, BaselineKind::PStepRandomWalk { .. }) {
                    pstep_lambda_max = Some(normalized_lambda_max(ctx.graph())?);
                    layout.push(ParamKind::RawAlpha);
                } else {
                    layout.push(ParamKind::LogAlpha);
                }
            }
            OutputKernel::Baseline(_) => {}
        }
        match (&h.input, &h.output) {
            (InputModel::SquaredExponential(_), OutputKernel::Polynomial(_)) => {
                layout.push(ParamKind::LogLengthscale);
            }
            (InputModel::SquaredExponential(_), OutputKernel::Baseline(_)) => {
                layout.push(ParamKind::LogLengthscale);
                layout.push(ParamKind::LogVariance);
            }
            (InputModel::FixedGram { .. }, OutputKernel::Baseline(_)) => {
                layout.push(ParamKind::LogVariance);
            }
            _ => {}
        }
        layout.push(ParamKind::LogNoise);
        Ok(Self {
            layout,
            pstep_lambda_max,
        })
    }

    fn pack(&self, h: &Hyperparameters) -> Vec<f64> {
        self.layout
            .iter()
            .map(|kind| match kind {
                ParamKind::Beta(k) => match &h.output {
                    OutputKernel::Polynomial(f) => f.coefficients()[*k],
                    _ => unreachable!(),
                },
                ParamKind::LogAlpha => match &h.output {
                    OutputKernel::Baseline(b) => b.alpha.unwrap().ln(),
                    _ => unreachable!(),
                },
                ParamKind::RawAlpha => match &h.output {
                    OutputKernel::Baseline(b) => {
                        softplus_inv(b.alpha.unwrap() - self.pstep_lambda_max.unwrap())
                    }
                    _ => unreachable!(),
                },
                ParamKind::LogLengthscale => match &h.input {
                    InputModel::SquaredExponential(cfg) => cfg.lengthscale.ln(),
                    _ => unreachable!(),
                },
                ParamKind::LogVariance => match &h.input {
                    InputModel::SquaredExponential(cfg) => cfg.variance.ln(),
                    InputModel::FixedGram { scale, .. } => scale.ln(),
                    _ => unreachable!(),
                },
                ParamKind::LogNoise => h.noise_variance.ln(),
            })
            .collect()
    }

    fn unpack(&self, template: &Hyperparameters, params: &[f64]) -> Result<Hyperparameters, FitError> {
        let mut h = template.clone();
        let mut beta: Option<Vec<f64>> = match &template.output {
            OutputKernel::Polynomial(f) => Some(f.coefficients().to_vec()),
            _ => None,
        };
        for (kind, &value) in self.layout.iter().zip(params) {
            match kind {
                ParamKind::Beta(k) => beta.as_mut().unwrap()[*k] = value,
                ParamKind::LogAlpha => {
                    if let OutputKernel::Baseline(b) = &mut h.output {
                        b.alpha = Some(value.exp());
                    }
                }
                ParamKind::RawAlpha => {
                    if let OutputKernel::Baseline(b) = &mut h.output {
                        // stay strictly above lambda_max so the gram is PSD
                        b.alpha =
                            Some(self.pstep_lambda_max.unwrap() + softplus(value) + 1e-8);
                    }
                }
                ParamKind::LogLengthscale => {
                    if let InputModel::SquaredExponential(cfg) = &mut h.input {
                        cfg.lengthscale = value.exp();
                    }
                }
                ParamKind::LogVariance => match &mut h.input {
                    InputModel::SquaredExponential(cfg) => cfg.variance = value.exp(),
                    InputModel::FixedGram { scale, .. } => *scale = value.exp(),
                    _ => {}
                },
                ParamKind::LogNoise => h.noise_variance = value.exp(),
            }
        }
        if let Some(beta) = beta {
            h.output = OutputKernel::Polynomial(PolynomialGraphFilter::new(beta)?);
        }
        Ok(h)
    }

    fn gradient_vector(&self, g: &Gradient) -> Vec<f64> {
        self.layout
            .iter()
            .map(|kind| match kind {
                ParamKind::Beta(k) => g.beta.as_ref().unwrap()[*k],
                ParamKind::LogAlpha | ParamKind::RawAlpha => g.log_alpha.unwrap(),
                ParamKind::LogLengthscale => g.log_lengthscale.unwrap(),
                ParamKind::LogVariance => g.log_variance.unwrap(),
                ParamKind::LogNoise => g.log_noise,
            })
            .collect()
    }

    fn rates(&self, cfg: &OptimizerConfig) -> Vec<f64> {
        self.layout
            .iter()
            .map(|kind| match kind {
                ParamKind::Beta(_) => cfg.gamma_beta,
                ParamKind::LogAlpha | ParamKind::RawAlpha => cfg.gamma_lengthscale,
                ParamKind::LogLengthscale => cfg.gamma_lengthscale,
                ParamKind::LogVariance => cfg.gamma_lengthscale,
                ParamKind::LogNoise => cfg.gamma_noise,
            })
            .collect()
    }
}

/// Joint gradient descent on the negative log-marginal likelihood over every
/// free hyperparameter (beta, log lengthscale, log noise, log alpha / scale).
///
/// The step size starts at the configured rate and halves whenever a step
/// would increase the objective, so the accepted-objective trace is
/// monotone non-increasing. Returns the best iterate seen.
pub fn unconstrained_fit(
    data: &TrainingSet,
    ctx: &GraphContext,
    cfg: &OptimizerConfig,
    init: &Hyperparameters,
) -> Result<Hyperparameters, FitError> {
    cfg.validate()?;
    let packed = Packed::for_model(init, ctx)?;
    let rates = packed.rates(cfg);
    let mut params = packed.pack(init);
    let mut current = nll_gradient(init, data, ctx)?;
    let mut best_params = params.clone();
    let mut best_nll = current.nll;
    let mut scale = 1.0_f64;
    let mut streak = 0usize;

    for _ in 0..cfg.unconstrained_iters {
        let grad = packed.gradient_vector(&current);
        let mut improved = false;
        let prev_nll = current.nll;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = params
                .iter()
                .zip(&grad)
                .zip(&rates)
                .map(|((p, g), r)| p - scale * r * g)
                .collect();
            match packed
                .unpack(init, &candidate)
                .and_then(|ch| nll_gradient(&ch, data, ctx).map(|g| (ch, g)))
            {
                Ok((_, cg)) if cg.nll.is_finite() && cg.nll <= prev_nll => {
                    params = candidate;
                    current = cg;
                    improved = true;
                    break;
                }
                _ => scale *= 0.5,
            }
        }
        if !improved {
            break;
        }
        scale = (scale * 2.0).min(1.0);
        if current.nll < best_nll {
            best_params = params.clone();
            best_nll = current.nll;
        }
        if (prev_nll - current.nll).abs() < cfg.tolerance {
            streak += 1;
            if streak >= CONVERGED_STREAK {
                break;
            }
        } else {
            streak = 0;
        }
    }
    let _ = best_nll;
    packed.unpack(init, &best_params)
}

/// How the input-space kernel should be initialized.
#[derive(Debug, Clone)]
pub enum InputInit {
    Identity,
    SquaredExponential,
    FixedGram(DMatrix<f64>),
}

/// Grid-search initialization followed by unconstrained refinement.
///
/// The lengthscale starts at the mean squared signal norm and the noise grid
/// at {var/10, var/5} of the per-entry signal variance; beta candidates come
/// from the hint's coefficient grid with the input variance pinned to 1.
pub fn initialize_hyperparameters(
    data: &TrainingSet,
    ctx: &GraphContext,
    degree: usize,
    hint: SpectrumHint,
    input: &InputInit,
    cfg: &OptimizerConfig,
) -> Result<(Hyperparameters, InitRecord), FitError> {
    cfg.validate()?;
    let y = data.signals();
    let n = data.num_signals();
    let total = (n * data.num_nodes()) as f64;
    let mean = y.sum() / total;
    let signal_variance = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total;
    if signal_variance <= 0.0 {
        return Err(FitError::DegenerateData(
            "signals have zero variance".into(),
        ));
    }
    let lengthscale = (0..n)
        .map(|i| y.row(i).norm_squared())
        .sum::<f64>()
        / n as f64;

    let input_model = match input {
        InputInit::Identity => InputModel::Identity,
        InputInit::SquaredExponential => {
            InputModel::SquaredExponential(InputKernelConfig::new(lengthscale, 1.0)?)
        }
        InputInit::FixedGram(gram) => InputModel::FixedGram {
            gram: gram.clone(),
            scale: 1.0,
        },
    };
    let noise_grid = [signal_variance / 10.0, signal_variance / 5.0];

    // all beta candidates share the same rotation; precompute it once
    let probe = Hyperparameters {
        output: OutputKernel::Polynomial(PolynomialGraphFilter::new(vec![1.0])?),
        input: input_model.clone(),
        noise_variance: noise_grid[0],
    };
    let objectives: Vec<BetaObjective> = noise_grid
        .iter()
        .map(|&nv| {
            BetaObjective::new(
                &Hyperparameters {
                    noise_variance: nv,
                    ..probe.clone()
                },
                data,
                ctx,
            )
        })
        .collect::<Result<_, _>>()?;

    let values = hint.grid_values();
    let dims = degree + 1;
    let grid_size = values.len().pow(dims as u32);
    let candidates: Vec<Vec<f64>> = if grid_size <= cfg.grid_limit {
        let mut all = Vec::with_capacity(grid_size);
        let mut idx = vec![0usize; dims];
        loop {
            all.push(idx.iter().map(|&i| values[i]).collect());
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < values.len() {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == dims {
                    return finish_grid(
                        all, &objectives, &noise_grid, data, ctx, cfg, &input_model,
                    );
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.grid_seed);
        (0..cfg.grid_limit)
            .map(|_| (0..dims).map(|_| values[rng.gen_range(0..values.len())]).collect())
            .collect()
    };
    finish_grid(candidates, &objectives, &noise_grid, data, ctx, cfg, &input_model)
}

fn finish_grid(
    candidates: Vec<Vec<f64>>,
    objectives: &[BetaObjective],
    noise_grid: &[f64],
    data: &TrainingSet,
    ctx: &GraphContext,
    cfg: &OptimizerConfig,
    input_model: &InputModel,
) -> Result<(Hyperparameters, InitRecord), FitError> {
    let mut best: Option<(f64, Vec<f64>, f64)> = None; // (lml, beta, noise)
    let mut evaluated = 0usize;
    for beta in &candidates {
        let f = match PolynomialGraphFilter::new(beta.clone()) {
            Ok(f) => f,
            Err(_) => continue,
        };
        for (obj, &nv) in objectives.iter().zip(noise_grid) {
            let nll = obj.nll(&f);
            evaluated += 1;
            if !nll.is_finite() {
                continue;
            }
            let lml = -nll;
            let better = match &best {
                None => true,
                Some((b_lml, b_beta, _)) => {
                    lml > *b_lml
                        || (lml == *b_lml
                            && norm2(beta) < norm2(b_beta))
                }
            };
            if better {
                best = Some((lml, beta.clone(), nv));
            }
        }
    }
    let (grid_lml, mut grid_beta, grid_noise) = best.ok_or(FitError::InitializationFailed)?;
    canonicalize_sign(&mut grid_beta, ctx.scaled().eigenvalues().as_slice());

    let h0 = Hyperparameters {
        output: OutputKernel::Polynomial(PolynomialGraphFilter::new(grid_beta.clone())?),
        input: input_model.clone(),
        noise_variance: grid_noise,
    };
    let mut refined = unconstrained_fit(data, ctx, cfg, &h0)?;
    if let OutputKernel::Polynomial(f) = &refined.output {
        let mut c = f.coefficients().to_vec();
        canonicalize_sign(&mut c, ctx.scaled().eigenvalues().as_slice());
        refined.output = OutputKernel::Polynomial(PolynomialGraphFilter::new(c)?);
    }
    let refined_lml = -nll_gradient(&refined, data, ctx)?.nll;
    let record = InitRecord {
        candidates_evaluated: evaluated,
        grid_beta,
        grid_noise,
        grid_lml,
        refined_lml,
    };
    Ok((refined, record))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The likelihood only sees `g^2`, so `beta` and `-beta` are equivalent;
/// flip to the representative that is predominantly non-negative on the
/// spectrum before handing the point to the constrained phase.
fn canonicalize_sign(beta: &mut [f64], lambdas: &[f64]) {
    let f = match PolynomialGraphFilter::new(beta.to_vec()) {
        Ok(f) => f,
        Err(_) => return,
    };
    let total: f64 = lambdas.iter().map(|&l| f.evaluate(l)).sum();
    if total < 0.0 {
        for b in beta.iter_mut() {
            *b = -*b;
        }
    }
}

/// Likelihood margin (in nats) below which a strictly positive spectrum is
/// preferred over one that touches zero at a graph frequency.
const INTERIOR_PREFERENCE_NATS: f64 = 0.5;

/// True when the fitted spectrum is pinned at (or within a sliver of) zero
/// at some graph frequency, i.e. the positivity constraint is active.
fn spectrum_boundary_active(report: &FitReport, ctx: &GraphContext) -> bool {
    let f = match &report.hyperparameters.output {
        OutputKernel::Polynomial(f) => f,
        OutputKernel::Baseline(_) => return false,
    };
    let gvals: Vec<f64> = ctx
        .scaled()
        .eigenvalues()
        .iter()
        .map(|&l| f.evaluate(l))
        .collect();
    let gmax = gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let gmin = gvals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    gmax <= 0.0 || gmin <= 1e-3 * gmax
}

/// Full three-step pipeline: grid search, unconstrained refinement, then the
/// constrained dual ascent.
///
/// The marginal likelihood is nearly flat along the trade-off between the
/// constant part of the squared spectrum and the noise variance, so the
/// refined initialization's noise can land anywhere on that ridge — including
/// the high end, where the fitted spectrum collapses to zero at the largest
/// graph frequencies. The constrained phase therefore runs from a second,
/// low-noise start as well, and a strictly positive spectrum is kept over a
/// boundary-degenerate one unless the likelihood clearly prefers the boundary
/// (a spectrum with g(lambda_i) = 0 assigns zero prior power to a graph
/// frequency, making the output kernel singular there).
pub fn fit_polynomial(
    data: &TrainingSet,
    ctx: &GraphContext,
    degree: usize,
    hint: SpectrumHint,
    input: &InputInit,
    cfg: &OptimizerConfig,
) -> Result<FitReport, FitError> {
    let (init, record) = initialize_hyperparameters(data, ctx, degree, hint, input, cfg)?;
    let primary = constrained_fit(data, ctx, degree, cfg, &init)?;

    let y = data.signals();
    let total = (data.num_signals() * data.num_nodes()) as f64;
    let mean = y.sum() / total;
    let signal_variance = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total;
    // lift the second start to a strictly positive spectrum: zero crossings
    // of g are stationary points of the squared-spectrum likelihood, so a
    // start pinned there could never explore the non-degenerate basin
    let low_output = match &init.output {
        OutputKernel::Polynomial(f) => {
            let gvals: Vec<f64> = ctx
                .scaled()
                .eigenvalues()
                .iter()
                .map(|&l| f.evaluate(l))
                .collect();
            let gmax = gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let gmin = gvals.iter().fold(f64::INFINITY, |a, &v| a.min(v));
            let mut c = f.coefficients().to_vec();
            if gmax > 0.0 && gmin < 0.1 * gmax {
                c[0] += 0.1 * gmax - gmin;
            }
            OutputKernel::Polynomial(PolynomialGraphFilter::new(c)?)
        }
        other => other.clone(),
    };
    let low_init = Hyperparameters {
        output: low_output,
        noise_variance: signal_variance / 10.0,
        ..init.clone()
    };
    let alternate = constrained_fit(data, ctx, degree, cfg, &low_init)?;

    let nll_primary = nll_gradient(&primary.hyperparameters, data, ctx)?.nll;
    let nll_alternate = nll_gradient(&alternate.hyperparameters, data, ctx)?.nll;
    let boundary_primary = spectrum_boundary_active(&primary, ctx);
    let boundary_alternate = spectrum_boundary_active(&alternate, ctx);

    let pick_alternate = match (boundary_primary, boundary_alternate) {
        (true, false) => nll_alternate <= nll_primary + INTERIOR_PREFERENCE_NATS,
        (false, true) => !(nll_primary <= nll_alternate + INTERIOR_PREFERENCE_NATS),
        _ => nll_alternate < nll_primary,
    };
    let mut report = if pick_alternate { alternate } else { primary };
    report.initialization = Some(record);
    Ok(report)
}

/// Gradient-ascent fit of a baseline kernel's scalar hyperparameters.
pub fn fit_baseline(
    data: &TrainingSet,
    ctx: &GraphContext,
    kind: BaselineKind,
    input: &InputInit,
    cfg: &OptimizerConfig,
) -> Result<Hyperparameters, FitError> {
    cfg.validate()?;
    let y = data.signals();
    let n = data.num_signals();
    let total = (n * data.num_nodes()) as f64;
    let mean = y.sum() / total;
    let signal_variance = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total;
    if signal_variance <= 0.0 {
        return Err(FitError::DegenerateData("signals have zero variance".into()));
    }
    let lengthscale = (0..n).map(|i| y.row(i).norm_squared()).sum::<f64>() / n as f64;
    let alpha = if kind.takes_alpha() {
        Some(match kind {
            BaselineKind::PStepRandomWalk { .. } => {
                normalized_lambda_max(ctx.graph())? + 1.0
            }
            _ => 1.0,
        })
    } else {
        None
    };
    let input_model = match input {
        InputInit::Identity => InputModel::Identity,
        InputInit::SquaredExponential => InputModel::SquaredExponential(InputKernelConfig::new(
            lengthscale,
            signal_variance,
        )?),
        InputInit::FixedGram(gram) => InputModel::FixedGram {
            gram: gram.clone(),
            scale: signal_variance,
        },
    };
    let init = Hyperparameters {
        output: OutputKernel::Baseline(BaselineGraphKernel::new(kind, alpha, ctx.graph())?),
        input: input_model,
        noise_variance: signal_variance / 10.0,
    };
    unconstrained_fit(data, ctx, cfg, &init)
}

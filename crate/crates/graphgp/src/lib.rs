//! Multi-output Gaussian processes on graph signals with a learned polynomial
//! spectral kernel.
//!
//! The output-space kernel is `B B^T` for a graph filter `B = g(L_S)`, where
//! `g` is a polynomial in the scaled Laplacian `L_S = L / lambda_max(L)` whose
//! coefficients are learned by constrained maximum marginal likelihood. The
//! separable covariance `K (x) BB^T + noise` admits an `O(N^3 + M^3)` solve by
//! simultaneous diagonalization, which both training and prediction use.
//!
//! Modules:
//! - [`graph`]: graph construction, Laplacian variants, eigendecomposition,
//!   graph Fourier transform.
//! - [`kernels`]: polynomial graph filters, the squared-exponential input
//!   kernel, baseline kernels on graphs, Vandermonde constraint matrix.
//! - [`gp`]: marginal likelihood, posterior prediction and scoring with the
//!   Kronecker fast path.
//! - [`learner`]: constrained coefficient learning (dual ascent on the
//!   Lagrangian), gradients, grid-search initialization.
//! - [`synth`]: synthetic filtered-signal generators with SNR-controlled
//!   noise and inverse-Wishart input covariance.
//! - [`io`]: file formats, model persistence, fingerprints.

pub mod gp;
pub mod graph;
pub mod io;
pub mod kernels;
pub mod learner;
pub mod linalg;
pub mod synth;

pub use gp::{
    full_covariance, gaussian_log_density, icm_gram_oracle, kron_solve_and_logdet,
    log_marginal_likelihood, posterior_predict, test_log_likelihood, GpError, GraphContext,
    Hyperparameters, InputModel, KroneckerSolver, OutputKernel, Posterior, TrainingSet,
};
pub use graph::{
    eigendecompose, graph_fourier_transform, knn_graph, random_graph, threshold_graph, Graph,
    GraphError, LaplacianVariant, RandomGraphKind, SpectralDecomposition,
};
pub use kernels::{
    baseline_output_gram, input_kernel_matrix, vandermonde, BaselineGraphKernel, BaselineKind,
    InputKernelConfig, KernelError, PolynomialGraphFilter,
};
pub use learner::{
    constrained_fit, fit_baseline, fit_polynomial, initialize_hyperparameters, lagrangian,
    nll_gradient, unconstrained_fit, FitError, FitReport, Gradient, InitRecord, InputInit,
    LagrangeState, OptimizerConfig, SpectrumHint, TracePoint,
};
pub use synth::{
    add_noise_snr, generate_filtered_signals, generate_wishart_dataset, GroundTruthFilter,
    SyntheticDataset, SynthError,
};
pub use io::{
    atomic_write, graph_fingerprint, read_graph, read_matrix_csv, read_optimizer_config,
    write_graph, write_matrix_csv, write_optimizer_config, IoError, ModelArtifact,
};

//! Graph construction, Laplacian variants, eigendecomposition, and the graph
//! Fourier transform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{is_symmetric, sym_eigh};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency matrix is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("adjacency entry ({i},{j}) = {value} is negative")]
    NegativeWeight { i: usize, j: usize, value: f64 },
    #[error("adjacency diagonal entry {i} is nonzero")]
    NonzeroDiagonal { i: usize },
    #[error("graph needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("node {0} has zero degree; normalized Laplacian undefined")]
    ZeroDegree(usize),
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("matrix is not symmetric")]
    AsymmetricInput,
    #[error("signal length {got} does not match graph size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("graph has zero Laplacian spectrum; scaled variant undefined")]
    DegenerateSpectrum,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coincident coordinate rows {i} and {j}")]
    CoincidentPoints { i: usize, j: usize },
    #[error("failed to generate a connected graph after {0} attempts")]
    Disconnected(usize),
}

/// Weighted undirected graph: symmetric non-negative adjacency with zero
/// diagonal and at least two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

impl Graph {
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = adjacency.shape();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        if rows < 2 {
            return Err(GraphError::TooSmall(rows));
        }
        for i in 0..rows {
            if adjacency[(i, i)] != 0.0 {
                return Err(GraphError::NonzeroDiagonal { i });
            }
            for j in (i + 1)..cols {
                if adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(GraphError::NotSymmetric { i, j });
                }
                if adjacency[(i, j)] < 0.0 {
                    return Err(GraphError::NegativeWeight {
                        i,
                        j,
                        value: adjacency[(i, j)],
                    });
                }
            }
        }
        Ok(Self { adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// Weighted node degrees (row sums of the adjacency).
    pub fn degrees(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.num_nodes(),
            self.adjacency.row_iter().map(|r| r.sum()),
        )
    }

    /// Undirected edges (i < j) with weights.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let m = self.num_nodes();
        let mut out = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if self.adjacency[(i, j)] > 0.0 {
                    out.push((i, j, self.adjacency[(i, j)]));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let m = self.num_nodes();
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..m {
                if !seen[v] && self.adjacency[(u, v)] > 0.0 {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianVariant {
    /// `L = D - A`.
    Combinatorial,
    /// `D^{-1/2} L D^{-1/2}`.
    Normalized,
    /// `L / lambda_max(L)`; eigenvalues span `[0, 1]`.
    Scaled,
}

impl LaplacianVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            LaplacianVariant::Combinatorial => "combinatorial",
            LaplacianVariant::Normalized => "normalized",
            LaplacianVariant::Scaled => "scaled",
        }
    }
}

/// Laplacian matrix of the given variant.
pub fn laplacian(g: &Graph, variant: LaplacianVariant) -> Result<DMatrix<f64>, GraphError> {
    let m = g.num_nodes();
    let degrees = g.degrees();
    let mut l = DMatrix::from_diagonal(&degrees) - g.adjacency();
    match variant {
        LaplacianVariant::Combinatorial => Ok(l),
        LaplacianVariant::Normalized => {
            for (i, d) in degrees.iter().enumerate() {
                if *d <= 0.0 {
                    return Err(GraphError::ZeroDegree(i));
                }
            }
            let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
            for i in 0..m {
                for j in 0..m {
                    l[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
                }
            }
            // re-symmetrize rounding noise
            for i in 0..m {
                for j in (i + 1)..m {
                    let v = 0.5 * (l[(i, j)] + l[(j, i)]);
                    l[(i, j)] = v;
                    l[(j, i)] = v;
                }
            }
            Ok(l)
        }
        LaplacianVariant::Scaled => {
            let (values, _) = sym_eigh(&l).ok_or(GraphError::EigenFailure)?;
            let lambda_max = values[m - 1];
            if lambda_max <= 0.0 {
                return Err(GraphError::DegenerateSpectrum);
            }
            Ok(l / lambda_max)
        }
    }
}

/// Eigendecomposition of a Laplacian with the variant recorded alongside.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    variant: LaplacianVariant,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn variant(&self) -> LaplacianVariant {
        self.variant
    }

    /// Eigenvalues in ascending order, clamped to the variant's valid range.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors; column i pairs with eigenvalue i.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn num_nodes(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Decompose a symmetric Laplacian into `U diag(lambda) U^T`.
///
/// Eigenvalues are sorted ascending and tiny negative excursions are clamped
/// to zero; for the scaled variant values are additionally clamped to `[0,1]`.
pub fn eigendecompose(
    laplacian_matrix: &DMatrix<f64>,
    variant: LaplacianVariant,
) -> Result<SpectralDecomposition, GraphError> {
    if !is_symmetric(laplacian_matrix, 1e-10) {
        return Err(GraphError::AsymmetricInput);
    }
    let (mut values, vectors) = sym_eigh(laplacian_matrix).ok_or(GraphError::EigenFailure)?;
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
        if variant == LaplacianVariant::Scaled && *v > 1.0 {
            *v = 1.0;
        }
    }
    Ok(SpectralDecomposition {
        variant,
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

/// Graph Fourier transform `U^T y`.
pub fn graph_fourier_transform(
    sd: &SpectralDecomposition,
    y: &DVector<f64>,
) -> Result<DVector<f64>, GraphError> {
    if y.len() != sd.num_nodes() {
        return Err(GraphError::DimensionMismatch {
            expected: sd.num_nodes(),
            got: y.len(),
        });
    }
    Ok(sd.eigenvectors.transpose() * y)
}

fn pairwise_distance(coords: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (coords.row(i) - coords.row(j)).norm()
}

/// k-nearest-neighbour graph over coordinate rows.
///
/// An edge is kept when either endpoint selects the other; weights are
/// `exp(-d^2 / (2 sigma^2))` with `sigma` the mean k-NN distance. Ties in
/// distance break by node index.
pub fn knn_graph(coords: &DMatrix<f64>, k: usize) -> Result<Graph, GraphError> {
    let m = coords.nrows();
    if m < 2 {
        return Err(GraphError::TooSmall(m));
    }
    if k == 0 || k >= m {
        return Err(GraphError::InvalidParameter(format!(
            "knn requires 0 < k < num_nodes, got k={k}, nodes={m}"
        )));
    }
    let mut neighbor_dists = Vec::with_capacity(m * k);
    let mut selected = vec![Vec::with_capacity(k); m];
    for i in 0..m {
        let mut order: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            pairwise_distance(coords, i, a)
                .total_cmp(&pairwise_distance(coords, i, b))
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            selected[i].push(j);
            neighbor_dists.push(pairwise_distance(coords, i, j));
        }
    }
    let sigma = neighbor_dists.iter().sum::<f64>() / neighbor_dists.len() as f64;
    if sigma <= 0.0 {
        return Err(GraphError::CoincidentPoints { i: 0, j: 1 });
    }
    let mut adjacency = DMatrix::zeros(m, m);
    for i in 0..m {
        for &j in &selected[i] {
            let d = pairwise_distance(coords, i, j);
            let w = (-d * d / (2.0 * sigma * sigma)).exp();
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    Graph::from_adjacency(adjacency)
}

/// Distance-threshold graph with inverse-distance weights.
pub fn threshold_graph(coords: &DMatrix<f64>, threshold: f64) -> Result<Graph, GraphError> {
    let m = coords.nrows();
    if m < 2 {
        return Err(GraphError::TooSmall(m));
    }
    if threshold <= 0.0 {
        return Err(GraphError::InvalidParameter(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let mut adjacency = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let d = pairwise_distance(coords, i, j);
            if d == 0.0 {
                return Err(GraphError::CoincidentPoints { i, j });
            }
            if d < threshold {
                let w = 1.0 / d;
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
            }
        }
    }
    Graph::from_adjacency(adjacency)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomGraphKind {
    /// Random geometric graph on the unit square with Gaussian edge weights.
    Sensor { nodes: usize },
    /// Preferential attachment starting from a path over the initial core;
    /// every added node connects to `attach` distinct existing nodes.
    BarabasiAlbert {
        nodes: usize,
        initial: usize,
        attach: usize,
    },
}

const CONNECTIVITY_RETRIES: usize = 50;

/// Random graph generator, deterministic under a fixed seed.
///
/// Disconnected draws are retried with a seed-derived stream up to 50 times.
pub fn random_graph(kind: RandomGraphKind, seed: u64) -> Result<Graph, GraphError> {
    match kind {
        RandomGraphKind::Sensor { nodes } => {
            if nodes < 2 {
                return Err(GraphError::TooSmall(nodes));
            }
            for attempt in 0..CONNECTIVITY_RETRIES {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
                let g = sensor_graph(nodes, &mut rng)?;
                if g.is_connected() {
                    return Ok(g);
                }
            }
            Err(GraphError::Disconnected(CONNECTIVITY_RETRIES))
        }
        RandomGraphKind::BarabasiAlbert {
            nodes,
            initial,
            attach,
        } => {
            if initial < 2 || nodes < initial || attach == 0 || attach > initial {
                return Err(GraphError::InvalidParameter(format!(
                    "infeasible BA parameters: nodes={nodes}, initial={initial}, attach={attach}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            barabasi_albert(nodes, initial, attach, &mut rng)
        }
    }
}

fn sensor_graph(nodes: usize, rng: &mut ChaCha8Rng) -> Result<Graph, GraphError> {
    let coords = DMatrix::from_fn(nodes, 2, |_, _| rng.gen::<f64>());
    // Connection radius for geometric graphs; above the sqrt(ln n / n)
    // connectivity threshold so retries stay rare.
    let radius = (2.0 * (nodes as f64).ln() / nodes as f64).sqrt();
    let mut dists = Vec::new();
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            let d = pairwise_distance(&coords, i, j);
            if d > 0.0 && d < radius {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        // no edges at all; caller retries
        return Graph::from_adjacency(DMatrix::zeros(nodes, nodes));
    }
    let sigma = dists.iter().sum::<f64>() / dists.len() as f64;
    let mut adjacency = DMatrix::zeros(nodes, nodes);
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            let d = pairwise_distance(&coords, i, j);
            if d > 0.0 && d < radius {
                let w = (-d * d / (2.0 * sigma * sigma)).exp();
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
            }
        }
    }
    Graph::from_adjacency(adjacency)
}

fn barabasi_albert(
    nodes: usize,
    initial: usize,
    attach: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Graph, GraphError> {
    let mut adjacency = DMatrix::zeros(nodes, nodes);
    // path over the initial core keeps the graph connected from the start
    for i in 0..(initial - 1) {
        adjacency[(i, i + 1)] = 1.0;
        adjacency[(i + 1, i)] = 1.0;
    }
    let mut degree: Vec<f64> = vec![0.0; nodes];
    for i in 0..initial {
        degree[i] = if i == 0 || i == initial - 1 { 1.0 } else { 2.0 };
    }
    for new in initial..nodes {
        let mut targets: Vec<usize> = Vec::with_capacity(attach);
        while targets.len() < attach {
            let total: f64 = degree[..new].iter().sum();
            let mut pick = rng.gen::<f64>() * total;
            let mut chosen = new - 1;
            for (idx, d) in degree[..new].iter().enumerate() {
                pick -= d;
                if pick <= 0.0 {
                    chosen = idx;
                    break;
                }
            }
            if !targets.contains(&chosen) {
                targets.push(chosen);
            }
        }
        for &t in &targets {
            adjacency[(new, t)] = 1.0;
            adjacency[(t, new)] = 1.0;
            degree[t] += 1.0;
            degree[new] += 1.0;
        }
    }
    Graph::from_adjacency(adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn path2() -> Graph {
        Graph::from_adjacency(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap()
    }

    #[test]
    fn combinatorial_laplacian_two_node_path() {
        let l = laplacian(&path2(), LaplacianVariant::Combinatorial).unwrap();
        assert_eq!(l, dmatrix![1.0, -1.0; -1.0, 1.0]);
    }

    #[test]
    fn scaled_laplacian_two_node_path() {
        let l = laplacian(&path2(), LaplacianVariant::Scaled).unwrap();
        assert!((l - dmatrix![0.5, -0.5; -0.5, 0.5]).abs().max() < 1e-12);
    }

    #[test]
    fn scaled_sensor_graph_eigen_range() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 30 }, 3).unwrap();
        let l = laplacian(&g, LaplacianVariant::Scaled).unwrap();
        let sd = eigendecompose(&l, LaplacianVariant::Scaled).unwrap();
        let vals = sd.eigenvalues();
        assert!(vals[0].abs() <= 1e-8);
        assert!((vals[29] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn eigendecompose_two_node_path() {
        let l = dmatrix![1.0, -1.0; -1.0, 1.0];
        let sd = eigendecompose(&l, LaplacianVariant::Combinatorial).unwrap();
        assert!((sd.eigenvalues()[0] - 0.0).abs() < 1e-12);
        assert!((sd.eigenvalues()[1] - 2.0).abs() < 1e-12);
        let s = 1.0 / 2.0_f64.sqrt();
        let u = sd.eigenvectors();
        assert!((u[(0, 0)].abs() - s).abs() < 1e-12);
        assert!((u[(0, 1)].abs() - s).abs() < 1e-12);
        // columns orthonormal
        let gram = u.transpose() * u;
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }

    #[test]
    fn eigendecompose_scaled_two_node() {
        let l = dmatrix![0.5, -0.5; -0.5, 0.5];
        let sd = eigendecompose(&l, LaplacianVariant::Scaled).unwrap();
        assert!(sd.eigenvalues()[0].abs() < 1e-12);
        assert!((sd.eigenvalues()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigendecompose_reconstructs_random_laplacian() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 10 }, 11).unwrap();
        let l = laplacian(&g, LaplacianVariant::Combinatorial).unwrap();
        let sd = eigendecompose(&l, LaplacianVariant::Combinatorial).unwrap();
        let rebuilt = sd.eigenvectors()
            * DMatrix::from_diagonal(sd.eigenvalues())
            * sd.eigenvectors().transpose();
        assert!((rebuilt - l).abs().max() <= 1e-6);
    }

    #[test]
    fn eigendecompose_rejects_asymmetric() {
        let m = dmatrix![1.0, 2.0; 0.0, 1.0];
        assert!(matches!(
            eigendecompose(&m, LaplacianVariant::Combinatorial),
            Err(GraphError::AsymmetricInput)
        ));
    }

    #[test]
    fn normalized_laplacian_rejects_isolated_node() {
        let g = Graph::from_adjacency(dmatrix![
            0.0, 1.0, 0.0;
            1.0, 0.0, 0.0;
            0.0, 0.0, 0.0
        ])
        .unwrap();
        assert!(matches!(
            laplacian(&g, LaplacianVariant::Normalized),
            Err(GraphError::ZeroDegree(2))
        ));
    }

    #[test]
    fn gft_of_eigenvector_is_unit_vector() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 8 }, 5).unwrap();
        let l = laplacian(&g, LaplacianVariant::Scaled).unwrap();
        let sd = eigendecompose(&l, LaplacianVariant::Scaled).unwrap();
        let v2: DVector<f64> = sd.eigenvectors().column(2).into();
        let coeffs = graph_fourier_transform(&sd, &v2).unwrap();
        for (i, c) in coeffs.iter().enumerate() {
            let expected = if i == 2 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-10);
        }
        let zero = graph_fourier_transform(&sd, &DVector::zeros(8)).unwrap();
        assert_eq!(zero, DVector::zeros(8));
    }

    #[test]
    fn gft_preserves_norm() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 30 }, 17).unwrap();
        let l = laplacian(&g, LaplacianVariant::Scaled).unwrap();
        let sd = eigendecompose(&l, LaplacianVariant::Scaled).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = DVector::from_fn(30, |_, _| rng.gen::<f64>() - 0.5);
        let c = graph_fourier_transform(&sd, &y).unwrap();
        assert!((c.norm() - y.norm()).abs() < 1e-10);
    }

    #[test]
    fn gft_dimension_mismatch() {
        let g = path2();
        let l = laplacian(&g, LaplacianVariant::Combinatorial).unwrap();
        let sd = eigendecompose(&l, LaplacianVariant::Combinatorial).unwrap();
        assert!(graph_fourier_transform(&sd, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn knn_three_collinear_points() {
        let coords = dmatrix![0.0; 1.0; 3.0];
        let g = knn_graph(&coords, 1).unwrap();
        // middle node picks nearest endpoint (node 0); endpoints pick middle
        assert!(g.adjacency()[(0, 1)] > 0.0);
        assert!(g.adjacency()[(1, 2)] > 0.0); // node 2's nearest is node 1
        assert_eq!(g.adjacency()[(0, 2)], 0.0);
    }

    #[test]
    fn knn_unit_square_excludes_diagonals() {
        let coords = dmatrix![0.0, 0.0; 1.0, 0.0; 1.0, 1.0; 0.0, 1.0];
        let g = knn_graph(&coords, 2).unwrap();
        // brute-force ranking: sides (distance 1) beat diagonals (sqrt 2)
        assert!(g.adjacency()[(0, 1)] > 0.0);
        assert!(g.adjacency()[(1, 2)] > 0.0);
        assert!(g.adjacency()[(2, 3)] > 0.0);
        assert!(g.adjacency()[(3, 0)] > 0.0);
        assert_eq!(g.adjacency()[(0, 2)], 0.0);
        assert_eq!(g.adjacency()[(1, 3)], 0.0);
    }

    #[test]
    fn knn_complete_graph_when_k_is_m_minus_1() {
        let coords = dmatrix![0.0, 0.0; 1.0, 0.2; 2.0, 0.9; 0.5, 2.0];
        let g = knn_graph(&coords, 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(g.adjacency()[(i, j)] > 0.0);
                }
            }
        }
    }

    #[test]
    fn knn_rejects_bad_k() {
        let coords = dmatrix![0.0; 1.0; 2.0];
        assert!(knn_graph(&coords, 0).is_err());
        assert!(knn_graph(&coords, 3).is_err());
    }

    #[test]
    fn threshold_graph_single_edge() {
        let coords = dmatrix![0.0; 2.0];
        let g = threshold_graph(&coords, 3.0).unwrap();
        assert!((g.adjacency()[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn threshold_graph_empty_when_far() {
        let coords = dmatrix![0.0; 4.0];
        let g = threshold_graph(&coords, 3.0).unwrap();
        assert_eq!(g.adjacency()[(0, 1)], 0.0);
    }

    #[test]
    fn threshold_graph_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coords = DMatrix::from_fn(5, 2, |_, _| rng.gen::<f64>());
        let t = 0.6;
        let g = threshold_graph(&coords, t).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    continue;
                }
                let d = (coords.row(i) - coords.row(j)).norm();
                let expected = if d < t { 1.0 / d } else { 0.0 };
                assert!((g.adjacency()[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn threshold_graph_rejects_coincident_points() {
        let coords = dmatrix![1.0, 1.0; 1.0, 1.0; 0.0, 0.0];
        assert!(matches!(
            threshold_graph(&coords, 2.0),
            Err(GraphError::CoincidentPoints { i: 0, j: 1 })
        ));
    }

    #[test]
    fn ba_graph_edge_count_and_degrees() {
        let kind = RandomGraphKind::BarabasiAlbert {
            nodes: 30,
            initial: 10,
            attach: 5,
        };
        let g = random_graph(kind, 4).unwrap();
        let core_edges = 9; // path over the 10 initial nodes
        assert_eq!(g.edges().len(), 20 * 5 + core_edges);
        for node in 10..30 {
            let neighbors = (0..30).filter(|&j| g.adjacency()[(node, j)] > 0.0).count();
            assert!(neighbors >= 5);
        }
        assert!(g.is_connected());
    }

    #[test]
    fn sensor_graph_deterministic_and_connected() {
        let a = random_graph(RandomGraphKind::Sensor { nodes: 30 }, 7).unwrap();
        let b = random_graph(RandomGraphKind::Sensor { nodes: 30 }, 7).unwrap();
        assert_eq!(a.adjacency(), b.adjacency());
        assert!(a.is_connected());
    }

    #[test]
    fn combinatorial_row_sums_are_zero_and_psd() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 12 }, 21).unwrap();
        let l = laplacian(&g, LaplacianVariant::Combinatorial).unwrap();
        for row in l.row_iter() {
            assert!(row.sum().abs() < 1e-10);
        }
        let (vals, _) = sym_eigh(&l).unwrap();
        assert!(vals[0] >= -1e-8);
    }

    #[test]
    fn graph_validation_errors() {
        assert!(matches!(
            Graph::from_adjacency(dmatrix![0.0, 1.0; 2.0, 0.0]),
            Err(GraphError::NotSymmetric { .. })
        ));
        assert!(matches!(
            Graph::from_adjacency(dmatrix![0.0, -1.0; -1.0, 0.0]),
            Err(GraphError::NegativeWeight { .. })
        ));
        assert!(matches!(
            Graph::from_adjacency(dmatrix![1.0, 0.5; 0.5, 0.0]),
            Err(GraphError::NonzeroDiagonal { .. })
        ));
        assert!(matches!(
            Graph::from_adjacency(DMatrix::zeros(1, 1)),
            Err(GraphError::TooSmall(1))
        ));
    }
}

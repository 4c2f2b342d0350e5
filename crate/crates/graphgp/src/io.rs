//! File formats: edge lists for graphs, CSV for signals and inputs, flat
//! key-value optimizer configs, and the versioned model artifact. All writes
//! go through a temp-file rename so partially written files never appear,
//! and floats are encoded with 17 significant digits so round-trips are
//! bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gp::{GpError, Hyperparameters, InputModel, OutputKernel};
use crate::graph::{Graph, GraphError};
use crate::kernels::{
    BaselineGraphKernel, BaselineKind, InputKernelConfig, KernelError, PolynomialGraphFilter,
};
use crate::learner::OptimizerConfig;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure on {path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// 17 significant digits: enough to reconstruct any f64 exactly.
pub fn encode_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64, IoError> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(path, line, format!("bad float {s:?}: {e}")))
}

/// Writes to a sibling temp file and renames it into place.
pub fn atomic_write(path: &Path, content: &str) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| format_err(path, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, content).map_err(|e| file_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| file_err(path, e))
}

// ----- graphs ---------------------------------------------------------------

/// Canonical edge-list text: a `nodes M` header followed by one `u v w` line
/// per undirected edge with u < v, ordered lexicographically.
pub fn graph_to_edge_list(g: &Graph) -> String {
    let mut out = format!("nodes {}\n", g.num_nodes());
    for (u, v, w) in g.edges() {
        let _ = writeln!(out, "{u} {v} {}", encode_f64(w));
    }
    out
}

/// Hex SHA-256 of the canonical edge list; identifies a graph independent of
/// the file it came from.
pub fn graph_fingerprint(g: &Graph) -> String {
    let mut hasher = Sha256::new();
    hasher.update(graph_to_edge_list(g).as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_graph(path: &Path, g: &Graph) -> Result<(), IoError> {
    atomic_write(path, &graph_to_edge_list(g))
}

/// Reads the edge-list format written by [`write_graph`]. Blank lines and
/// lines starting with `#` are ignored.
pub fn read_graph(path: &Path) -> Result<Graph, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut nodes: Option<usize> = None;
    let mut adjacency: Option<DMatrix<f64>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("nodes ") {
            if nodes.is_some() {
                return Err(parse_err(path, lineno, "duplicate nodes header"));
            }
            let m: usize = rest
                .trim()
                .parse()
                .map_err(|e| parse_err(path, lineno, format!("bad node count: {e}")))?;
            nodes = Some(m);
            adjacency = Some(DMatrix::zeros(m, m));
            continue;
        }
        let adj = adjacency
            .as_mut()
            .ok_or_else(|| parse_err(path, lineno, "edge before nodes header"))?;
        let m = nodes.unwrap();
        let mut parts = line.split_whitespace();
        let (u, v, w) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(v), Some(w), None) => (u, v, w),
            _ => return Err(parse_err(path, lineno, "expected `u v w`")),
        };
        let u: usize = u
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad node index: {e}")))?;
        let v: usize = v
            .parse()
            .map_err(|e| parse_err(path, lineno, format!("bad node index: {e}")))?;
        if u >= m || v >= m {
            return Err(parse_err(path, lineno, format!("node index out of range (nodes {m})")));
        }
        let w = parse_f64(path, lineno, w)?;
        adj[(u, v)] = w;
        adj[(v, u)] = w;
    }
    let adjacency = adjacency.ok_or_else(|| format_err(path, "missing nodes header"))?;
    Ok(Graph::from_adjacency(adjacency)?)
}

// ----- matrices as CSV ------------------------------------------------------

/// CSV with columns named `{prefix}_0..{prefix}_{cols-1}`, one row per line.
pub fn matrix_to_csv(m: &DMatrix<f64>, prefix: &str) -> String {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}_{j}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| encode_f64(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, prefix: &str) -> Result<(), IoError> {
    atomic_write(path, &matrix_to_csv(m, prefix))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?;
    let cols = header.split(',').count();
    if cols == 0 {
        return Err(format_err(path, "empty header"));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut nrows = 0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(parse_err(
                path,
                idx + 1,
                format!("expected {cols} fields, found {}", fields.len()),
            ));
        }
        for f in fields {
            rows.push(parse_f64(path, idx + 1, f)?);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, cols, &rows))
}

// ----- flat key-value config ------------------------------------------------

/// Parses `key = value` lines; `#` starts a comment.
pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, idx + 1, "expected `key = value`"))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn key_values_to_string(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn optimizer_config_to_key_values(cfg: &OptimizerConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("gamma_beta".into(), encode_f64(cfg.gamma_beta));
    map.insert("gamma_lagrange".into(), encode_f64(cfg.gamma_lagrange));
    map.insert("gamma_lengthscale".into(), encode_f64(cfg.gamma_lengthscale));
    map.insert("gamma_noise".into(), encode_f64(cfg.gamma_noise));
    map.insert("max_outer".into(), cfg.max_outer.to_string());
    map.insert("inner_steps".into(), cfg.inner_steps.to_string());
    map.insert("tolerance".into(), encode_f64(cfg.tolerance));
    map.insert(
        "unconstrained_iters".into(),
        cfg.unconstrained_iters.to_string(),
    );
    map.insert("grid_limit".into(), cfg.grid_limit.to_string());
    map.insert("grid_seed".into(), cfg.grid_seed.to_string());
    map
}

/// Applies recognized keys on top of a starting config; unknown keys error.
pub fn optimizer_config_from_key_values(
    base: &OptimizerConfig,
    map: &BTreeMap<String, String>,
    path: &Path,
) -> Result<OptimizerConfig, IoError> {
    let mut cfg = base.clone();
    for (k, v) in map {
        let bad = |e: String| parse_err(path, 0, format!("key {k}: {e}"));
        match k.as_str() {
            "gamma_beta" => cfg.gamma_beta = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "gamma_lagrange" => cfg.gamma_lagrange = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "gamma_lengthscale" => cfg.gamma_lengthscale = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "gamma_noise" => cfg.gamma_noise = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "tolerance" => cfg.tolerance = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
            "max_outer" => cfg.max_outer = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "inner_steps" => cfg.inner_steps = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "unconstrained_iters" => cfg.unconstrained_iters = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "grid_limit" => cfg.grid_limit = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "grid_seed" => cfg.grid_seed = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            other => {
                return Err(parse_err(path, 0, format!("unknown config key {other:?}")))
            }
        }
    }
    Ok(cfg)
}

pub fn write_optimizer_config(path: &Path, cfg: &OptimizerConfig) -> Result<(), IoError> {
    atomic_write(path, &key_values_to_string(&optimizer_config_to_key_values(cfg)))
}

pub fn read_optimizer_config(path: &Path) -> Result<OptimizerConfig, IoError> {
    let map = read_key_values(path)?;
    optimizer_config_from_key_values(&OptimizerConfig::default(), &map, path)
}

// ----- model artifact -------------------------------------------------------

const ARTIFACT_MAGIC: &str = "graphgp-model";
const ARTIFACT_VERSION: u32 = 1;
const VECTORIZATION_TAG: &str = "node-fastest";

/// Everything needed to reconstruct a trained model against a known graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub version: u32,
    pub graph_fingerprint: String,
    pub hyperparameters: Hyperparameters,
}

impl ModelArtifact {
    pub fn new(graph: &Graph, hyperparameters: Hyperparameters) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            graph_fingerprint: graph_fingerprint(graph),
            hyperparameters,
        }
    }

    pub fn matches_graph(&self, graph: &Graph) -> bool {
        self.graph_fingerprint == graph_fingerprint(graph)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{ARTIFACT_MAGIC} v{}\n", self.version);
        let _ = writeln!(out, "graph_fingerprint {}", self.graph_fingerprint);
        let _ = writeln!(out, "vectorization {VECTORIZATION_TAG}");
        let _ = writeln!(
            out,
            "noise_variance {}",
            encode_f64(self.hyperparameters.noise_variance)
        );
        match &self.hyperparameters.output {
            OutputKernel::Polynomial(f) => {
                let coeffs: Vec<String> =
                    f.coefficients().iter().map(|&c| encode_f64(c)).collect();
                let _ = writeln!(out, "output polynomial {}", coeffs.join(" "));
            }
            OutputKernel::Baseline(b) => {
                let _ = write!(out, "output baseline {}", b.kind.name());
                if let BaselineKind::PStepRandomWalk { p } = b.kind {
                    let _ = write!(out, " p={p}");
                }
                if let Some(a) = b.alpha {
                    let _ = write!(out, " alpha={}", encode_f64(a));
                }
                out.push('\n');
            }
        }
        match &self.hyperparameters.input {
            InputModel::Identity => {
                let _ = writeln!(out, "input identity");
            }
            InputModel::SquaredExponential(cfg) => {
                let _ = writeln!(
                    out,
                    "input squared-exponential {} {}",
                    encode_f64(cfg.lengthscale),
                    encode_f64(cfg.variance)
                );
            }
            InputModel::FixedGram { gram, scale } => {
                let _ = writeln!(out, "input fixed-gram {} {}", gram.nrows(), encode_f64(*scale));
                for i in 0..gram.nrows() {
                    let row: Vec<String> =
                        (0..gram.ncols()).map(|j| encode_f64(gram[(i, j)])).collect();
                    let _ = writeln!(out, "{}", row.join(" "));
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        atomic_write(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        Self::from_text(&text, path)
    }

    fn from_text(text: &str, path: &Path) -> Result<Self, IoError> {
        let mut lines = text.lines().enumerate().peekable();
        let (_, first) = lines
            .next()
            .ok_or_else(|| format_err(path, "empty artifact"))?;
        let version = first
            .strip_prefix(ARTIFACT_MAGIC)
            .and_then(|rest| rest.trim().strip_prefix('v'))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| format_err(path, "not a model artifact"))?;
        if version != ARTIFACT_VERSION {
            return Err(format_err(
                path,
                format!("unsupported artifact version {version}"),
            ));
        }

        let mut fingerprint = None;
        let mut noise = None;
        let mut output = None;
        let mut input = None;
        while let Some((idx, raw)) = lines.next() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line
                .split_once(' ')
                .ok_or_else(|| parse_err(path, lineno, "expected `key value`"))?;
            match key {
                "graph_fingerprint" => fingerprint = Some(rest.trim().to_string()),
                "vectorization" => {
                    if rest.trim() != VECTORIZATION_TAG {
                        return Err(parse_err(
                            path,
                            lineno,
                            format!("unknown vectorization {rest:?}"),
                        ));
                    }
                }
                "noise_variance" => noise = Some(parse_f64(path, lineno, rest)?),
                "output" => {
                    let mut parts = rest.split_whitespace();
                    match parts.next() {
                        Some("polynomial") => {
                            let coeffs: Vec<f64> = parts
                                .map(|s| parse_f64(path, lineno, s))
                                .collect::<Result<_, _>>()?;
                            if coeffs.is_empty() {
                                return Err(parse_err(path, lineno, "polynomial needs coefficients"));
                            }
                            output = Some(OutputKernel::Polynomial(PolynomialGraphFilter::new(
                                coeffs,
                            )?));
                        }
                        Some("baseline") => {
                            let name = parts
                                .next()
                                .ok_or_else(|| parse_err(path, lineno, "baseline needs a kind"))?;
                            let mut p = None;
                            let mut alpha = None;
                            for extra in parts {
                                if let Some(v) = extra.strip_prefix("p=") {
                                    p = Some(v.parse::<usize>().map_err(|e| {
                                        parse_err(path, lineno, format!("bad p: {e}"))
                                    })?);
                                } else if let Some(v) = extra.strip_prefix("alpha=") {
                                    alpha = Some(parse_f64(path, lineno, v)?);
                                } else {
                                    return Err(parse_err(
                                        path,
                                        lineno,
                                        format!("unknown baseline field {extra:?}"),
                                    ));
                                }
                            }
                            let kind = baseline_kind_from_name(name, p)
                                .ok_or_else(|| parse_err(path, lineno, format!("unknown baseline kind {name:?}")))?;
                            // skip graph validation here; the caller checks
                            // the fingerprint against its graph anyway
                            output = Some(OutputKernel::Baseline(BaselineGraphKernel {
                                kind,
                                alpha,
                            }));
                        }
                        _ => return Err(parse_err(path, lineno, "unknown output kernel")),
                    }
                }
                "input" => {
                    let mut parts = rest.split_whitespace();
                    match parts.next() {
                        Some("identity") => input = Some(InputModel::Identity),
                        Some("squared-exponential") => {
                            let l = parts
                                .next()
                                .ok_or_else(|| parse_err(path, lineno, "missing lengthscale"))?;
                            let v = parts
                                .next()
                                .ok_or_else(|| parse_err(path, lineno, "missing variance"))?;
                            input = Some(InputModel::SquaredExponential(InputKernelConfig::new(
                                parse_f64(path, lineno, l)?,
                                parse_f64(path, lineno, v)?,
                            )?));
                        }
                        Some("fixed-gram") => {
                            let n: usize = parts
                                .next()
                                .and_then(|s| s.parse().ok())
                                .ok_or_else(|| parse_err(path, lineno, "missing gram size"))?;
                            let scale = parse_f64(
                                path,
                                lineno,
                                parts
                                    .next()
                                    .ok_or_else(|| parse_err(path, lineno, "missing scale"))?,
                            )?;
                            let mut gram = DMatrix::zeros(n, n);
                            for i in 0..n {
                                let (ridx, row) = lines.next().ok_or_else(|| {
                                    format_err(path, "truncated fixed-gram block")
                                })?;
                                let vals: Vec<f64> = row
                                    .split_whitespace()
                                    .map(|s| parse_f64(path, ridx + 1, s))
                                    .collect::<Result<_, _>>()?;
                                if vals.len() != n {
                                    return Err(parse_err(
                                        path,
                                        ridx + 1,
                                        format!("expected {n} values, found {}", vals.len()),
                                    ));
                                }
                                for (j, v) in vals.into_iter().enumerate() {
                                    gram[(i, j)] = v;
                                }
                            }
                            input = Some(InputModel::FixedGram { gram, scale });
                        }
                        _ => return Err(parse_err(path, lineno, "unknown input model")),
                    }
                }
                other => return Err(parse_err(path, lineno, format!("unknown key {other:?}"))),
            }
        }

        let hyperparameters = Hyperparameters::new(
            output.ok_or_else(|| format_err(path, "missing output kernel"))?,
            input.ok_or_else(|| format_err(path, "missing input model"))?,
            noise.ok_or_else(|| format_err(path, "missing noise variance"))?,
        )?;
        Ok(Self {
            version,
            graph_fingerprint: fingerprint
                .ok_or_else(|| format_err(path, "missing graph fingerprint"))?,
            hyperparameters,
        })
    }
}

pub fn baseline_kind_from_name(name: &str, p: Option<usize>) -> Option<BaselineKind> {
    Some(match name {
        "standard" => BaselineKind::Standard,
        "global-filtering" => BaselineKind::GlobalFiltering,
        "local-averaging" => BaselineKind::LocalAveraging,
        "laplacian-pseudoinverse" => BaselineKind::LaplacianPseudoinverse,
        "regularized-laplacian" => BaselineKind::RegularizedLaplacian,
        "diffusion" => BaselineKind::Diffusion,
        "p-step-random-walk" => BaselineKind::PStepRandomWalk { p: p? },
        "cosine" => BaselineKind::Cosine,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{posterior_predict, GraphContext, TrainingSet};
    use crate::graph::{random_graph, RandomGraphKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    fn tmp_path(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("graphgp-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn float_encoding_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v: f64 = (rng.gen::<f64>() - 0.5) * 10f64.powi(rng.gen_range(-30..30));
            let back: f64 = encode_f64(v).parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v}");
        }
        for v in [0.0, -0.0, f64::MIN_POSITIVE, f64::MAX] {
            let back: f64 = encode_f64(v).parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits());
        }
    }

    #[test]
    fn graph_round_trip_preserves_adjacency_and_fingerprint() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 14 }, 5).unwrap();
        let path = tmp_path("graph.txt");
        write_graph(&path, &g).unwrap();
        let back = read_graph(&path).unwrap();
        assert_eq!(g.adjacency(), back.adjacency());
        assert_eq!(graph_fingerprint(&g), graph_fingerprint(&back));
    }

    #[test]
    fn graph_reader_accepts_comments_and_rejects_garbage() {
        let path = tmp_path("commented.txt");
        atomic_write(
            &path,
            "# a triangle\nnodes 3\n0 1 1.0\n\n1 2 2.0\n0 2 0.5\n",
        )
        .unwrap();
        let g = read_graph(&path).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.adjacency()[(1, 2)], 2.0);

        let bad = tmp_path("bad.txt");
        atomic_write(&bad, "nodes 3\n0 5 1.0\n").unwrap();
        assert!(matches!(read_graph(&bad), Err(IoError::Parse { .. })));
    }

    #[test]
    fn fingerprint_distinguishes_weights() {
        let g1 = random_graph(RandomGraphKind::Sensor { nodes: 10 }, 1).unwrap();
        let mut adj = g1.adjacency().clone();
        let (u, v, w) = g1.edges()[0];
        adj[(u, v)] = w * 2.0;
        adj[(v, u)] = w * 2.0;
        let g2 = Graph::from_adjacency(adj).unwrap();
        assert_ne!(graph_fingerprint(&g1), graph_fingerprint(&g2));
    }

    #[test]
    fn matrix_csv_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DMatrix::from_fn(7, 5, |_, _| (rng.gen::<f64>() - 0.5) * 1e8);
        let path = tmp_path("signals.csv");
        write_matrix_csv(&path, &m, "node").unwrap();
        let back = read_matrix_csv(&path).unwrap();
        assert_eq!(m.shape(), back.shape());
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("node_0,node_1"));
    }

    #[test]
    fn optimizer_config_round_trip() {
        let cfg = OptimizerConfig {
            gamma_beta: 0.37,
            max_outer: 123,
            grid_seed: 42,
            ..OptimizerConfig::default()
        };
        let path = tmp_path("opt.cfg");
        write_optimizer_config(&path, &cfg).unwrap();
        let back = read_optimizer_config(&path).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn optimizer_config_rejects_unknown_keys() {
        let path = tmp_path("bad.cfg");
        atomic_write(&path, "gamma_beta = 0.5\nwhatever = 1\n").unwrap();
        assert!(matches!(
            read_optimizer_config(&path),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn artifact_round_trip_gives_identical_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_graph(RandomGraphKind::Sensor { nodes: 8 }, 17).unwrap();
        let ctx = GraphContext::new(g.clone()).unwrap();
        let n = 5;
        let x = DMatrix::from_fn(n, 1, |i, _| i as f64 * 0.3);
        let y = DMatrix::from_fn(n, 8, |_, _| rng.gen::<f64>() - 0.5);
        let data = TrainingSet::new(x.clone(), y).unwrap();
        let h = Hyperparameters::new(
            OutputKernel::Polynomial(PolynomialGraphFilter::new(vec![0.8, -0.3, 0.1]).unwrap()),
            InputModel::SquaredExponential(InputKernelConfig::new(0.7, 1.0).unwrap()),
            0.05,
        )
        .unwrap();
        let artifact = ModelArtifact::new(&g, h.clone());
        let path = tmp_path("model.txt");
        artifact.save(&path).unwrap();
        let loaded = ModelArtifact::load(&path).unwrap();
        assert!(loaded.matches_graph(&g));

        let x_star = DMatrix::from_fn(3, 1, |i, _| 0.15 + i as f64 * 0.4);
        let a = posterior_predict(&h, &data, &ctx, &x_star).unwrap();
        let b = posterior_predict(&loaded.hyperparameters, &data, &ctx, &x_star).unwrap();
        let mean_diff = (&a.mean - &b.mean).amax();
        let cov_diff = (&a.covariance - &b.covariance).amax();
        assert!(mean_diff <= 1e-12, "mean diff {mean_diff}");
        assert!(cov_diff <= 1e-12, "cov diff {cov_diff}");
    }

    #[test]
    fn artifact_round_trips_every_kernel_shape() {
        let g = random_graph(RandomGraphKind::Sensor { nodes: 6 }, 2).unwrap();
        let lmax = crate::kernels::normalized_lambda_max(&g).unwrap();
        let gram = DMatrix::identity(4, 4) * 1.5;
        let cases = vec![
            Hyperparameters::new(
                OutputKernel::Baseline(
                    BaselineGraphKernel::new(BaselineKind::Standard, None, &g).unwrap(),
                ),
                InputModel::Identity,
                0.2,
            )
            .unwrap(),
            Hyperparameters::new(
                OutputKernel::Baseline(
                    BaselineGraphKernel::new(
                        BaselineKind::PStepRandomWalk { p: 2 },
                        Some(lmax + 0.5),
                        &g,
                    )
                    .unwrap(),
                ),
                InputModel::FixedGram { gram, scale: 2.25 },
                0.3,
            )
            .unwrap(),
            Hyperparameters::new(
                OutputKernel::Polynomial(PolynomialGraphFilter::new(vec![1.0, -0.5]).unwrap()),
                InputModel::Identity,
                0.1,
            )
            .unwrap(),
        ];
        for (i, h) in cases.into_iter().enumerate() {
            let artifact = ModelArtifact::new(&g, h);
            let path = tmp_path(&format!("model_{i}.txt"));
            artifact.save(&path).unwrap();
            let loaded = ModelArtifact::load(&path).unwrap();
            assert_eq!(artifact, loaded, "case {i}");
        }
    }

    #[test]
    fn artifact_rejects_bad_version_and_missing_fields() {
        let path = tmp_path("bad_model.txt");
        atomic_write(&path, "graphgp-model v99\n").unwrap();
        assert!(matches!(
            ModelArtifact::load(&path),
            Err(IoError::Format { .. })
        ));
        atomic_write(&path, "graphgp-model v1\ninput identity\n").unwrap();
        assert!(ModelArtifact::load(&path).is_err());
    }
}

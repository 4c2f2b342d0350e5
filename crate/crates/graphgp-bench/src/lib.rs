//! Shared fixtures for the criterion benchmarks.

use graphgp::gp::{GraphContext, TrainingSet};
use graphgp::graph::{random_graph, RandomGraphKind};
use graphgp::synth::{generate_filtered_signals, GroundTruthFilter};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

/// A deterministic sensor-graph regression problem of the given size.
pub fn fixture(nodes: usize, signals: usize, seed: u64) -> (GraphContext, TrainingSet) {
    let graph = random_graph(RandomGraphKind::Sensor { nodes }, seed).unwrap();
    let ctx = GraphContext::new(graph).unwrap();
    let truth = GroundTruthFilter::low_pass_taylor();
    let ds = generate_filtered_signals(ctx.graph(), &truth, signals, 10.0, seed + 1).unwrap();
    let data = TrainingSet::new(ds.inputs().clone(), ds.signals().clone()).unwrap();
    (ctx, data)
}

/// A random symmetric positive-definite matrix with unit diagonal loading.
pub fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n)
}

//! Deterministic construction of graphs, cohorts and frames, shared by the
//! test suites, the synthetic experiments and the demo data generator. All
//! randomness flows through a caller-supplied seeded generator.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::NodeSignal;
use crate::graph::AdjacencyMatrix;
use crate::stiefel::StiefelPoint;

/// Two nodes joined by one edge.
pub fn two_node_graph(weight: f64) -> AdjacencyMatrix {
    let w = DMatrix::from_row_slice(2, 2, &[0.0, weight, weight, 0.0]);
    AdjacencyMatrix::new(w).expect("two-node graph is always valid")
}

/// Unweighted path 0-1-...-(n-1).
pub fn path_graph(n: usize) -> AdjacencyMatrix {
    assert!(n >= 1, "path graph needs at least one node");
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        w[(i, i + 1)] = 1.0;
        w[(i + 1, i)] = 1.0;
    }
    AdjacencyMatrix::new(w).expect("path graph is always valid")
}

/// Complete graph with uniform edge weight.
pub fn complete_graph(n: usize, weight: f64) -> AdjacencyMatrix {
    assert!(n >= 1, "complete graph needs at least one node");
    let mut w = DMatrix::from_element(n, n, weight);
    for i in 0..n {
        w[(i, i)] = 0.0;
    }
    AdjacencyMatrix::new(w).expect("complete graph is always valid")
}

fn random_weight(rng: &mut impl Rng) -> f64 {
    rng.random_range(0.2..1.2)
}

/// Connected weighted graph: a random recursive tree guarantees
/// connectivity, then each remaining pair gains an edge with probability
/// `density`.
pub fn random_connected_graph(n: usize, density: f64, rng: &mut impl Rng) -> AdjacencyMatrix {
    assert!(n >= 1, "graph needs at least one node");
    let mut w = DMatrix::zeros(n, n);
    for i in 1..n {
        let parent = rng.random_range(0..i);
        let weight = random_weight(rng);
        w[(i, parent)] = weight;
        w[(parent, i)] = weight;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] == 0.0 && rng.random_bool(density) {
                let weight = random_weight(rng);
                w[(i, j)] = weight;
                w[(j, i)] = weight;
            }
        }
    }
    AdjacencyMatrix::new(w).expect("sampled weights are valid")
}

/// Stochastic block model with `blocks` equal-sized communities: edge
/// probability `p_in` within a block, `p_out` across. Resamples until the
/// graph is connected.
///
/// Panics when 1000 attempts all come out disconnected, which indicates
/// parameters that cannot plausibly produce a connected graph.
pub fn stochastic_block_graph(
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut impl Rng,
) -> AdjacencyMatrix {
    assert!(n >= 1 && blocks >= 1 && blocks <= n);
    for _ in 0..1000 {
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let same = i * blocks / n == j * blocks / n;
                let probability = if same { p_in } else { p_out };
                if rng.random_bool(probability) {
                    let weight = random_weight(rng);
                    w[(i, j)] = weight;
                    w[(j, i)] = weight;
                }
            }
        }
        let adjacency = AdjacencyMatrix::new(w).expect("sampled weights are valid");
        if adjacency.is_connected() {
            return adjacency;
        }
    }
    panic!("no connected stochastic block sample in 1000 attempts (n = {n}, p_in = {p_in}, p_out = {p_out})");
}

/// Cohort of subject networks sharing one block structure: every subject
/// keeps the base graph's edges and multiplies each weight by an
/// independent log-normal factor exp(jitter * N(0,1)). The shared support
/// keeps every member connected.
pub fn stochastic_block_cohort(
    subjects: usize,
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    jitter: f64,
    rng: &mut impl Rng,
) -> Vec<AdjacencyMatrix> {
    let base = stochastic_block_graph(n, blocks, p_in, p_out, rng);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..subjects)
        .map(|_| {
            let mut w = base.weights().clone();
            for i in 0..n {
                for j in (i + 1)..n {
                    if w[(i, j)] > 0.0 {
                        let factor = (jitter * normal.sample(rng)).exp();
                        w[(i, j)] *= factor;
                        w[(j, i)] = w[(i, j)];
                    }
                }
            }
            AdjacencyMatrix::new(w).expect("jittered weights stay valid")
        })
        .collect()
}

/// Cohort of modular weighted networks with a designed spectral gap: the
/// base graph is complete, with weight `in_weight` inside each of
/// `blocks` near-equal communities and `cross_weight` elsewhere; every
/// subject multiplies each edge by an independent log-normal factor
/// exp(jitter * N(0,1)).
///
/// Before jitter the Laplacian spectrum is exact: the constant mode at 0,
/// blocks - 1 community-contrast modes at n * cross_weight, and within-
/// community modes at size * in_weight + n * cross_weight. Choosing
/// p = blocks therefore places a wide eigenvalue gap at the subspace
/// boundary, which keeps the per-subject refinement contraction strong at
/// any cohort size.
pub fn modular_weighted_cohort(
    subjects: usize,
    n: usize,
    blocks: usize,
    in_weight: f64,
    cross_weight: f64,
    jitter: f64,
    rng: &mut impl Rng,
) -> Vec<AdjacencyMatrix> {
    assert!(n >= 2 && blocks >= 1 && blocks <= n);
    assert!(in_weight > 0.0 && cross_weight > 0.0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..subjects)
        .map(|_| {
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let same = i * blocks / n == j * blocks / n;
                    let base = if same { in_weight } else { cross_weight };
                    let weight = base * (jitter * normal.sample(rng)).exp();
                    w[(i, j)] = weight;
                    w[(j, i)] = weight;
                }
            }
            AdjacencyMatrix::new(w).expect("positive weights are valid")
        })
        .collect()
}

/// Two equal-sized signal groups "A" and "B" over a harmonic frame:
/// every signal is i.i.d. node noise N(0, noise^2), and group B
/// additionally carries `coefficient` times the chosen basis column.
/// Subjects are labeled A001, ..., B001, ...
pub fn planted_signal_cohort(
    basis: &StiefelPoint,
    per_group: usize,
    harmonic: usize,
    coefficient: f64,
    noise: f64,
    rng: &mut impl Rng,
) -> Vec<NodeSignal> {
    assert!(harmonic < basis.p());
    let n = basis.n();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let planted = basis.matrix().column(harmonic).into_owned();
    let mut signals = Vec::with_capacity(2 * per_group);
    for group in ["A", "B"] {
        for k in 0..per_group {
            let mut values = DVector::from_fn(n, |_, _| noise * normal.sample(rng));
            if group == "B" {
                values += coefficient * &planted;
            }
            let signal = NodeSignal::new(format!("{group}{:03}", k + 1), group, values)
                .expect("generated signals are finite");
            signals.push(signal);
        }
    }
    signals
}

/// Haar-distributed random point of V(n,p): QR of a Gaussian matrix with
/// the sign convention diag(R) > 0.
pub fn random_orthonormal(n: usize, p: usize, rng: &mut impl Rng) -> StiefelPoint {
    assert!(p >= 1 && p <= n);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gaussian = DMatrix::from_fn(n, p, |_, _| normal.sample(rng));
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    StiefelPoint::new(q).expect("Householder Q is orthonormal")
}

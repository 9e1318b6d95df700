//! Graph Laplacians and their spectra.
//!
//! A weighted brain network is a symmetric nonnegative adjacency matrix W;
//! its Laplacian is L = D - W with D = diag(row sums). The harmonic waves of
//! the network are the eigenvectors of L, ordered by ascending eigenvalue:
//! the minimizers of tr(X' L X) over orthonormal X. For a connected graph the
//! smallest eigenvalue is 0 with a constant eigenvector.
//!
//! This module builds Laplacians, computes ordered eigensystems with a
//! deterministic sign convention, shifts L into the positive-definite form
//! Ltilde = beta*I - L needed by the trace-maximization solver, and exposes
//! the spectral reconstruction-error curve used to choose the truncation
//! order p.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance used when validating symmetry and the zero diagonal of inputs.
const INPUT_TOL: f64 = 1e-12;

/// Eigenvalues below this count as zero when checking definiteness.
const SPECTRUM_ZERO_TOL: f64 = 1e-10;

/// Relative margin added to the dominant eigenvalue so the shifted Laplacian
/// is strictly, not just semi-, positive definite.
const SHIFT_MARGIN: f64 = 1e-6;

/// Symmetric nonnegative weighted adjacency matrix with a zero diagonal.
///
/// Connectivity is a semantic requirement of the spectral pipeline (it makes
/// the zero eigenvalue simple) and is enforced where it matters, in
/// [`build_laplacian`]; plain construction admits disconnected matrices so
/// that cohort-averaging helpers can combine them first.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    weights: DMatrix<f64>,
}

impl AdjacencyMatrix {
    /// Validates symmetry, nonnegativity and the zero diagonal.
    ///
    /// Entries asymmetric or off-diagonal by less than 1e-12 are repaired by
    /// symmetrization/zeroing so the stored matrix satisfies the invariants
    /// exactly.
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let n = rows;
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::NonFinite(format!("adjacency entry ({i}, {j})")));
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight { i, j, value: w });
                }
            }
            let d = weights[(i, i)];
            if d.abs() > INPUT_TOL {
                return Err(Error::NonzeroDiagonal { i, value: d });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let forward = weights[(i, j)];
                let backward = weights[(j, i)];
                let scale = forward.abs().max(backward.abs()).max(1.0);
                if (forward - backward).abs() > INPUT_TOL * scale {
                    return Err(Error::Asymmetric {
                        i,
                        j,
                        forward,
                        backward,
                    });
                }
            }
        }
        let mut weights = weights;
        for i in 0..n {
            weights[(i, i)] = 0.0;
            for j in (i + 1)..n {
                let w = 0.5 * (weights[(i, j)] + weights[(j, i)]);
                weights[(i, j)] = w;
                weights[(j, i)] = w;
            }
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Breadth-first reachability over nonzero weights from node 0.
    /// Returns the number of reachable nodes.
    pub fn reachable_from_zero(&self) -> usize {
        let n = self.n();
        if n == 0 {
            return 0;
        }
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::new();
        seen[0] = true;
        queue.push_back(0usize);
        let mut count = 1usize;
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && self.weights[(i, j)] > 0.0 {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.reachable_from_zero() == self.n()
    }

    /// Entrywise mean of a cohort of same-sized adjacency matrices.
    pub fn mean(cohort: &[AdjacencyMatrix]) -> Result<AdjacencyMatrix> {
        let first = cohort.first().ok_or(Error::EmptyCohort)?;
        let n = first.n();
        let mut sum = DMatrix::<f64>::zeros(n, n);
        for (s, w) in cohort.iter().enumerate() {
            if w.n() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("cohort member {s}"),
                    expected: format!("{n}x{n}"),
                    found: format!("{}x{}", w.n(), w.n()),
                });
            }
            sum += w.weights();
        }
        sum /= cohort.len() as f64;
        AdjacencyMatrix::new(sum)
    }
}

/// Combinatorial Laplacian L = D - W of a connected graph.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    values: DMatrix<f64>,
    degrees: DVector<f64>,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }
}

/// L = diag(row sums of W) - W. Rejects disconnected graphs: the spectral
/// interpretation requires a simple zero eigenvalue.
///
/// A 1-node graph has no edges to traverse and passes the connectivity check
/// trivially (its Laplacian is the 1x1 zero matrix).
pub fn build_laplacian(w: &AdjacencyMatrix) -> Result<LaplacianMatrix> {
    let n = w.n();
    let reachable = w.reachable_from_zero();
    if reachable != n {
        return Err(Error::Disconnected { reachable, n });
    }
    let degrees = DVector::from_iterator(n, w.weights().row_iter().map(|r| r.sum()));
    let mut values = -w.weights().clone();
    for i in 0..n {
        values[(i, i)] = degrees[i];
    }
    Ok(LaplacianMatrix { values, degrees })
}

/// The p smallest eigenpairs of a Laplacian, ascending, sign-canonicalized.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl EigenSystem {
    /// Ascending eigenvalues, length p.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// n x p matrix whose h-th column is the eigenvector of eigenvalue h.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn p(&self) -> usize {
        self.vectors.ncols()
    }
}

/// Flips the sign of each column so its entry of largest absolute value is
/// positive; exact-value ties resolve to the lowest row index. Idempotent.
pub fn canonicalize_signs(matrix: &mut DMatrix<f64>) {
    for mut col in matrix.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = col[0].abs();
        for (i, &x) in col.iter().enumerate().skip(1) {
            if x.abs() > best_abs {
                best = i;
                best_abs = x.abs();
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn symmetric_eigen_sorted(matrix: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = matrix.nrows();
    let eig = matrix
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or(Error::EigenFailure { n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

/// The p smallest-eigenvalue pairs of L, ascending and sign-canonicalized.
///
/// For a connected graph the first eigenvalue is ~0 and the first column is
/// the constant vector 1/sqrt(n).
pub fn eigensystem(l: &LaplacianMatrix, p: usize) -> Result<EigenSystem> {
    let n = l.n();
    if p == 0 || p > n {
        return Err(Error::HarmonicCount { p, n });
    }
    let (values, vectors) = symmetric_eigen_sorted(l.values())?;
    let eigenvalues = DVector::from_iterator(p, values.iter().take(p).copied());
    let mut vectors = vectors.columns(0, p).into_owned();
    canonicalize_signs(&mut vectors);
    Ok(EigenSystem {
        eigenvalues,
        vectors,
    })
}

/// Positive-definite spectral flip Ltilde = beta*I - L of a Laplacian.
///
/// Shares eigenvectors with L; eigenvalues appear as beta - lambda, so the
/// low-frequency harmonics of L become the dominant eigenpairs of Ltilde.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian {
    values: DMatrix<f64>,
    beta: f64,
    degenerate: bool,
}

impl ShiftedLaplacian {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when L had no positive spectrum at all (e.g. a single node), in
    /// which case the shift cannot produce a positive-definite matrix.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Wraps an explicit positive-definite matrix, bypassing the spectral
    /// shift; lets tests drive the solver with hand-picked spectra.
    #[cfg(test)]
    pub(crate) fn for_tests(values: DMatrix<f64>, beta: f64) -> Self {
        Self {
            values,
            beta,
            degenerate: false,
        }
    }
}

/// Ltilde = beta*I - L with beta = lambda_max(L) * (1 + 1e-6).
///
/// The margin keeps Ltilde strictly positive definite; with beta set exactly
/// to the dominant eigenvalue the smallest eigenvalue of Ltilde would be 0.
pub fn shift_positive_definite(l: &LaplacianMatrix) -> Result<ShiftedLaplacian> {
    let n = l.n();
    let (values, _) = symmetric_eigen_sorted(l.values())?;
    let lambda_max = values[n - 1];
    if lambda_max <= SPECTRUM_ZERO_TOL {
        // L ~ 0: nothing to flip.
        return Ok(ShiftedLaplacian {
            values: DMatrix::zeros(n, n),
            beta: 0.0,
            degenerate: true,
        });
    }
    let beta = lambda_max * (1.0 + SHIFT_MARGIN);
    let mut shifted = -l.values().clone();
    for i in 0..n {
        shifted[(i, i)] += beta;
    }
    Ok(ShiftedLaplacian {
        values: shifted,
        beta,
        degenerate: false,
    })
}

/// Relative spectral reconstruction error for each truncation order
/// p = 1..=p_max:
///
/// error(p) = ||L - Phi_p Lambda_p Phi_p'||_F / ||L||_F
///
/// computed from the eigenvalue tail (the residual of a rank-p spectral
/// reconstruction is exactly the norm of the discarded eigenvalues). The
/// curve is nonincreasing and reaches 0 at p = n.
pub fn reconstruction_error_curve(l: &LaplacianMatrix, p_max: usize) -> Result<Vec<(usize, f64)>> {
    let n = l.n();
    if p_max == 0 || p_max > n {
        return Err(Error::HarmonicCount { p: p_max, n });
    }
    let (values, _) = symmetric_eigen_sorted(l.values())?;
    let total: f64 = values.iter().map(|v| v * v).sum();
    if total <= f64::MIN_POSITIVE {
        // Zero Laplacian: every truncation reconstructs it exactly.
        return Ok((1..=p_max).map(|p| (p, 0.0)).collect());
    }
    let norm = total.sqrt();
    let mut curve = Vec::with_capacity(p_max);
    let mut tail = total;
    for p in 1..=p_max {
        tail -= values[p - 1] * values[p - 1];
        let residual = if p == n { 0.0 } else { tail.max(0.0).sqrt() };
        curve.push((p, residual / norm));
    }
    Ok(curve)
}

/// Smallest p at which the marginal decrease of the reconstruction error
/// falls below `fraction` of error(1) -- the "tipping point" rule for
/// choosing the truncation order. Returns the last curve entry's p when the
/// decrease never flattens out.
pub fn suggest_truncation(curve: &[(usize, f64)], fraction: f64) -> usize {
    if curve.is_empty() {
        return 1;
    }
    let reference = curve[0].1;
    if reference <= 0.0 {
        return curve[0].0;
    }
    let threshold = fraction * reference;
    for window in curve.windows(2) {
        let (_, prev) = window[0];
        let (p, next) = window[1];
        if prev - next < threshold {
            return p;
        }
    }
    curve[curve.len() - 1].0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{complete_graph, path_graph, two_node_graph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3_laplacian() -> LaplacianMatrix {
        build_laplacian(&path_graph(3)).unwrap()
    }

    #[test]
    fn two_node_laplacian() {
        let l = build_laplacian(&two_node_graph(1.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert_eq!(l.values(), &expected);
    }

    #[test]
    fn path3_laplacian_matches_hand_computation() {
        let l = path3_laplacian();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l.values(), &expected);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_kernel_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = crate::generators::random_connected_graph(10, 0.4, &mut rng);
        let l = build_laplacian(&w).unwrap();
        for row in l.values().row_iter() {
            assert!(row.sum().abs() < 1e-12, "row sum {}", row.sum());
        }
        // Dense eigendecomposition oracle: smallest eigenvalue is 0.
        let eig = l.values().clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-10, "smallest eigenvalue {min}");
    }

    #[test]
    fn rejects_invalid_inputs_with_distinct_kinds() {
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            AdjacencyMatrix::new(asym),
            Err(Error::Asymmetric { .. })
        ));

        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(matches!(
            AdjacencyMatrix::new(neg),
            Err(Error::NegativeWeight { .. })
        ));

        let diag = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            AdjacencyMatrix::new(diag),
            Err(Error::NonzeroDiagonal { .. })
        ));

        let rect = DMatrix::from_row_slice(2, 3, &[0.0; 6]);
        assert!(matches!(
            AdjacencyMatrix::new(rect),
            Err(Error::NotSquare { .. })
        ));

        // Two disconnected 2-node components.
        let disc = AdjacencyMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        ))
        .unwrap();
        assert!(!disc.is_connected());
        assert!(matches!(
            build_laplacian(&disc),
            Err(Error::Disconnected { reachable: 2, n: 4 })
        ));
    }

    #[test]
    fn path3_spectrum_is_0_1_3() {
        // Characteristic polynomial of the path Laplacian gives 0, 1, 3.
        let sys = eigensystem(&path3_laplacian(), 3).unwrap();
        let expected = [0.0, 1.0, 3.0];
        for (found, want) in sys.eigenvalues().iter().zip(expected) {
            assert!((found - want).abs() < 1e-10, "{found} vs {want}");
        }
    }

    #[test]
    fn first_harmonic_is_constant() {
        let l = build_laplacian(&path_graph(5)).unwrap();
        let sys = eigensystem(&l, 1).unwrap();
        assert!(sys.eigenvalues()[0].abs() < 1e-10);
        let c = 1.0 / 5.0_f64.sqrt();
        for &x in sys.vectors().column(0).iter() {
            assert!((x - c).abs() < 1e-10, "entry {x} vs {c}");
        }
    }

    #[test]
    fn complete_graph_k4_spectrum() {
        // K_n Laplacian spectrum is 0 with multiplicity 1 and n otherwise.
        let l = build_laplacian(&complete_graph(4, 1.0)).unwrap();
        let sys = eigensystem(&l, 4).unwrap();
        let expected = [0.0, 4.0, 4.0, 4.0];
        for (found, want) in sys.eigenvalues().iter().zip(expected) {
            assert!((found - want).abs() < 1e-9, "{found} vs {want}");
        }
    }

    #[test]
    fn eigensystem_rejects_out_of_range_p() {
        let l = path3_laplacian();
        assert!(matches!(
            eigensystem(&l, 0),
            Err(Error::HarmonicCount { p: 0, n: 3 })
        ));
        assert!(matches!(
            eigensystem(&l, 4),
            Err(Error::HarmonicCount { p: 4, n: 3 })
        ));
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_rayleigh_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = crate::generators::random_connected_graph(12, 0.5, &mut rng);
        let l = build_laplacian(&w).unwrap();
        let sys = eigensystem(&l, 6).unwrap();

        let gram = sys.vectors().transpose() * sys.vectors();
        let dev = (gram - DMatrix::identity(6, 6)).amax();
        assert!(dev <= 1e-10, "orthonormality deviation {dev}");

        let rayleigh = (sys.vectors().transpose() * l.values() * sys.vectors()).trace();
        let sum: f64 = sys.eigenvalues().iter().sum();
        assert!((rayleigh - sum).abs() < 1e-8, "{rayleigh} vs {sum}");
    }

    #[test]
    fn sign_canonicalization_is_idempotent_and_rayleigh_invariant() {
        let l = path3_laplacian();
        let sys = eigensystem(&l, 3).unwrap();
        let before = (sys.vectors().transpose() * l.values() * sys.vectors()).trace();

        let mut once = sys.vectors().clone();
        canonicalize_signs(&mut once);
        assert_eq!(&once, sys.vectors(), "eigensystem output is already canonical");
        let mut twice = once.clone();
        canonicalize_signs(&mut twice);
        assert_eq!(once, twice);

        let after = (once.transpose() * l.values() * &once).trace();
        assert!((before - after).abs() < 1e-12);

        // A flipped column gets restored.
        let mut flipped = once.clone();
        flipped.column_mut(1).neg_mut();
        canonicalize_signs(&mut flipped);
        assert_eq!(flipped, once);
    }

    #[test]
    fn shift_two_node_graph() {
        // lambda_max of [[1,-1],[-1,1]] is 2.
        let l = build_laplacian(&two_node_graph(1.0)).unwrap();
        let s = shift_positive_definite(&l).unwrap();
        assert!(!s.is_degenerate());
        assert!((s.beta() - 2.0 * (1.0 + 1e-6)).abs() < 1e-12);
        assert!((s.values()[(0, 0)] - (s.beta() - 1.0)).abs() < 1e-12);
        assert!((s.values()[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_flags_zero_laplacian_as_degenerate() {
        let single = AdjacencyMatrix::new(DMatrix::zeros(1, 1)).unwrap();
        let l = build_laplacian(&single).unwrap();
        let s = shift_positive_definite(&l).unwrap();
        assert!(s.is_degenerate());
        assert_eq!(s.beta(), 0.0);
        assert_eq!(s.values(), &DMatrix::zeros(1, 1));
    }

    #[test]
    fn shifted_spectrum_is_reversed_and_positive() {
        let l = path3_laplacian();
        let s = shift_positive_definite(&l).unwrap();
        let eig = s.values().clone().symmetric_eigen();
        let mut shifted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        shifted.sort_by(f64::total_cmp);
        // Spectral shift identity: eigenvalues(Ltilde) = beta - eigenvalues(L),
        // elementwise in reversed order.
        let original = [0.0, 1.0, 3.0];
        for (i, want) in original.iter().rev().enumerate() {
            assert!(
                (shifted[i] - (s.beta() - want)).abs() < 1e-8,
                "{} vs {}",
                shifted[i],
                s.beta() - want
            );
        }
        assert!(shifted[0] > 0.0, "not strictly positive definite");
    }

    #[test]
    fn reconstruction_error_trivial_cases() {
        let l = path3_laplacian();
        let curve = reconstruction_error_curve(&l, 3).unwrap();
        assert!(curve[2].1.abs() < 1e-10, "full reconstruction");
        // Residual of p = 2 is the lambda = 3 eigenpair; ||L||_F
        // square-sums the entries of [[1,-1,0],[-1,2,-1],[0,-1,1]] to 10.
        let expected = 3.0 / 10.0_f64.sqrt();
        assert!((curve[1].1 - expected).abs() < 1e-10, "{} vs {expected}", curve[1].1);
    }

    #[test]
    fn reconstruction_error_matches_dense_oracle_and_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let w = crate::generators::random_connected_graph(20, 0.3, &mut rng);
        let l = build_laplacian(&w).unwrap();
        let curve = reconstruction_error_curve(&l, 20).unwrap();

        let norm = l.values().norm();
        let mut previous = f64::INFINITY;
        for &(p, error) in &curve {
            // Oracle: explicit rank-p spectral reconstruction.
            let sys = eigensystem(&l, p).unwrap();
            let lambda = DMatrix::from_diagonal(sys.eigenvalues());
            let rebuilt = sys.vectors() * lambda * sys.vectors().transpose();
            let direct = (l.values() - rebuilt).norm() / norm;
            assert!((error - direct).abs() < 1e-9, "p={p}: {error} vs {direct}");
            assert!(error <= previous + 1e-12, "curve increased at p={p}");
            previous = error;
        }
        assert!(curve[19].1.abs() < 1e-10);
    }

    #[test]
    fn truncation_suggestion_follows_tipping_rule() {
        // Synthetic curve: sharp drop, then flat.
        let curve = vec![(1, 1.0), (2, 0.5), (3, 0.2), (4, 0.195), (5, 0.19)];
        assert_eq!(suggest_truncation(&curve, 0.01), 4);
        // Never flattens: fall through to the last entry.
        let steep = vec![(1, 1.0), (2, 0.6), (3, 0.2)];
        assert_eq!(suggest_truncation(&steep, 0.01), 3);
        // Degenerate zero curve.
        assert_eq!(suggest_truncation(&[(1, 0.0), (2, 0.0)], 0.01), 1);
    }
}

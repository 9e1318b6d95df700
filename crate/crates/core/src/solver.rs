//! The alternating solver for common harmonic waves.
//!
//! The model couples every subject's harmonic frame Phi_s to a shared frame
//! Psi through the cost
//!
//! cost = sum_s { tr(Phi_s' L_s Phi_s) + 2 lambda (p - tr(Phi_s' Psi)) },
//!
//! minimized over orthonormal frames. Each outer iteration alternates two
//! subproblems:
//!
//! 1. Per subject, maximize tr(Phi' Ltilde_s Phi) + 2 lambda tr(Phi' Psi)
//!    over Phi by generalized power iteration: Theta = Ltilde_s Phi +
//!    lambda Psi, then Phi <- the polar factor of Theta. The spectral flip
//!    Ltilde = beta I - L turns "smallest eigenvalues of L" into the
//!    maximization GPI needs, and each polar step is nondecreasing in that
//!    objective; the linear term it ascends carries twice the weight of
//!    the lambda Psi summand in Theta, which fixes the coupling weight the
//!    whole model descends (see [`objective_cost`]).
//! 2. Move Psi toward the Frechet mean of the Phi_s under the chordal
//!    distance by a Weiszfeld step: the gradient-style direction
//!    -lambda sum_s (Psi Phi_s' Psi - Phi_s), passed through the manifold
//!    gradient map and the exponential map. Backtracking on the step size
//!    keeps sum_s d^2(Phi_s, Psi) nonincreasing.
//!
//! The outer loop stops when the cost change falls below a threshold; the
//! recorded trace is nonincreasing because both phases descend the same
//! doubled-coupling cost.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{
    build_laplacian, eigensystem, shift_positive_definite, AdjacencyMatrix, LaplacianMatrix,
    ShiftedLaplacian,
};
use crate::stiefel::{
    exp_map, polar_factor, project_to_tangent, squared_distance, StiefelPoint, TangentVector,
};

/// Step-size halvings tried before a Weiszfeld step counts as failed.
const MAX_HALVINGS: usize = 20;

/// Tolerances and iteration caps for the three nested loops.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Number of harmonics learned (columns of Psi).
    pub p: usize,
    /// Coupling weight between the spectral term and the distance term.
    pub lambda: f64,
    /// Weiszfeld step size; the composite update scale is gamma * lambda.
    pub gamma: f64,
    /// Frobenius change below which the per-subject refinement stops.
    pub eps_gpi: f64,
    /// Direction norm below which the mean update stops.
    pub eps_weiszfeld: f64,
    /// Absolute cost change below which the outer loop stops.
    pub eps_outer: f64,
    pub max_gpi_iters: usize,
    pub max_weiszfeld_iters: usize,
    pub max_outer_iters: usize,
    /// Run the unsafeguarded variant of the update schedule: the mean
    /// update restarts from the first subject's frame instead of the
    /// current Psi, uses the raw direction without the manifold gradient
    /// map, and takes fixed steps with no backtracking.
    pub strict: bool,
}

impl SolverConfig {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            lambda: 0.01,
            gamma: 0.01,
            eps_gpi: 1e-8,
            eps_weiszfeld: 1e-6,
            eps_outer: 1e-6,
            max_gpi_iters: 500,
            max_weiszfeld_iters: 200,
            max_outer_iters: 100,
            strict: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(Error::InvalidConfig("p must be at least 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        for (name, value) in [
            ("eps1", self.eps_gpi),
            ("eps2", self.eps_weiszfeld),
            ("eps-outer", self.eps_outer),
        ] {
            if !(value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        for (name, cap) in [
            ("GPI iteration cap", self.max_gpi_iters),
            ("Weiszfeld iteration cap", self.max_weiszfeld_iters),
            ("outer iteration cap", self.max_outer_iters),
        ] {
            if cap < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Result of one per-subject refinement.
#[derive(Debug, Clone)]
pub struct GpiOutcome {
    pub point: StiefelPoint,
    /// The ascended objective tr(Phi' Ltilde Phi) + 2 lambda tr(Phi' Psi),
    /// one entry per iterate including the start; nondecreasing.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of one Frechet-mean estimation.
#[derive(Debug, Clone)]
pub struct WeiszfeldOutcome {
    pub mean: StiefelPoint,
    /// sum_s d^2(Phi_s, Psi) per iterate including the start; nonincreasing
    /// while backtracking is on.
    pub sum_sq_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Step policy for [`weiszfeld_mean`]. `new` enables both safeguards; the
/// unsafeguarded combination reproduces the literal update schedule.
#[derive(Debug, Clone)]
pub struct WeiszfeldOptions {
    pub gamma: f64,
    pub lambda: f64,
    pub eps: f64,
    pub max_iters: usize,
    /// Pass the raw direction through the manifold gradient map
    /// G - Psi G' Psi before stepping.
    pub project_gradient: bool,
    /// Halve the step until sum_s d^2 does not increase.
    pub backtracking: bool,
}

impl WeiszfeldOptions {
    pub fn new(gamma: f64, lambda: f64, eps: f64, max_iters: usize) -> Self {
        Self {
            gamma,
            lambda,
            eps,
            max_iters,
            project_gradient: true,
            backtracking: true,
        }
    }
}

fn check_same_shape(context: &str, expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        });
    }
    Ok(())
}

/// The quantity each polar step provably ascends. For the update
/// Phi <- polar(Ltilde Phi + lambda Psi) the majorization argument bounds
/// tr(Phi' Ltilde Phi) + 2 lambda tr(Phi' Psi): the linear term enters
/// doubled, so the iteration's fixed points are stationary for a coupling
/// of 2 lambda, not lambda.
fn gpi_objective(shifted: &ShiftedLaplacian, psi: &StiefelPoint, phi: &StiefelPoint, lambda: f64) -> f64 {
    let lphi = shifted.values() * phi.matrix();
    lphi.dot(phi.matrix()) + 2.0 * lambda * psi.matrix().dot(phi.matrix())
}

/// Refine one subject's frame: iterate Theta = Ltilde Phi + lambda Psi,
/// Phi <- polar factor of Theta, until the iterate moves less than `eps`
/// in Frobenius norm. Each step is nondecreasing in the objective because
/// the polar factor maximizes tr(Phi' Theta) over orthonormal Phi.
///
/// Once span(Phi) is invariant under Ltilde the polar step fixes every
/// in-span rotation exactly (polar(M Q) = Q for symmetric positive
/// definite M and orthogonal Q), so only the coupling term turns the
/// gauge toward Psi, at a per-step rate that vanishes with lambda. With
/// `align_in_span` set, each polar step is followed by Phi <- Phi R with
/// R = polar(Phi' Psi), the rotation maximizing tr(Phi R Psi') at fixed
/// span; the spectral term is invariant under in-span rotations, so the
/// objective stays nondecreasing and the slow gauge mode disappears.
pub fn gpi_refine(
    shifted: &ShiftedLaplacian,
    psi: &StiefelPoint,
    phi_init: &StiefelPoint,
    lambda: f64,
    eps: f64,
    max_iters: usize,
    align_in_span: bool,
) -> Result<GpiOutcome> {
    let n = shifted.n();
    check_same_shape("group frame passed to GPI", (n, psi.p()), (psi.n(), psi.p()))?;
    check_same_shape(
        "subject frame passed to GPI",
        (n, psi.p()),
        (phi_init.n(), phi_init.p()),
    )?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }

    let mut phi = phi_init.clone();
    let mut trace = vec![gpi_objective(shifted, psi, &phi, lambda)];
    for iteration in 1..=max_iters {
        let theta = shifted.values() * phi.matrix() + psi.matrix() * lambda;
        let mut next = StiefelPoint::new(polar_factor(&theta)?)?;
        if align_in_span {
            let rotation = polar_factor(&(next.matrix().transpose() * psi.matrix()))?;
            next = StiefelPoint::new(next.matrix() * rotation)?;
        }
        let moved = (next.matrix() - phi.matrix()).norm();
        phi = next;
        trace.push(gpi_objective(shifted, psi, &phi, lambda));
        if moved < eps {
            return Ok(GpiOutcome {
                point: phi,
                objective_trace: trace,
                iterations: iteration,
                converged: true,
            });
        }
    }
    Ok(GpiOutcome {
        point: phi,
        objective_trace: trace,
        iterations: max_iters,
        converged: false,
    })
}

fn total_squared_distance(points: &[StiefelPoint], psi: &StiefelPoint) -> Result<f64> {
    let mut total = 0.0;
    for point in points {
        total += squared_distance(point, psi)?;
    }
    Ok(total)
}

/// Estimate the Frechet mean of `points` under the chordal distance,
/// starting from `init`.
///
/// Each iteration forms the direction
/// Delta = -lambda sum_s (Psi Phi_s' Psi - Phi_s), which is tangent at Psi,
/// optionally maps it through the manifold gradient map, then steps along
/// the geodesic with step `gamma`, halving on any increase of
/// sum_s d^2(Phi_s, Psi) when backtracking is on. Stops when ||Delta||_F
/// falls below `opts.eps`.
pub fn weiszfeld_mean(
    points: &[StiefelPoint],
    init: &StiefelPoint,
    opts: &WeiszfeldOptions,
) -> Result<WeiszfeldOutcome> {
    if points.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let shape = (init.n(), init.p());
    for point in points {
        check_same_shape("Weiszfeld input frame", shape, (point.n(), point.p()))?;
    }

    let mut psi = init.clone();
    let mut total = total_squared_distance(points, &psi)?;
    let mut trace = vec![total];

    for iteration in 0..opts.max_iters {
        let mut raw = DMatrix::zeros(psi.n(), psi.p());
        for point in points {
            let pulled = psi.matrix() * (point.matrix().transpose() * psi.matrix());
            raw += pulled - point.matrix();
        }
        raw *= -opts.lambda;

        let delta = if opts.project_gradient {
            project_to_tangent(&psi, &raw)?
        } else {
            TangentVector::new(psi.clone(), raw)?
        };
        if delta.norm() < opts.eps {
            return Ok(WeiszfeldOutcome {
                mean: psi,
                sum_sq_trace: trace,
                iterations: iteration,
                converged: true,
            });
        }

        // Sufficient-decrease acceptance: plain non-increase would accept
        // zero-progress oscillation (the direction's magnitude grows with
        // the number of inputs, and too-large composite steps flip between
        // mirror states of equal cost). The quadratic demand vanishes near
        // stationarity, and the slack absorbs roundoff in the distance sum.
        let slack = 1e-12 * (1.0 + total.abs());
        let norm_sq = delta.norm() * delta.norm();
        let mut gamma = opts.gamma;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = exp_map(&psi, &delta.scaled(gamma))?;
            let candidate_total = total_squared_distance(points, &candidate)?;
            if !opts.backtracking || candidate_total <= total - 1e-4 * gamma * norm_sq + slack {
                accepted = Some((candidate, candidate_total));
                break;
            }
            gamma *= 0.5;
        }
        let (next, next_total) = accepted.ok_or(Error::StepFailure {
            halvings: MAX_HALVINGS,
        })?;
        psi = next;
        total = next_total;
        trace.push(total);
    }

    Ok(WeiszfeldOutcome {
        mean: psi,
        sum_sq_trace: trace,
        iterations: opts.max_iters,
        converged: false,
    })
}

/// The learned population model.
#[derive(Debug, Clone)]
pub struct HarmonicModel {
    common: StiefelPoint,
    individuals: Vec<StiefelPoint>,
    cost_trace: Vec<f64>,
    converged: bool,
    outer_iterations: usize,
}

impl HarmonicModel {
    /// The common harmonic frame Psi.
    pub fn common(&self) -> &StiefelPoint {
        &self.common
    }

    /// Per-subject refined frames, in cohort order.
    pub fn individuals(&self) -> &[StiefelPoint] {
        &self.individuals
    }

    /// Cost value per outer iteration, starting at the initialization.
    pub fn cost_trace(&self) -> &[f64] {
        &self.cost_trace
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn outer_iterations(&self) -> usize {
        self.outer_iterations
    }
}

/// cost = sum_s { tr(Phi_s' L_s Phi_s) + 2 lambda (p - tr(Phi_s' Psi)) },
/// evaluated on the original, unshifted Laplacians.
///
/// The coupling counts twice because that is the weight the update
/// schedule descends: the polar step's majorization doubles any linear
/// term, so its fixed points are stationary for coupling 2 lambda, and a
/// single-weight cost would rise whenever a polar step trades spectral
/// value for alignment. With the doubled weight both phases are descent
/// steps and the recorded trace is nonincreasing up to roundoff.
pub fn objective_cost(
    individuals: &[StiefelPoint],
    common: &StiefelPoint,
    laplacians: &[LaplacianMatrix],
    lambda: f64,
) -> Result<f64> {
    if individuals.len() != laplacians.len() {
        return Err(Error::DimensionMismatch {
            context: "cost evaluation".into(),
            expected: format!("{} frames", laplacians.len()),
            found: format!("{} frames", individuals.len()),
        });
    }
    let p = common.p() as f64;
    let mut cost = 0.0;
    for (phi, laplacian) in individuals.iter().zip(laplacians) {
        check_same_shape(
            "cost evaluation frame",
            (common.n(), common.p()),
            (phi.n(), phi.p()),
        )?;
        if laplacian.n() != phi.n() {
            return Err(Error::DimensionMismatch {
                context: "cost evaluation Laplacian".into(),
                expected: format!("{0}x{0}", phi.n()),
                found: format!("{0}x{0}", laplacian.n()),
            });
        }
        let spectral = (laplacian.values() * phi.matrix()).dot(phi.matrix());
        let coupling = p - common.matrix().dot(phi.matrix());
        cost += spectral + 2.0 * lambda * coupling;
    }
    Ok(cost)
}

/// Learn the common harmonic frame of a cohort.
///
/// Initialization: Psi from the eigensystem of the cohort-average network
/// (the pseudo mean) and each Phi_s from its own Laplacian's eigensystem.
/// Then per-subject GPI refinements (independent given a snapshot of Psi,
/// run in parallel in cohort order) alternate with one Weiszfeld mean
/// update until the cost change drops below `config.eps_outer`. On cap
/// exhaustion the best state so far is returned with `converged` false.
pub fn learn_common_harmonics(
    cohort: &[AdjacencyMatrix],
    config: &SolverConfig,
) -> Result<HarmonicModel> {
    config.validate()?;
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let n = cohort[0].n();
    if config.p > n {
        return Err(Error::HarmonicCount { p: config.p, n });
    }

    let mut laplacians = Vec::with_capacity(cohort.len());
    let mut shifted = Vec::with_capacity(cohort.len());
    let mut individuals = Vec::with_capacity(cohort.len());
    for (index, network) in cohort.iter().enumerate() {
        let tag = || format!("#{index}");
        if network.n() != n {
            return Err(Error::DimensionMismatch {
                context: format!("cohort member {}", tag()),
                expected: format!("{n}x{n}"),
                found: format!("{0}x{0}", network.n()),
            });
        }
        let laplacian = build_laplacian(network).map_err(|e| e.for_subject(tag()))?;
        let system = eigensystem(&laplacian, config.p).map_err(|e| e.for_subject(tag()))?;
        individuals.push(StiefelPoint::new(system.vectors().clone())?);
        shifted.push(shift_positive_definite(&laplacian).map_err(|e| e.for_subject(tag()))?);
        laplacians.push(laplacian);
    }

    let mut psi = pseudo_mean_harmonics(cohort, config.p)?;
    let mut cost = objective_cost(&individuals, &psi, &laplacians, config.lambda)?;
    let mut cost_trace = vec![cost];
    let mut converged = false;
    let mut outer_iterations = 0;

    for outer in 1..=config.max_outer_iters {
        individuals = shifted
            .par_iter()
            .zip(individuals.into_par_iter())
            .map(|(lt, phi)| {
                gpi_refine(
                    lt,
                    &psi,
                    &phi,
                    config.lambda,
                    config.eps_gpi,
                    config.max_gpi_iters,
                    !config.strict,
                )
                .map(|outcome| outcome.point)
            })
            .collect::<Result<Vec<_>>>()?;

        let init = if config.strict {
            individuals[0].clone()
        } else {
            psi.clone()
        };
        let opts = WeiszfeldOptions {
            gamma: config.gamma,
            lambda: config.lambda,
            eps: config.eps_weiszfeld,
            max_iters: config.max_weiszfeld_iters,
            project_gradient: !config.strict,
            backtracking: !config.strict,
        };
        psi = weiszfeld_mean(&individuals, &init, &opts)?.mean;

        let new_cost = objective_cost(&individuals, &psi, &laplacians, config.lambda)?;
        cost_trace.push(new_cost);
        outer_iterations = outer;
        if (new_cost - cost).abs() < config.eps_outer {
            converged = true;
            break;
        }
        cost = new_cost;
    }

    Ok(HarmonicModel {
        common: psi,
        individuals,
        cost_trace,
        converged,
        outer_iterations,
    })
}

/// Entrywise mean of frames with its orthonormality deviation. Distinct
/// inputs generally leave the manifold, which is what the learned mean is
/// compared against.
pub fn arithmetic_mean_harmonics(points: &[StiefelPoint]) -> Result<(DMatrix<f64>, f64)> {
    let first = points.first().ok_or(Error::EmptyCohort)?;
    let shape = (first.n(), first.p());
    let mut sum = DMatrix::zeros(first.n(), first.p());
    for point in points {
        check_same_shape("arithmetic mean frame", shape, (point.n(), point.p()))?;
        sum += point.matrix();
    }
    sum /= points.len() as f64;
    let (_, deviation) = crate::stiefel::validate_on_manifold(&sum, 0.0);
    Ok((sum, deviation))
}

/// Eigensystem of the cohort-average network: average the adjacency
/// matrices entrywise, build the Laplacian, take the p lowest harmonics.
/// Averaging first means individually disconnected members are fine as
/// long as the averaged network is connected.
pub fn pseudo_mean_harmonics(cohort: &[AdjacencyMatrix], p: usize) -> Result<StiefelPoint> {
    let mean = AdjacencyMatrix::mean(cohort)?;
    let laplacian = build_laplacian(&mean)?;
    let system = eigensystem(&laplacian, p)?;
    StiefelPoint::new(system.vectors().clone())
}

//! Common harmonic waves of graph cohorts.
//!
//! Given a population of weighted brain networks, each network's harmonic
//! waves are the low-frequency eigenvectors of its graph Laplacian: an
//! orthonormal n x p frame, a point of the Stiefel manifold V(n,p). This
//! crate learns a single population-level frame, the common harmonic waves,
//! by alternating two updates until a joint cost settles:
//!
//! * a generalized power iteration that refines each subject's frame toward
//!   its own Laplacian spectrum while pulling it toward the group frame, and
//! * a Weiszfeld-style step that moves the group frame toward the Fréchet
//!   mean of the subject frames, using tangent-space averaging and the
//!   QR-based exponential map.
//!
//! On top of the learned basis, the analysis layer projects per-node signals
//! into harmonic power and energy spectra and runs the group-difference
//! statistics (Welch and paired t-tests, Fisher scores, a split positive /
//! negative power protocol, and a resampling replicability comparison
//! against the plain averaged-Laplacian baseline).

pub mod analysis;
pub mod error;
pub mod expm;
pub mod generators;
pub mod graph;
pub mod io;
pub mod rotations;
pub mod solver;
pub mod stats;
pub mod stiefel;

pub use analysis::{
    energy_spectrum, group_energy_analysis, positive_negative_protocol, replicability_test,
    split_power, EnergySpectrum, GroupComparison, GroupTestResult, NodeSignal, ProtocolReplicate,
    ProtocolReport, ReplicabilityCounts, ReplicabilityReport, ReplicabilitySplit,
};
pub use error::{Error, Result};
pub use graph::{
    build_laplacian, canonicalize_signs, eigensystem, reconstruction_error_curve,
    shift_positive_definite, suggest_truncation, AdjacencyMatrix, EigenSystem, LaplacianMatrix,
    ShiftedLaplacian,
};
pub use io::{
    load_cohort, read_cohort_manifest, read_matrix, read_signal_table, write_matrix,
    LoadedCohort, ManifestEntry,
};
pub use rotations::{
    quaternion_to_rotation, rotation_mean_options, run_synthetic_experiment, sample_rotations,
    AxisMode, RotationSample, SyntheticReport, UnitQuaternion,
};
pub use stats::{
    fisher_score, ks_uniform_distance, paired_t_test, regularized_incomplete_beta,
    student_t_two_sided_p, welch_t_test, TTestResult,
};

pub use solver::{
    arithmetic_mean_harmonics, gpi_refine, learn_common_harmonics, objective_cost,
    pseudo_mean_harmonics, weiszfeld_mean, GpiOutcome, HarmonicModel, SolverConfig,
    WeiszfeldOptions, WeiszfeldOutcome,
};
pub use stiefel::{
    exp_map, polar_factor, project_to_tangent, squared_distance, validate_on_manifold,
    StiefelPoint, TangentVector,
};

//! Harmonic power and energy analysis of node signals.
//!
//! A node signal is a per-region scalar measurement over a cohort subject.
//! Projecting it onto a harmonic frame gives per-harmonic powers and
//! energies; group comparisons on those energies, a positive/negative
//! power split protocol, and a resampling replicability test for learned
//! frames are built on top.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{canonicalize_signs, AdjacencyMatrix};
use crate::solver::{learn_common_harmonics, pseudo_mean_harmonics, SolverConfig};
use crate::stats::{fisher_score, mean_and_variance, paired_t_test, welch_t_test};
use crate::stiefel::StiefelPoint;

/// A per-region scalar measurement for one subject, with a group label.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSignal {
    subject: String,
    group: String,
    values: DVector<f64>,
}

impl NodeSignal {
    pub fn new(
        subject: impl Into<String>,
        group: impl Into<String>,
        values: DVector<f64>,
    ) -> Result<Self> {
        let subject = subject.into();
        let group = group.into();
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                context: format!("node signal for subject {subject}"),
                expected: "at least one value".into(),
                found: "0 values".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "node signal for subject {subject}"
            )));
        }
        Ok(NodeSignal {
            subject,
            group,
            values,
        })
    }

    pub fn subject(&self) -> &str {
        &self.subject
    }

    pub fn group(&self) -> &str {
        &self.group
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Number of regions the signal covers.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-harmonic powers alpha_h = <f, psi_h>, energies E_h = alpha_h^2,
/// and the total energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    powers: DVector<f64>,
    energies: DVector<f64>,
    total: f64,
}

impl EnergySpectrum {
    pub fn powers(&self) -> &DVector<f64> {
        &self.powers
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Project a signal onto the harmonic frame.
pub fn energy_spectrum(signal: &NodeSignal, basis: &StiefelPoint) -> Result<EnergySpectrum> {
    if signal.len() != basis.n() {
        return Err(Error::DimensionMismatch {
            context: format!("energy spectrum for subject {}", signal.subject()),
            expected: format!("{} values", basis.n()),
            found: format!("{} values", signal.len()),
        });
    }
    let powers = basis.matrix().transpose() * signal.values();
    let energies = powers.map(|a| a * a);
    let total = energies.sum();
    Ok(EnergySpectrum {
        powers,
        energies,
        total,
    })
}

/// Positive and negative power of a signal along one harmonic.
///
/// The harmonic splits into psi+ (positive entries, zeros elsewhere) and
/// psi- (negative entries). Returns (alpha+, alpha-) with
/// alpha+ = <f, psi+> and alpha- = |<f, psi->|. Entries exactly zero
/// belong to neither part, so <f, psi+> + <f, psi-> recovers the full
/// power <f, psi_h>.
pub fn split_power(signal: &NodeSignal, harmonic: &DVector<f64>) -> Result<(f64, f64)> {
    if signal.len() != harmonic.len() {
        return Err(Error::DimensionMismatch {
            context: format!("power split for subject {}", signal.subject()),
            expected: format!("{} values", harmonic.len()),
            found: format!("{} values", signal.len()),
        });
    }
    let mut positive = 0.0;
    let mut negative = 0.0;
    for (f, psi) in signal.values().iter().zip(harmonic.iter()) {
        if *psi > 0.0 {
            positive += f * psi;
        } else if *psi < 0.0 {
            negative += f * psi;
        }
    }
    Ok((positive, negative.abs()))
}

/// One two-group comparison: Welch test, Fisher score, group summaries,
/// and the significance flag at the analysis alpha level.
#[derive(Debug, Clone, Serialize)]
pub struct GroupComparison {
    pub t: f64,
    pub p: f64,
    pub fisher: f64,
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_b: f64,
    pub std_b: f64,
    pub significant: bool,
}

/// Group-difference report over per-harmonic energies and total energy.
/// Group labels are ordered lexicographically; harmonic index is the
/// position in `harmonics`.
#[derive(Debug, Clone, Serialize)]
pub struct GroupTestResult {
    pub group_a: String,
    pub group_b: String,
    pub alpha_level: f64,
    pub harmonics: Vec<GroupComparison>,
    pub total_energy: GroupComparison,
}

fn check_alpha(alpha_level: f64) -> Result<()> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha level must lie in (0, 1), got {alpha_level}"
        )));
    }
    Ok(())
}

fn partition_two_groups(signals: &[NodeSignal]) -> Result<[(String, Vec<&NodeSignal>); 2]> {
    let mut groups: BTreeMap<&str, Vec<&NodeSignal>> = BTreeMap::new();
    for signal in signals {
        groups.entry(signal.group()).or_default().push(signal);
    }
    if groups.len() != 2 {
        return Err(Error::GroupCount {
            found: groups.keys().map(|g| g.to_string()).collect(),
        });
    }
    let mut parts = groups.into_iter();
    let (name_a, members_a) = parts.next().expect("two groups");
    let (name_b, members_b) = parts.next().expect("two groups");
    Ok([
        (name_a.to_string(), members_a),
        (name_b.to_string(), members_b),
    ])
}

/// Welch + Fisher comparison of two scalar samples. A degenerate Fisher
/// denominator (both variances zero) maps to 0 for equal means and
/// +inf otherwise, so identical groups stay unflagged instead of erroring.
fn compare_samples(sample_a: &[f64], sample_b: &[f64], alpha_level: f64) -> Result<GroupComparison> {
    let welch = welch_t_test(sample_a, sample_b)?;
    let fisher = match fisher_score(sample_a, sample_b) {
        Ok(score) => score,
        Err(Error::ZeroDenominator(_)) => {
            let (ma, _) = mean_and_variance(sample_a);
            let (mb, _) = mean_and_variance(sample_b);
            if ma == mb {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Err(other) => return Err(other),
    };
    let (mean_a, var_a) = mean_and_variance(sample_a);
    let (mean_b, var_b) = mean_and_variance(sample_b);
    Ok(GroupComparison {
        t: welch.t,
        p: welch.p,
        fisher,
        mean_a,
        std_a: var_a.sqrt(),
        mean_b,
        std_b: var_b.sqrt(),
        significant: welch.p < alpha_level,
    })
}

/// Per-harmonic and total-energy group differences under a harmonic frame.
///
/// Requires exactly two group labels with at least two subjects each.
pub fn group_energy_analysis(
    signals: &[NodeSignal],
    basis: &StiefelPoint,
    alpha_level: f64,
) -> Result<GroupTestResult> {
    check_alpha(alpha_level)?;
    let [(group_a, members_a), (group_b, members_b)] = partition_two_groups(signals)?;
    for (name, members) in [(&group_a, &members_a), (&group_b, &members_b)] {
        if members.len() < 2 {
            return Err(Error::GroupTooSmall {
                group: name.to_string(),
                found: members.len(),
                required: 2,
            });
        }
    }

    let spectra = |members: &[&NodeSignal]| -> Result<Vec<EnergySpectrum>> {
        members
            .iter()
            .map(|signal| {
                energy_spectrum(signal, basis)
                    .map_err(|e| e.for_subject(signal.subject()))
            })
            .collect()
    };
    let spectra_a = spectra(&members_a)?;
    let spectra_b = spectra(&members_b)?;

    let p = basis.p();
    let mut harmonics = Vec::with_capacity(p);
    for h in 0..p {
        let ea: Vec<f64> = spectra_a.iter().map(|s| s.energies()[h]).collect();
        let eb: Vec<f64> = spectra_b.iter().map(|s| s.energies()[h]).collect();
        harmonics.push(compare_samples(&ea, &eb, alpha_level)?);
    }
    let totals_a: Vec<f64> = spectra_a.iter().map(EnergySpectrum::total).collect();
    let totals_b: Vec<f64> = spectra_b.iter().map(EnergySpectrum::total).collect();
    let total_energy = compare_samples(&totals_a, &totals_b, alpha_level)?;

    Ok(GroupTestResult {
        group_a,
        group_b,
        alpha_level,
        harmonics,
        total_energy,
    })
}

/// One train/holdout replicate of the positive/negative power protocol.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReplicate {
    /// Harmonics whose energy separates the groups on the training split.
    pub power_significant: Vec<usize>,
    /// Subset whose |alpha+ - alpha-| also separates them on the holdout.
    pub split_significant: Vec<usize>,
}

/// Counts across replicates, analogous to a mean +/- std table row.
#[derive(Debug, Clone, Serialize)]
pub struct ProtocolReport {
    pub replicates: Vec<ProtocolReplicate>,
    pub power_count_mean: f64,
    pub power_count_std: f64,
    pub split_count_mean: f64,
    pub split_count_std: f64,
}

/// Screen harmonics on a training split, then confirm on the holdout.
///
/// Per replicate: each group is split into train/holdout by
/// `train_fraction` (at least two subjects on each side). Harmonics whose
/// energies differ significantly on the training subjects are re-tested
/// on the holdout subjects through the group difference of
/// |alpha+ - alpha-|, the imbalance between positive and negative power.
pub fn positive_negative_protocol(
    signals: &[NodeSignal],
    basis: &StiefelPoint,
    train_fraction: f64,
    replicates: usize,
    seed: u64,
    alpha_level: f64,
) -> Result<ProtocolReport> {
    check_alpha(alpha_level)?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if replicates == 0 {
        return Ok(ProtocolReport {
            replicates: Vec::new(),
            power_count_mean: 0.0,
            power_count_std: 0.0,
            split_count_mean: 0.0,
            split_count_std: 0.0,
        });
    }
    let groups = partition_two_groups(signals)?;
    for (name, members) in &groups {
        if members.len() < 4 {
            return Err(Error::GroupTooSmall {
                group: name.to_string(),
                found: members.len(),
                required: 4,
            });
        }
    }

    let p = basis.p();
    // Precompute per-subject energies and power-split imbalances once.
    let mut energies = Vec::with_capacity(2);
    let mut imbalances = Vec::with_capacity(2);
    for (_, members) in &groups {
        let mut group_energies = Vec::with_capacity(members.len());
        let mut group_imbalances = Vec::with_capacity(members.len());
        for signal in members {
            let spectrum = energy_spectrum(signal, basis)
                .map_err(|e| e.for_subject(signal.subject()))?;
            let mut split = Vec::with_capacity(p);
            for h in 0..p {
                let column = DVector::from_column_slice(basis.matrix().column(h).as_slice());
                let (pos, neg) = split_power(signal, &column)?;
                split.push((pos - neg).abs());
            }
            group_energies.push(spectrum.energies().clone());
            group_imbalances.push(split);
        }
        energies.push(group_energies);
        imbalances.push(group_imbalances);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        // Disjoint train/holdout index sets per group.
        let mut train_sets = Vec::with_capacity(2);
        let mut holdout_sets = Vec::with_capacity(2);
        for (_, members) in &groups {
            let size = members.len();
            let want = (train_fraction * size as f64).round() as usize;
            let train_n = want.clamp(2, size - 2);
            let chosen = sample(&mut rng, size, train_n).into_vec();
            let mut in_train = vec![false; size];
            for &i in &chosen {
                in_train[i] = true;
            }
            let holdout: Vec<usize> = (0..size).filter(|&i| !in_train[i]).collect();
            train_sets.push(chosen);
            holdout_sets.push(holdout);
        }

        let collect = |table: &Vec<Vec<f64>>, idx: &[usize], h: usize| -> Vec<f64> {
            idx.iter().map(|&i| table[i][h]).collect()
        };
        let collect_energy = |table: &Vec<DVector<f64>>, idx: &[usize], h: usize| -> Vec<f64> {
            idx.iter().map(|&i| table[i][h]).collect()
        };

        let mut power_significant = Vec::new();
        let mut split_significant = Vec::new();
        for h in 0..p {
            let train_a = collect_energy(&energies[0], &train_sets[0], h);
            let train_b = collect_energy(&energies[1], &train_sets[1], h);
            if welch_t_test(&train_a, &train_b)?.p < alpha_level {
                power_significant.push(h);
                let hold_a = collect(&imbalances[0], &holdout_sets[0], h);
                let hold_b = collect(&imbalances[1], &holdout_sets[1], h);
                if welch_t_test(&hold_a, &hold_b)?.p < alpha_level {
                    split_significant.push(h);
                }
            }
        }
        records.push(ProtocolReplicate {
            power_significant,
            split_significant,
        });
    }

    let power_counts: Vec<f64> = records
        .iter()
        .map(|r| r.power_significant.len() as f64)
        .collect();
    let split_counts: Vec<f64> = records
        .iter()
        .map(|r| r.split_significant.len() as f64)
        .collect();
    let (power_count_mean, power_var) = mean_and_variance(&power_counts);
    let (split_count_mean, split_var) = mean_and_variance(&split_counts);
    Ok(ProtocolReport {
        replicates: records,
        power_count_mean,
        power_count_std: power_var.sqrt(),
        split_count_mean,
        split_count_std: split_var.sqrt(),
    })
}

/// Sizes of the shared base sample and of each of the two disjoint
/// additions used by the replicability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicabilitySplit {
    pub base: usize,
    pub extra: usize,
}

impl ReplicabilitySplit {
    /// Scale the 70-base / 5-extra split of a 94-network cohort down to
    /// `m` networks, keeping the proportions (roughly 74% shared, 5%
    /// additions, at least one extra).
    pub fn proportional(m: usize) -> Result<Self> {
        let base = ((m as f64 * 70.0 / 94.0).round() as usize).max(1);
        let extra = ((m as f64 * 5.0 / 94.0).round() as usize).max(1);
        let split = ReplicabilitySplit { base, extra };
        split.validate(m)?;
        Ok(split)
    }

    fn validate(&self, m: usize) -> Result<()> {
        if self.base == 0 || self.base + 2 * self.extra > m {
            return Err(Error::CohortTooSmall {
                m,
                base: self.base,
                extra: self.extra,
            });
        }
        Ok(())
    }
}

/// Element-level replicability of one frame-learning method.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicabilityCounts {
    /// Paired-test p-value per (region, harmonic) element, row-major.
    pub p_values: Vec<Vec<f64>>,
    /// Elements whose paired difference is significant (replication failures).
    pub significant: Vec<Vec<bool>>,
    pub element_failures: usize,
    /// Failures per region (row sums of `significant`).
    pub region_failures: Vec<usize>,
}

/// Replicability comparison between the manifold mean and the pseudo
/// baseline (eigenvectors of the cohort-average network).
#[derive(Debug, Clone, Serialize)]
pub struct ReplicabilityReport {
    pub split: ReplicabilitySplit,
    pub replicate_count: usize,
    pub alpha_level: f64,
    pub manifold: ReplicabilityCounts,
    pub pseudo: ReplicabilityCounts,
}

fn summarize_replicability(
    diffs: &[DMatrix<f64>],
    n: usize,
    p: usize,
    alpha_level: f64,
) -> Result<ReplicabilityCounts> {
    let mut p_values = vec![vec![0.0; p]; n];
    let mut significant = vec![vec![false; p]; n];
    let mut element_failures = 0;
    let mut region_failures = vec![0usize; n];
    for i in 0..n {
        for j in 0..p {
            let series: Vec<f64> = diffs.iter().map(|d| d[(i, j)]).collect();
            let test = paired_t_test(&series)?;
            p_values[i][j] = test.p;
            if test.p < alpha_level {
                significant[i][j] = true;
                element_failures += 1;
                region_failures[i] += 1;
            }
        }
    }
    Ok(ReplicabilityCounts {
        p_values,
        significant,
        element_failures,
        region_failures,
    })
}

/// Resampling replicability test for learned harmonic frames.
///
/// Per replicate, two overlapping cohorts are formed from a shared random
/// base plus two disjoint small additions, and a frame is learned on each
/// with the manifold method and with the pseudo baseline. Frames are
/// sign-canonicalized before pairing (a harmonic and its negation are the
/// same wave). Each (region, harmonic) element is then compared across
/// replicates with a paired test; a significant difference means the
/// element failed to replicate under cohort perturbation, so lower counts
/// indicate a more stable method.
pub fn replicability_test(
    cohort: &[AdjacencyMatrix],
    config: &SolverConfig,
    split: ReplicabilitySplit,
    replicates: usize,
    seed: u64,
    alpha_level: f64,
) -> Result<ReplicabilityReport> {
    check_alpha(alpha_level)?;
    let m = cohort.len();
    split.validate(m)?;
    if replicates < 2 {
        return Err(Error::UndersizedSample {
            required: 2,
            found: replicates,
        });
    }

    // Draw every replicate's index sets up front so results do not depend
    // on how the parallel learning below is scheduled.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<usize>> = (0..replicates)
        .map(|_| sample(&mut rng, m, split.base + 2 * split.extra).into_vec())
        .collect();

    struct ReplicatePair {
        manifold_diff: DMatrix<f64>,
        pseudo_diff: DMatrix<f64>,
    }

    let learned_frame = |indices: &[usize]| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let members: Vec<AdjacencyMatrix> = indices.iter().map(|&i| cohort[i].clone()).collect();
        let model = learn_common_harmonics(&members, config)?;
        let mut manifold = model.common().matrix().clone();
        canonicalize_signs(&mut manifold);
        let mut pseudo = pseudo_mean_harmonics(&members, config.p)?.into_matrix();
        canonicalize_signs(&mut pseudo);
        Ok((manifold, pseudo))
    };

    let pairs: Vec<ReplicatePair> = draws
        .par_iter()
        .map(|draw| {
            let shared = &draw[..split.base];
            let first_extra = &draw[split.base..split.base + split.extra];
            let second_extra = &draw[split.base + split.extra..];
            let cohort_a: Vec<usize> = shared.iter().chain(first_extra).copied().collect();
            let cohort_b: Vec<usize> = shared.iter().chain(second_extra).copied().collect();
            let (manifold_a, pseudo_a) = learned_frame(&cohort_a)?;
            let (manifold_b, pseudo_b) = learned_frame(&cohort_b)?;
            Ok(ReplicatePair {
                manifold_diff: manifold_a - manifold_b,
                pseudo_diff: pseudo_a - pseudo_b,
            })
        })
        .collect::<Result<_>>()?;

    let first = cohort.first().expect("validated nonempty");
    let (n, p) = (first.n(), config.p);
    let manifold_diffs: Vec<DMatrix<f64>> =
        pairs.iter().map(|r| r.manifold_diff.clone()).collect();
    let pseudo_diffs: Vec<DMatrix<f64>> = pairs.iter().map(|r| r.pseudo_diff.clone()).collect();

    Ok(ReplicabilityReport {
        split,
        replicate_count: replicates,
        alpha_level,
        manifold: summarize_replicability(&manifold_diffs, n, p, alpha_level)?,
        pseudo: summarize_replicability(&pseudo_diffs, n, p, alpha_level)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{planted_signal_cohort, random_orthonormal, stochastic_block_cohort};

    fn basis(n: usize, p: usize, seed: u64) -> StiefelPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_orthonormal(n, p, &mut rng)
    }

    fn signal(values: &[f64]) -> NodeSignal {
        NodeSignal::new("s", "g", DVector::from_column_slice(values)).unwrap()
    }

    #[test]
    fn spectrum_of_a_basis_column_is_a_unit_impulse() {
        let basis = basis(12, 4, 3);
        let f = NodeSignal::new(
            "s",
            "g",
            DVector::from_column_slice(basis.matrix().column(1).as_slice()),
        )
        .unwrap();
        let spectrum = energy_spectrum(&f, &basis).unwrap();
        for h in 0..4 {
            let expected = if h == 1 { 1.0 } else { 0.0 };
            assert!((spectrum.powers()[h] - expected).abs() < 1e-12);
        }
        assert!((spectrum.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_of_the_zero_signal_vanishes() {
        let basis = basis(9, 3, 5);
        let f = signal(&[0.0; 9]);
        let spectrum = energy_spectrum(&f, &basis).unwrap();
        assert_eq!(spectrum.total(), 0.0);
        assert!(spectrum.energies().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn full_basis_preserves_the_signal_norm() {
        // Parseval: with p = n the energies resolve ||f||^2 exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = random_orthonormal(15, 15, &mut rng);
        for trial in 0..5 {
            let values = DVector::from_fn(15, |i, _| ((i + trial) as f64 * 0.37).sin() * 2.0);
            let f = NodeSignal::new(format!("s{trial}"), "g", values.clone()).unwrap();
            let spectrum = energy_spectrum(&f, &basis).unwrap();
            assert!(
                (spectrum.total() - values.norm_squared()).abs() < 1e-10,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn partial_energy_grows_with_the_harmonic_count() {
        let full = basis(10, 6, 13);
        let truncated = StiefelPoint::new(full.matrix().columns(0, 3).into_owned()).unwrap();
        let f = signal(&[0.4, -1.2, 0.3, 2.0, -0.7, 0.1, 0.9, -0.5, 1.4, -2.2]);
        let all = energy_spectrum(&f, &full).unwrap().total();
        let part = energy_spectrum(&f, &truncated).unwrap().total();
        assert!(part <= all + 1e-15);
    }

    #[test]
    fn spectrum_rejects_mismatched_lengths() {
        let basis = basis(8, 3, 2);
        let f = signal(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            energy_spectrum(&f, &basis),
            Err(Error::DimensionMismatch { .. })
        ));
        let psi = DVector::from_column_slice(&[0.5; 8]);
        assert!(split_power(&f, &psi).is_err());
    }

    #[test]
    fn signal_constructor_validates() {
        assert!(NodeSignal::new("s", "g", DVector::zeros(0)).is_err());
        assert!(NodeSignal::new("s", "g", DVector::from_column_slice(&[1.0, f64::NAN])).is_err());
    }

    #[test]
    fn split_power_hand_case() {
        let f = signal(&[1.0, 1.0]);
        let psi = DVector::from_column_slice(&[0.6, -0.8]);
        let (pos, neg) = split_power(&f, &psi).unwrap();
        assert!((pos - 0.6).abs() < 1e-15);
        assert!((neg - 0.8).abs() < 1e-15);
    }

    #[test]
    fn split_power_of_a_positive_harmonic_has_no_negative_part() {
        let f = signal(&[0.3, 1.5, -0.2]);
        let psi = DVector::from_column_slice(&[0.5, 0.5, 0.7]);
        let (pos, neg) = split_power(&f, &psi).unwrap();
        assert_eq!(neg, 0.0);
        assert!((pos - f.values().dot(&psi)).abs() < 1e-15);
    }

    #[test]
    fn split_power_parts_recombine_to_the_full_power() {
        // Zero entries contribute to neither side, so the signed parts
        // always sum back to <f, psi>.
        let f = signal(&[0.7, -1.1, 0.0, 2.3, -0.4]);
        let psi = DVector::from_column_slice(&[0.1, -0.5, 0.0, 0.7, -0.2]);
        let (pos, neg) = split_power(&f, &psi).unwrap();
        let signed_neg_part: f64 = f
            .values()
            .iter()
            .zip(psi.iter())
            .filter(|(_, &x)| x < 0.0)
            .map(|(f, x)| f * x)
            .sum();
        assert!((pos + signed_neg_part - f.values().dot(&psi)).abs() < 1e-12);
        assert!((neg - signed_neg_part.abs()).abs() < 1e-15);
    }

    #[test]
    fn permuting_basis_columns_permutes_the_spectrum() {
        let basis = basis(10, 4, 21);
        let mut swapped = basis.matrix().clone();
        swapped.swap_columns(0, 3);
        let swapped = StiefelPoint::new(swapped).unwrap();
        let f = signal(&[0.9, -0.1, 0.4, 1.2, -0.8, 0.3, 0.0, 0.5, -1.5, 0.2]);
        let original = energy_spectrum(&f, &basis).unwrap();
        let permuted = energy_spectrum(&f, &swapped).unwrap();
        assert!((original.powers()[0] - permuted.powers()[3]).abs() < 1e-15);
        assert!((original.powers()[3] - permuted.powers()[0]).abs() < 1e-15);
        assert!((original.total() - permuted.total()).abs() < 1e-12);
    }

    #[test]
    fn planted_harmonic_is_flagged_and_others_are_not() {
        let basis = basis(20, 6, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let signals = planted_signal_cohort(&basis, 30, 4, 2.0, 0.3, &mut rng);
        let report = group_energy_analysis(&signals, &basis, 0.01).unwrap();
        assert_eq!(report.group_a, "A");
        assert_eq!(report.group_b, "B");
        assert!(report.harmonics[4].significant);
        assert!(report.harmonics[4].p < 1e-6, "p = {}", report.harmonics[4].p);
        assert!(report.total_energy.significant);
        // The injection is orthogonal to every other harmonic.
        let other_flags = report
            .harmonics
            .iter()
            .enumerate()
            .filter(|(h, c)| *h != 4 && c.significant)
            .count();
        assert!(other_flags <= 1, "{other_flags} spurious flags");
        assert!(report.harmonics[4].fisher > report.harmonics[2].fisher);
    }

    #[test]
    fn identical_groups_produce_no_flags() {
        let basis = basis(8, 3, 31);
        let mut signals = Vec::new();
        for i in 0..4 {
            let values = DVector::from_fn(8, |k, _| ((k * i + 1) as f64).cos());
            signals.push(NodeSignal::new(format!("a{i}"), "A", values.clone()).unwrap());
            signals.push(NodeSignal::new(format!("b{i}"), "B", values).unwrap());
        }
        let report = group_energy_analysis(&signals, &basis, 0.01).unwrap();
        assert!(report.harmonics.iter().all(|c| !c.significant));
        assert!(!report.total_energy.significant);
        assert_eq!(report.total_energy.fisher, 0.0);
    }

    #[test]
    fn group_analysis_rejects_bad_cohorts() {
        let basis = basis(6, 2, 1);
        let lone: Vec<NodeSignal> = (0..3)
            .map(|i| NodeSignal::new(format!("s{i}"), "A", DVector::zeros(6)).unwrap())
            .collect();
        assert!(matches!(
            group_energy_analysis(&lone, &basis, 0.01),
            Err(Error::GroupCount { .. })
        ));

        let mut unbalanced = lone;
        unbalanced.push(NodeSignal::new("only", "B", DVector::zeros(6)).unwrap());
        assert!(matches!(
            group_energy_analysis(&unbalanced, &basis, 0.01),
            Err(Error::GroupTooSmall { .. })
        ));

        let basis_signals: Vec<NodeSignal> = (0..4)
            .map(|i| {
                let group = if i % 2 == 0 { "A" } else { "B" };
                NodeSignal::new(format!("s{i}"), group, DVector::zeros(6)).unwrap()
            })
            .collect();
        assert!(group_energy_analysis(&basis_signals, &basis, 1.5).is_err());
    }

    #[test]
    fn protocol_with_zero_replicates_is_empty() {
        let basis = basis(10, 3, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let signals = planted_signal_cohort(&basis, 8, 1, 2.0, 0.3, &mut rng);
        let report =
            positive_negative_protocol(&signals, &basis, 0.6, 0, 5, 0.01).unwrap();
        assert!(report.replicates.is_empty());
        assert_eq!(report.power_count_mean, 0.0);
    }

    #[test]
    fn protocol_recovers_the_planted_harmonic() {
        let basis = basis(20, 6, 55);
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let signals = planted_signal_cohort(&basis, 30, 4, 2.0, 0.3, &mut rng);
        let report =
            positive_negative_protocol(&signals, &basis, 0.6, 10, 77, 0.01).unwrap();
        let hits = report
            .replicates
            .iter()
            .filter(|r| r.power_significant.contains(&4))
            .count();
        assert!(hits >= 9, "planted harmonic found in {hits}/10 replicates");
        assert!(report.power_count_mean >= 1.0);
    }

    #[test]
    fn protocol_rejects_small_groups_and_bad_fractions() {
        let basis = basis(6, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let signals = planted_signal_cohort(&basis, 3, 0, 1.0, 0.1, &mut rng);
        assert!(matches!(
            positive_negative_protocol(&signals, &basis, 0.6, 2, 1, 0.01),
            Err(Error::GroupTooSmall { .. })
        ));
        let enough = planted_signal_cohort(&basis, 6, 0, 1.0, 0.1, &mut rng);
        assert!(positive_negative_protocol(&enough, &basis, 1.2, 2, 1, 0.01).is_err());
    }

    #[test]
    fn proportional_split_matches_the_reference_cohort() {
        let split = ReplicabilitySplit::proportional(94).unwrap();
        assert_eq!(split, ReplicabilitySplit { base: 70, extra: 5 });
        let small = ReplicabilitySplit::proportional(30).unwrap();
        assert_eq!(small, ReplicabilitySplit { base: 22, extra: 2 });
        assert!(ReplicabilitySplit::proportional(4).is_err());
    }

    #[test]
    fn replicability_rejects_oversized_splits_and_too_few_replicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cohort = stochastic_block_cohort(5, 12, 3, 0.9, 0.15, 0.2, &mut rng);
        let config = SolverConfig::new(3);
        let split = ReplicabilitySplit { base: 4, extra: 1 };
        assert!(matches!(
            replicability_test(&cohort, &config, split, 3, 1, 0.01),
            Err(Error::CohortTooSmall { .. })
        ));
        let ok = ReplicabilitySplit { base: 3, extra: 1 };
        assert!(matches!(
            replicability_test(&cohort, &config, ok, 1, 1, 0.01),
            Err(Error::UndersizedSample { .. })
        ));
    }

    #[test]
    fn identical_paired_cohorts_never_fail_to_replicate() {
        // With no extras the two cohorts coincide, so every paired
        // difference is exactly zero for both methods.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cohort = stochastic_block_cohort(6, 12, 3, 0.9, 0.15, 0.2, &mut rng);
        let mut config = SolverConfig::new(3);
        config.max_outer_iters = 8;
        let split = ReplicabilitySplit { base: 5, extra: 0 };
        let report = replicability_test(&cohort, &config, split, 3, 21, 0.01).unwrap();
        assert_eq!(report.manifold.element_failures, 0);
        assert_eq!(report.pseudo.element_failures, 0);
        assert!(report
            .manifold
            .p_values
            .iter()
            .flatten()
            .all(|&p| (p - 1.0).abs() < 1e-12));
        assert_eq!(report.manifold.region_failures.len(), 12);
    }
}

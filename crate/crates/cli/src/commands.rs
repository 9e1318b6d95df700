//! The five workflows behind the subcommands. Every command validates its
//! inputs, runs the library, and writes plain-text tables next to a JSON
//! summary in the output directory. All file writes happen here, on the
//! coordinating thread; worker threads only compute.

use std::fs;
use std::path::Path;

use harmonics::{
    arithmetic_mean_harmonics, build_laplacian, energy_spectrum, group_energy_analysis,
    learn_common_harmonics, load_cohort, positive_negative_protocol, pseudo_mean_harmonics,
    read_cohort_manifest, read_matrix, read_signal_table, reconstruction_error_curve,
    replicability_test, rotation_mean_options, run_synthetic_experiment, suggest_truncation,
    validate_on_manifold, write_matrix, AdjacencyMatrix, LoadedCohort, ReplicabilitySplit,
    StiefelPoint,
};
use nalgebra::DMatrix;
use serde_json::json;

use crate::{
    AnalyzeArgs, Failure, LearnArgs, PselectArgs, ReplicabilityArgs, SyntheticArgs,
    EXIT_ACCEPTANCE, EXIT_CONVERGENCE, EXIT_IO, EXIT_USAGE,
};

type CommandResult = Result<u8, Failure>;

fn io_failure(path: &Path, error: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("i/o error on {}: {error}", path.display()))
}

fn ensure_out_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text =
        serde_json::to_string_pretty(value).expect("json reports serialize without error");
    text.push('\n');
    write_text(path, &text)
}

/// Read a manifest and load every network it references. An empty
/// manifest is a usage error, not a crash further in.
fn load_manifest_cohort(path: &Path) -> Result<LoadedCohort, Failure> {
    let entries = read_cohort_manifest(path)?;
    if entries.is_empty() {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("manifest {} lists no subjects", path.display()),
        ));
    }
    Ok(load_cohort(&entries)?)
}

/// File-system-safe token for a subject id; uniqueness comes from the
/// numeric prefix of the frame file name.
fn sanitize(subject: &str) -> String {
    subject
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn frame_file_name(index: usize, subject: &str) -> String {
    format!("phi_{:03}_{}.txt", index + 1, sanitize(subject))
}

/// Fit the common frame and persist the whole model: the common frame,
/// the per-subject frames, the averaged-network baseline frame, the cost
/// trace, and a summary with the convergence metadata. When the outer
/// loop hits its cap the outputs are still written and the exit code
/// reports the cap.
pub fn learn(args: &LearnArgs) -> CommandResult {
    let cohort = load_manifest_cohort(&args.manifest)?;
    let n = cohort.networks[0].n();
    let config = args.solver.config(n);
    let model = learn_common_harmonics(&cohort.networks, &config)?;
    let pseudo = pseudo_mean_harmonics(&cohort.networks, config.p)?;
    let (_, arithmetic_deviation) = arithmetic_mean_harmonics(model.individuals())?;

    ensure_out_dir(&args.out)?;
    write_matrix(&args.out.join("common.txt"), model.common().matrix())?;
    write_matrix(&args.out.join("pseudo_mean.txt"), pseudo.matrix())?;

    let mut files = String::from("# role, subject, file\n");
    files.push_str("common, -, common.txt\n");
    files.push_str("pseudo_mean, -, pseudo_mean.txt\n");
    for (index, (subject, frame)) in cohort
        .subjects
        .iter()
        .zip(model.individuals())
        .enumerate()
    {
        let name = frame_file_name(index, subject);
        write_matrix(&args.out.join(&name), frame.matrix())?;
        files.push_str(&format!("frame, {subject}, {name}\n"));
    }
    write_text(&args.out.join("model.txt"), &files)?;

    let mut trace = String::from("# outer round, cost\n");
    for (round, cost) in model.cost_trace().iter().enumerate() {
        trace.push_str(&format!("{round}, {cost:.16e}\n"));
    }
    write_text(&args.out.join("cost_trace.txt"), &trace)?;

    let summary = json!({
        "n": n,
        "p": config.p,
        "subjects": cohort.subjects,
        "groups": cohort.groups,
        "lambda": config.lambda,
        "gamma": config.gamma,
        "strict": config.strict,
        "outer_iterations": model.outer_iterations(),
        "converged": model.converged(),
        "final_cost": model.cost_trace().last(),
        "arithmetic_mean_deviation": arithmetic_deviation,
    });
    write_json(&args.out.join("summary.json"), &summary)?;

    println!(
        "learned {} harmonics for {} subjects in {} outer rounds",
        config.p,
        cohort.len(),
        model.outer_iterations()
    );
    if model.converged() {
        Ok(0)
    } else {
        eprintln!("outer loop hit the iteration cap before the cost settled; outputs written");
        Ok(EXIT_CONVERGENCE)
    }
}

/// Project signals onto a frame and compare the two groups: per-subject
/// power and energy spectra, per-harmonic and total-energy tests, and
/// the train/holdout split-power protocol. Harmonics are numbered from 1
/// in the tables; regions keep their 0-based matrix indices.
pub fn analyze(args: &AnalyzeArgs) -> CommandResult {
    let frame_path = if args.model.is_dir() {
        args.model.join("common.txt")
    } else {
        args.model.clone()
    };
    let basis = StiefelPoint::new(read_matrix(&frame_path)?)?;
    let signals = read_signal_table(&args.signals)?;
    ensure_out_dir(&args.out)?;

    let mut powers = String::from("# subject, group, a_1 .. a_p\n");
    let mut energies = String::from("# subject, group, total, e_1 .. e_p\n");
    for signal in &signals {
        let spectrum = energy_spectrum(signal, &basis)?;
        powers.push_str(&format!("{}, {}", signal.subject(), signal.group()));
        for a in spectrum.powers().iter() {
            powers.push_str(&format!(", {a:.16e}"));
        }
        powers.push('\n');
        energies.push_str(&format!(
            "{}, {}, {:.16e}",
            signal.subject(),
            signal.group(),
            spectrum.total()
        ));
        for e in spectrum.energies().iter() {
            energies.push_str(&format!(", {e:.16e}"));
        }
        energies.push('\n');
    }
    write_text(&args.out.join("powers.txt"), &powers)?;
    write_text(&args.out.join("energies.txt"), &energies)?;

    let tests = group_energy_analysis(&signals, &basis, args.alpha)?;
    let mut table = String::from(
        "# harmonic, t, p, fisher, mean_a, std_a, mean_b, std_b, significant\n",
    );
    let row = |label: &str, c: &harmonics::GroupComparison| {
        format!(
            "{label}, {:.16e}, {:.16e}, {:.16e}, {:.16e}, {:.16e}, {:.16e}, {:.16e}, {}\n",
            c.t,
            c.p,
            c.fisher,
            c.mean_a,
            c.std_a,
            c.mean_b,
            c.std_b,
            c.significant as u8
        )
    };
    for (h, comparison) in tests.harmonics.iter().enumerate() {
        table.push_str(&row(&(h + 1).to_string(), comparison));
    }
    table.push_str(&row("total", &tests.total_energy));
    write_text(&args.out.join("group_tests.txt"), &table)?;

    let protocol = if args.replicates > 0 {
        Some(positive_negative_protocol(
            &signals,
            &basis,
            args.train_fraction,
            args.replicates,
            args.seed,
            args.alpha,
        )?)
    } else {
        None
    };
    if let Some(report) = &protocol {
        let value = serde_json::to_value(report).expect("json reports serialize without error");
        write_json(&args.out.join("protocol.json"), &value)?;
    }

    let significant: Vec<usize> = tests
        .harmonics
        .iter()
        .enumerate()
        .filter(|(_, c)| c.significant)
        .map(|(h, _)| h + 1)
        .collect();
    let summary = json!({
        "signals": signals.len(),
        "n": basis.n(),
        "p": basis.p(),
        "alpha": args.alpha,
        "tests": serde_json::to_value(&tests).expect("json reports serialize without error"),
        "significant_harmonics": significant,
        "total_energy_significant": tests.total_energy.significant,
        "protocol": protocol.as_ref().map(|r| json!({
            "replicates": r.replicates.len(),
            "power_count_mean": r.power_count_mean,
            "power_count_std": r.power_count_std,
            "split_count_mean": r.split_count_mean,
            "split_count_std": r.split_count_std,
        })),
    });
    write_json(&args.out.join("summary.json"), &summary)?;

    println!(
        "groups {} vs {}: {} of {} harmonics significant at alpha = {}, total energy {}",
        tests.group_a,
        tests.group_b,
        significant.len(),
        tests.harmonics.len(),
        args.alpha,
        if tests.total_energy.significant {
            "significant"
        } else {
            "not significant"
        }
    );
    Ok(0)
}

/// Compare the resampling stability of the manifold method against the
/// averaged-network baseline and persist both failure maps.
pub fn replicability(args: &ReplicabilityArgs) -> CommandResult {
    let cohort = load_manifest_cohort(&args.manifest)?;
    let n = cohort.networks[0].n();
    let config = args.solver.config(n);
    let split = match (args.base, args.extra) {
        (Some(base), Some(extra)) => ReplicabilitySplit { base, extra },
        _ => ReplicabilitySplit::proportional(cohort.len())?,
    };
    let report = replicability_test(
        &cohort.networks,
        &config,
        split,
        args.replicates,
        args.seed,
        args.alpha,
    )?;

    ensure_out_dir(&args.out)?;
    let p = config.p;
    let p_value_matrix = |values: &[Vec<f64>]| DMatrix::from_fn(n, p, |i, j| values[i][j]);
    write_matrix(
        &args.out.join("manifold_p_values.txt"),
        &p_value_matrix(&report.manifold.p_values),
    )?;
    write_matrix(
        &args.out.join("pseudo_p_values.txt"),
        &p_value_matrix(&report.pseudo.p_values),
    )?;

    let mut regions = String::from("# region, manifold failures, pseudo failures\n");
    for i in 0..n {
        regions.push_str(&format!(
            "{i}, {}, {}\n",
            report.manifold.region_failures[i], report.pseudo.region_failures[i]
        ));
    }
    write_text(&args.out.join("region_failures.txt"), &regions)?;

    let value = serde_json::to_value(&report).expect("json reports serialize without error");
    write_json(&args.out.join("report.json"), &value)?;
    let summary = json!({
        "networks": cohort.len(),
        "replicates": report.replicate_count,
        "base": report.split.base,
        "extra": report.split.extra,
        "alpha": report.alpha_level,
        "elements": n * p,
        "manifold_element_failures": report.manifold.element_failures,
        "pseudo_element_failures": report.pseudo.element_failures,
    });
    write_json(&args.out.join("summary.json"), &summary)?;

    println!(
        "element failures over {} replicates: manifold {}, averaged-network baseline {}",
        report.replicate_count, report.manifold.element_failures, report.pseudo.element_failures
    );
    Ok(0)
}

/// Reconstruction error against truncation order for each network, the
/// cohort average, and the suggested p under the flatness rule.
pub fn pselect(args: &PselectArgs) -> CommandResult {
    let (subjects, networks): (Vec<String>, Vec<AdjacencyMatrix>) =
        match (&args.manifest, &args.matrix) {
            (Some(path), None) => {
                let cohort = load_manifest_cohort(path)?;
                (cohort.subjects, cohort.networks)
            }
            (None, Some(path)) => {
                let network = AdjacencyMatrix::new(read_matrix(path)?)?;
                (vec!["matrix".into()], vec![network])
            }
            _ => unreachable!("clap enforces exactly one input source"),
        };
    let n = networks[0].n();
    let p_max = args.p_max.unwrap_or(n);

    let mut curves = Vec::with_capacity(networks.len());
    for (subject, network) in subjects.iter().zip(&networks) {
        let laplacian = build_laplacian(network).map_err(|e| e.for_subject(subject))?;
        let curve =
            reconstruction_error_curve(&laplacian, p_max).map_err(|e| e.for_subject(subject))?;
        curves.push(curve);
    }
    let mean_curve: Vec<(usize, f64)> = (0..p_max)
        .map(|k| {
            let mean = curves.iter().map(|c| c[k].1).sum::<f64>() / curves.len() as f64;
            (k + 1, mean)
        })
        .collect();

    ensure_out_dir(&args.out)?;
    let mut table = format!("# p, {}, mean\n", subjects.join(", "));
    for k in 0..p_max {
        table.push_str(&format!("{}", k + 1));
        for curve in &curves {
            table.push_str(&format!(", {:.16e}", curve[k].1));
        }
        table.push_str(&format!(", {:.16e}\n", mean_curve[k].1));
    }
    write_text(&args.out.join("curve.txt"), &table)?;

    let suggested = suggest_truncation(&mean_curve, args.fraction);
    let mut per_subject = serde_json::Map::new();
    for (subject, curve) in subjects.iter().zip(&curves) {
        per_subject.insert(
            subject.clone(),
            json!(suggest_truncation(curve, args.fraction)),
        );
    }
    let summary = json!({
        "n": n,
        "p_max": p_max,
        "fraction": args.fraction,
        "suggested_p": suggested,
        "per_subject": per_subject,
    });
    write_json(&args.out.join("summary.json"), &summary)?;

    println!("suggested p = {suggested} (flatness fraction {})", args.fraction);
    Ok(0)
}

/// Rotation averaging over seeded trials: the manifold mean must stay
/// orthonormal and come at least as close to the identity as the
/// polar-projected arithmetic mean; any trial violating that fails the
/// run with the acceptance exit code.
pub fn synthetic(args: &SyntheticArgs) -> CommandResult {
    let options = rotation_mean_options(args.count);
    let mode = args.axis.mode();
    ensure_out_dir(&args.out)?;

    let mut table = String::from("# seed, method, deviation, distance, iterations\n");
    let mut failing = Vec::new();
    for k in 0..args.trials {
        let seed = args.seed + k as u64;
        let report = run_synthetic_experiment(args.count, args.sigma, mode, seed, &options)?;
        let (_, mean_deviation) = validate_on_manifold(report.stiefel_mean.matrix(), 1e-8);
        table.push_str(&format!(
            "{seed}, manifold, {mean_deviation:.16e}, {:.16e}, {}\n",
            report.stiefel_distance, report.iterations
        ));
        table.push_str(&format!(
            "{seed}, arithmetic, {:.16e}, {:.16e}, 1\n",
            report.arithmetic_deviation, report.arithmetic_polar_distance
        ));
        let ok = report.converged
            && mean_deviation <= 1e-8
            && report.stiefel_distance <= report.arithmetic_polar_distance + 1e-9;
        if !ok {
            failing.push(seed);
        }
    }
    write_text(&args.out.join("report.txt"), &table)?;

    let summary = json!({
        "count": args.count,
        "sigma": args.sigma,
        "trials": args.trials,
        "first_seed": args.seed,
        "axis": format!("{:?}", args.axis).to_lowercase(),
        "pass": failing.is_empty(),
        "failing_seeds": failing,
    });
    write_json(&args.out.join("summary.json"), &summary)?;

    if failing.is_empty() {
        println!(
            "manifold mean within tolerance of or better than the arithmetic baseline in all {} trials",
            args.trials
        );
        Ok(0)
    } else {
        eprintln!("comparative criterion failed for seeds {failing:?}");
        Ok(EXIT_ACCEPTANCE)
    }
}

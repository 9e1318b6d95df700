//! Generate a synthetic demo cohort on disk: block-structured networks,
//! a cohort manifest, and a node-signal table carrying a planted group
//! difference along one harmonic of the cohort's averaged network.
//!
//! Usage:
//!     cargo run --release --example generate_cohort -- OUT_DIR \
//!         [SUBJECTS] [N] [BLOCKS] [SEED]

use std::env;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use harmonics::generators::stochastic_block_cohort;
use harmonics::{pseudo_mean_harmonics, write_matrix};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> ExitCode {
    let args: Vec<String> = env::args().collect();
    let Some(dir) = args.get(1).map(PathBuf::from) else {
        eprintln!("usage: generate_cohort OUT_DIR [SUBJECTS] [N] [BLOCKS] [SEED]");
        return ExitCode::from(2);
    };
    let parse = |k: usize, default: u64| {
        args.get(k)
            .map(|s| s.parse().expect("numeric argument"))
            .unwrap_or(default)
    };
    let subjects = parse(2, 10) as usize;
    let n = parse(3, 20) as usize;
    let blocks = parse(4, 5) as usize;
    let seed = parse(5, 7);
    let group_of = |index: usize| if index < subjects / 2 { "A" } else { "B" };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cohort = stochastic_block_cohort(subjects, n, blocks, 0.9, 0.15, 0.3, &mut rng);
    fs::create_dir_all(&dir).expect("create output directory");
    let mut manifest = String::from("# subject, file, group\n");
    for (index, network) in cohort.iter().enumerate() {
        let subject = format!("s{:02}", index + 1);
        let file = format!("{subject}.txt");
        write_matrix(&dir.join(&file), network.weights()).expect("write adjacency matrix");
        manifest.push_str(&format!("{subject}, {file}, {}\n", group_of(index)));
    }
    fs::write(dir.join("cohort.txt"), manifest).expect("write manifest");

    // Signals: node noise for everyone, plus a bump along the highest
    // kept harmonic of the averaged network for group B. The analyze
    // command should single that harmonic out.
    let basis = pseudo_mean_harmonics(&cohort, blocks).expect("averaged-network harmonics");
    let planted = basis.matrix().column(blocks - 1).into_owned();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut table = String::from("# subject, group, v_1 .. v_n\n");
    for index in 0..subjects {
        let mut values = DVector::from_fn(n, |_, _| 0.3 * normal.sample(&mut rng));
        if group_of(index) == "B" {
            values += 2.0 * &planted;
        }
        table.push_str(&format!("s{:02}, {}", index + 1, group_of(index)));
        for v in values.iter() {
            table.push_str(&format!(", {v:.16e}"));
        }
        table.push('\n');
    }
    fs::write(dir.join("signals.txt"), table).expect("write signal table");

    println!(
        "wrote {subjects} networks, cohort.txt, and signals.txt to {}",
        dir.display()
    );
    ExitCode::SUCCESS
}

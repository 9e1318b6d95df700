//! Dense matrix exponential by scaling and squaring with diagonal Pade
//! approximants (Higham 2005, "The scaling and squaring method for the
//! matrix exponential revisited").
//!
//! The geodesic step on the Stiefel manifold exponentiates a 2p x 2p block
//! matrix, so only small dense matrices arrive here; the classic order-13
//! scheme with exact 1-norm selection is more than adequate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// 1-norm thresholds theta_m for the order-3/5/7/9/13 approximants.
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_230e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068e0;
const THETA_13: f64 = 5.371_920_351_148_152e0;

const B_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(a) for a square matrix with finite entries.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    let k = rows;
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = one_norm(a);
    if norm <= THETA_9 {
        let degree = if norm <= THETA_3 {
            3
        } else if norm <= THETA_5 {
            5
        } else if norm <= THETA_7 {
            7
        } else {
            9
        };
        return pade_low(a, degree);
    }

    // Scale below theta_13, exponentiate, then square back up.
    let s = ((norm / THETA_13).log2().ceil() as i32).max(0);
    let scaled = a * 2f64.powi(-s);
    let mut result = pade_13(&scaled)?;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// Diagonal Pade approximant of order 3, 5, 7 or 9: U collects odd powers,
/// V even powers, and exp(a) ~ (V - U)^-1 (V + U).
fn pade_low(a: &DMatrix<f64>, degree: usize) -> Result<DMatrix<f64>> {
    let b: &[f64] = match degree {
        3 => &B_3,
        5 => &B_5,
        7 => &B_7,
        _ => &B_9,
    };
    let k = a.nrows();
    let identity = DMatrix::identity(k, k);
    let mut even_powers = vec![identity.clone()]; // a^0, a^2, a^4, ...
    let a2 = a * a;
    for i in 1..=(degree / 2) {
        let next = &even_powers[i - 1] * &a2;
        even_powers.push(next);
    }

    let mut u_inner = DMatrix::zeros(k, k);
    let mut v = DMatrix::zeros(k, k);
    for (i, power) in even_powers.iter().enumerate() {
        u_inner += power * b[2 * i + 1];
        v += power * b[2 * i];
    }
    let u = a * u_inner;
    solve_pade(u, v)
}

/// Order-13 approximant with Higham's factored evaluation, which needs only
/// the powers a^2, a^4, a^6.
fn pade_13(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = a.nrows();
    let identity = DMatrix::identity(k, k);
    let b = &B_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_high = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u_low = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &identity * b[1];
    let u = a * (u_high + u_low);

    let v_high = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_high + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + identity * b[0];
    solve_pade(u, v)
}

fn solve_pade(u: DMatrix<f64>, v: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let numerator = &v + &u;
    (v - u)
        .lu()
        .solve(&numerator)
        .ok_or_else(|| Error::ZeroDenominator("matrix exponential denominator solve".into()))
}

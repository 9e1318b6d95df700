//! Arithmetic on the Stiefel manifold V(n,p), the set of n x p matrices
//! with orthonormal columns.
//!
//! The distance used throughout is the ambient (chordal) approximation
//!
//! d^2(X, Y) = p - tr(X'Y) = (1/2) ||X - Y||_F^2,
//!
//! not a geodesic distance; endpoint geodesics on V(n,p) have no analytical
//! formula. Tangent vectors at X are the matrices Delta with X'Delta
//! skew-symmetric. Geodesics leave X along a tangent via the QR-based
//! exponential map of Edelman, Arias and Smith (1998): factor the normal
//! component (I - XX')Delta = QR, exponentiate the 2p x 2p block matrix
//! [[A, -R'], [R, 0]] with A = X'Delta, and combine as XB + QC.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expm::expm;

/// Default orthonormality tolerance for points, max |X'X - I|.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative skew-residual tolerance for tangent vectors.
const SKEW_TOL: f64 = 1e-8;

/// When the normal component (I - XX')Delta is this small relative to
/// ||Delta||_F, the tangent counts as lying in span(X) and the geodesic
/// reduces to X exp(X'Delta), avoiding a QR of a numerically rank-free
/// matrix. The test must be relative: an absolute cutoff silently drops
/// the normal part of legitimately tiny steps and stalls any iteration
/// that converges through them.
const REDUCED_PATH_TOL: f64 = 1e-12;

/// Max |X'X - I_p| and whether it is within `tol`.
pub fn validate_on_manifold(matrix: &DMatrix<f64>, tol: f64) -> (bool, f64) {
    let p = matrix.ncols();
    let gram = matrix.transpose() * matrix;
    let deviation = (gram - DMatrix::identity(p, p)).amax();
    (deviation <= tol, deviation)
}

/// Closest matrix with orthonormal columns in Frobenius norm: the factor
/// UV' from the compact SVD M = U S V'. Well-defined whenever M has full
/// column rank.
pub fn polar_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
        .ok_or(Error::SvdFailure { rows, cols })?;
    let u = svd.u.ok_or(Error::SvdFailure { rows, cols })?;
    let v_t = svd.v_t.ok_or(Error::SvdFailure { rows, cols })?;
    Ok(u * v_t)
}

/// An n x p matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    matrix: DMatrix<f64>,
}

impl StiefelPoint {
    /// Validates orthonormality at the default tolerance.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_TOL)
    }

    pub fn with_tolerance(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let (n, p) = matrix.shape();
        if p == 0 || p > n {
            return Err(Error::DimensionMismatch {
                context: "Stiefel point".into(),
                expected: "1 <= p <= n".into(),
                found: format!("{n}x{p}"),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Stiefel point entries".into()));
        }
        let (ok, deviation) = validate_on_manifold(&matrix, tol);
        if !ok {
            return Err(Error::OffManifold {
                deviation,
                tolerance: tol,
            });
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn squared_distance_to(&self, other: &StiefelPoint) -> Result<f64> {
        squared_distance(self, other)
    }

    pub fn project_tangent(&self, direction: &DMatrix<f64>) -> Result<TangentVector> {
        project_to_tangent(self, direction)
    }

    pub fn exp(&self, delta: &TangentVector) -> Result<StiefelPoint> {
        exp_map(self, delta)
    }
}

/// A direction Delta of first-order motion at a base point X, satisfying
/// the skew condition X'Delta + Delta'X = 0.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: StiefelPoint,
    matrix: DMatrix<f64>,
}

impl TangentVector {
    /// Validates the skew condition; the residual tolerance scales with
    /// ||Delta||_F so large gradients are not rejected for roundoff.
    pub fn new(base: StiefelPoint, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.shape() != base.matrix.shape() {
            return Err(Error::DimensionMismatch {
                context: "tangent vector".into(),
                expected: format!("{}x{}", base.n(), base.p()),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("tangent vector entries".into()));
        }
        let product = base.matrix.transpose() * &matrix;
        let residual = (&product + product.transpose()).amax();
        if residual > SKEW_TOL * (1.0 + matrix.norm()) {
            return Err(Error::NotTangent { residual });
        }
        Ok(Self { base, matrix })
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// Scaling preserves the skew condition exactly.
    pub fn scaled(&self, t: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            matrix: &self.matrix * t,
        }
    }
}

/// d^2(X, Y) = p - tr(X'Y). Symmetric in its arguments with range [0, 2p].
pub fn squared_distance(x: &StiefelPoint, y: &StiefelPoint) -> Result<f64> {
    if x.matrix.shape() != y.matrix.shape() {
        return Err(Error::DimensionMismatch {
            context: "squared distance".into(),
            expected: format!("{}x{}", x.n(), x.p()),
            found: format!("{}x{}", y.n(), y.p()),
        });
    }
    Ok(x.p() as f64 - (x.matrix.transpose() * &y.matrix).trace())
}

/// Manifold gradient from an ambient direction G: Delta = G - X G' X.
/// The output satisfies the skew condition identically, for any G.
pub fn project_to_tangent(x: &StiefelPoint, direction: &DMatrix<f64>) -> Result<TangentVector> {
    if direction.shape() != x.matrix.shape() {
        return Err(Error::DimensionMismatch {
            context: "tangent projection".into(),
            expected: format!("{}x{}", x.n(), x.p()),
            found: format!("{}x{}", direction.nrows(), direction.ncols()),
        });
    }
    let delta = direction - &x.matrix * direction.transpose() * &x.matrix;
    TangentVector::new(x.clone(), delta)
}

/// Geodesic step from X along Delta.
///
/// When the normal component (I - XX')Delta vanishes the geodesic stays in
/// span(X) and reduces to X exp(A). Otherwise the full QR path runs; the
/// result is re-orthonormalized through the polar factor if accumulated
/// roundoff pushes it past the manifold tolerance.
pub fn exp_map(x: &StiefelPoint, delta: &TangentVector) -> Result<StiefelPoint> {
    let base_gap = (&delta.base.matrix - &x.matrix).amax();
    if base_gap > 1e-12 {
        return Err(Error::NotTangent { residual: base_gap });
    }
    let p = x.p();
    let a = x.matrix.transpose() * &delta.matrix;
    let normal = &delta.matrix - &x.matrix * &a;

    let y = if normal.norm() <= REDUCED_PATH_TOL * delta.matrix.norm() {
        &x.matrix * expm(&a)?
    } else {
        let qr = normal.qr();
        let q = qr.q();
        let r = qr.r();
        let mut block = DMatrix::zeros(2 * p, 2 * p);
        block.view_mut((0, 0), (p, p)).copy_from(&a);
        block.view_mut((0, p), (p, p)).copy_from(&(-r.transpose()));
        block.view_mut((p, 0), (p, p)).copy_from(&r);
        let e = expm(&block)?;
        let b = e.view((0, 0), (p, p));
        let c = e.view((p, 0), (p, p));
        &x.matrix * b + q * c
    };

    let (ok, _) = validate_on_manifold(&y, DEFAULT_TOL);
    let y = if ok { y } else { polar_factor(&y)? };
    StiefelPoint::new(y)
}

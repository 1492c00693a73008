//! The Stiefel manifold `St(p, k)` of p x k matrices with orthonormal
//! columns, with the Euclidean metric inherited from `R^{p x k}`.
//!
//! Three retractions are provided (polar, QR, orthographic) together with
//! their inverses or liftings, plus the differential of the QR projection
//! used as a lifting for the QR projected mean.

use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite, orthonormal_complement, polar_orthogonal_factor, qr_positive,
    solve_riccati_orthographic, solve_sym_product, solve_upper_from_sym, skew, strict_lower, sym, Mat,
};

/// Tolerance on `‖U^T U - I‖` and on the tangent constraint at construction.
pub const MANIFOLD_TOL: f64 = 1e-8;

/// A p x k matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint(Mat);

impl StiefelPoint {
    pub fn new(u: Mat) -> Result<Self> {
        ensure_finite(&u)?;
        let (p, k) = u.shape();
        if k == 0 || k > p {
            return Err(Error::DimensionMismatch {
                expected: "p x k with 1 <= k <= p".into(),
                found: format!("{p} x {k}"),
            });
        }
        let residual = orthonormality_residual(&u);
        if residual >= MANIFOLD_TOL {
            return Err(Error::NotOnManifold(format!(
                "‖U^T U - I‖ = {residual:.3e}"
            )));
        }
        Ok(StiefelPoint(u))
    }

    pub(crate) fn new_unchecked(u: Mat) -> Self {
        StiefelPoint(u)
    }

    /// The first k columns of the p x p identity.
    pub fn identity(p: usize, k: usize) -> Self {
        StiefelPoint(Mat::identity(p, k))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }
}

impl From<StiefelPoint> for Mat {
    fn from(p: StiefelPoint) -> Mat {
        p.0
    }
}

/// `‖U^T U - I‖_F`.
pub fn orthonormality_residual(u: &Mat) -> f64 {
    let k = u.ncols();
    (u.transpose() * u - Mat::identity(k, k)).norm()
}

/// A tangent vector `ξ` at a Stiefel point `U`: `U^T ξ + ξ^T U = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelTangent {
    base: StiefelPoint,
    xi: Mat,
}

impl StiefelTangent {
    pub fn new(base: StiefelPoint, xi: Mat) -> Result<Self> {
        check_same_shape(base.matrix(), &xi)?;
        ensure_finite(&xi)?;
        let utx = base.matrix().transpose() * &xi;
        let residual = (&utx + utx.transpose()).norm();
        if residual >= MANIFOLD_TOL {
            return Err(Error::NotTangent(residual));
        }
        Ok(StiefelTangent { base, xi })
    }

    pub(crate) fn new_unchecked(base: StiefelPoint, xi: Mat) -> Self {
        StiefelTangent { base, xi }
    }

    pub fn zero(base: StiefelPoint) -> Self {
        let xi = Mat::zeros(base.p(), base.k());
        StiefelTangent { base, xi }
    }

    pub fn base(&self) -> &StiefelPoint {
        &self.base
    }

    pub fn xi(&self) -> &Mat {
        &self.xi
    }

    pub fn into_xi(self) -> Mat {
        self.xi
    }
}

fn check_same_shape(a: &Mat, b: &Mat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x {}", a.nrows(), a.ncols()),
            found: format!("{} x {}", b.nrows(), b.ncols()),
        });
    }
    Ok(())
}

/// Euclidean projection of an ambient matrix onto `St(p, k)`: the polar
/// factor.
pub fn proj_to_stiefel(x: &Mat) -> Result<StiefelPoint> {
    polar_orthogonal_factor(x).map(StiefelPoint)
}

/// Orthogonal projection onto the tangent space at `U`:
/// `Z - U sym(U^T Z)`.
pub fn tangent_project(u: &StiefelPoint, z: &Mat) -> StiefelTangent {
    assert_eq!(u.matrix().shape(), z.shape(), "tangent_project: shape mismatch");
    let um = u.matrix();
    let xi = z - um * sym(&(um.transpose() * z));
    StiefelTangent::new_unchecked(u.clone(), xi)
}

/// Polar retraction `uf(U + ξ)`.
pub fn retract_polar(u: &StiefelPoint, xi: &StiefelTangent) -> Result<StiefelPoint> {
    check_same_shape(u.matrix(), xi.xi())?;
    proj_to_stiefel(&(u.matrix() + xi.xi()))
}

/// QR retraction `qf(U + ξ)`.
pub fn retract_qr(u: &StiefelPoint, xi: &StiefelTangent) -> Result<StiefelPoint> {
    check_same_shape(u.matrix(), xi.xi())?;
    qr_positive(&(u.matrix() + xi.xi())).map(|(q, _)| StiefelPoint(q))
}

/// Inverse of the polar retraction: `ξ = V S - U` with `S` symmetric solving
/// `(U^T V) S + S (V^T U) = 2 I`.
///
/// Outside the neighborhood where `S` is positive definite the returned
/// vector is still tangent but no longer maps back to `V`.
pub fn inv_retract_polar(u: &StiefelPoint, v: &StiefelPoint) -> Result<StiefelTangent> {
    check_same_shape(u.matrix(), v.matrix())?;
    let s = solve_sym_product(&(u.matrix().transpose() * v.matrix()))?;
    let xi = v.matrix() * s - u.matrix();
    Ok(StiefelTangent::new_unchecked(u.clone(), xi))
}

/// Inverse of the QR retraction: `ξ = V R - U` with `R` upper triangular
/// solving `(U^T V) R + R^T (V^T U) = 2 I`.
pub fn inv_retract_qr(u: &StiefelPoint, v: &StiefelPoint) -> Result<StiefelTangent> {
    check_same_shape(u.matrix(), v.matrix())?;
    let r = solve_upper_from_sym(&(u.matrix().transpose() * v.matrix()))?;
    let xi = v.matrix() * r - u.matrix();
    Ok(StiefelTangent::new_unchecked(u.clone(), xi))
}

/// Orthographic lifting, the inverse of the orthographic retraction:
/// the tangent projection of `V - U`.
pub fn lift_orthographic(u: &StiefelPoint, v: &StiefelPoint) -> StiefelTangent {
    tangent_project(u, &(v.matrix() - u.matrix()))
}

/// Orthographic retraction `V = U + ξ - U S`, where the symmetric `S` puts
/// `V` back on the manifold while keeping `V - (U + ξ)` normal at `U`.
pub fn retract_orthographic(u: &StiefelPoint, xi: &StiefelTangent) -> Result<StiefelPoint> {
    check_same_shape(u.matrix(), xi.xi())?;
    let um = u.matrix();
    // Drop the round-off normal part of ξ: `S` only corrects along the
    // tangent directions, so any normal part would leave V off the manifold
    // and, inside a fixed-point loop, double every iteration.
    let x = tangent_project(u, xi.xi()).into_xi();
    let a = skew(&(um.transpose() * &x));
    let q = sym(&(x.transpose() * &x));
    let s = solve_riccati_orthographic(&a, &q)?;
    Ok(StiefelPoint(um + x - um * s))
}

/// Differential of the QR projection at `G` (where the triangular factor is
/// the identity) applied to `M - G`:
/// `G⊥ G⊥^T (M - G) + G (L - L^T)` with `L` the strictly lower part of
/// `G^T (M - G)`.
pub fn lift_qr_differential(g: &StiefelPoint, m: &StiefelPoint) -> StiefelTangent {
    assert_eq!(g.matrix().shape(), m.matrix().shape(), "lift_qr_differential: shape mismatch");
    let gm = g.matrix();
    let d = m.matrix() - gm;
    let perp = orthonormal_complement(gm);
    let normal = &perp * (perp.transpose() * &d);
    let l = strict_lower(&(gm.transpose() * &d));
    let xi = normal + gm * (&l - l.transpose());
    StiefelTangent::new_unchecked(g.clone(), xi)
}

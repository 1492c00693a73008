//! The Grassmann manifold `Gr(p, k)` identified with rank-k orthogonal
//! projectors in the space of p x p symmetric matrices.
//!
//! Geodesic tools (exp/log) work on orthonormal representatives `U` of the
//! projector `U U^T`, with horizontal tangent vectors `Δ` (`U^T Δ = 0`).

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, principal_angles, svd, sym, sym_eig, Mat};
use crate::stiefel::{StiefelPoint, MANIFOLD_TOL};

/// Relative eigenvalue-gap threshold for a unique projection.
pub const GAP_RTOL: f64 = 1e-10;
/// Smallest admissible singular value of `U^T V` in the logarithm.
pub const ANGLE_TOL: f64 = 1e-10;

const TRACE_TOL: f64 = 1e-6;

/// A rank-k orthogonal projector.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    proj: Mat,
    rank: usize,
}

impl GrassmannPoint {
    /// Validates symmetry, idempotence and integer trace; the rank is read
    /// off the trace.
    pub fn new(proj: Mat) -> Result<Self> {
        ensure_finite(&proj)?;
        let p = proj.nrows();
        if proj.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                found: format!("{} x {}", proj.nrows(), proj.ncols()),
            });
        }
        let asym = (&proj - proj.transpose()).norm();
        if asym >= MANIFOLD_TOL {
            return Err(Error::NotOnManifold(format!("‖P - P^T‖ = {asym:.3e}")));
        }
        let idem = (&proj * &proj - &proj).norm();
        if idem >= MANIFOLD_TOL {
            return Err(Error::NotOnManifold(format!("‖P² - P‖ = {idem:.3e}")));
        }
        let trace = proj.trace();
        let rank = trace.round();
        if (trace - rank).abs() >= TRACE_TOL || rank < 1.0 {
            return Err(Error::NotOnManifold(format!("trace {trace} is not a positive integer")));
        }
        Ok(GrassmannPoint {
            proj,
            rank: rank as usize,
        })
    }

    pub fn with_rank(proj: Mat, k: usize) -> Result<Self> {
        let point = Self::new(proj)?;
        if point.rank != k {
            return Err(Error::NotOnManifold(format!(
                "projector has rank {}, expected {k}",
                point.rank
            )));
        }
        Ok(point)
    }

    pub fn matrix(&self) -> &Mat {
        &self.proj
    }

    pub fn into_matrix(self) -> Mat {
        self.proj
    }

    pub fn p(&self) -> usize {
        self.proj.nrows()
    }

    pub fn k(&self) -> usize {
        self.rank
    }

    /// Orthonormal basis of the range: eigenvectors with eigenvalue > 1/2.
    pub fn range(&self) -> StiefelPoint {
        let eig = sym_eig(&self.proj).expect("projector is finite and square");
        debug_assert!(eig.eigenvalues.iter().filter(|&&l| l > 0.5).count() == self.rank);
        StiefelPoint::new_unchecked(eig.leading(self.rank))
    }
}

impl From<GrassmannPoint> for Mat {
    fn from(p: GrassmannPoint) -> Mat {
        p.proj
    }
}

/// A symmetric `ξ` with `P ξ + ξ P = ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannTangent {
    base: GrassmannPoint,
    xi: Mat,
}

impl GrassmannTangent {
    pub fn new(base: GrassmannPoint, xi: Mat) -> Result<Self> {
        ensure_finite(&xi)?;
        if xi.shape() != base.matrix().shape() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0} x {0}", base.p()),
                found: format!("{} x {}", xi.nrows(), xi.ncols()),
            });
        }
        let pm = base.matrix();
        let residual = (pm * &xi + &xi * pm - &xi).norm() + (&xi - xi.transpose()).norm();
        if residual >= MANIFOLD_TOL {
            return Err(Error::NotTangent(residual));
        }
        Ok(GrassmannTangent { base, xi })
    }

    pub fn base(&self) -> &GrassmannPoint {
        &self.base
    }

    pub fn xi(&self) -> &Mat {
        &self.xi
    }

    pub fn into_xi(self) -> Mat {
        self.xi
    }
}

/// `U ↦ U U^T`.
pub fn stiefel_to_grassmann(u: &StiefelPoint) -> GrassmannPoint {
    let um = u.matrix();
    GrassmannPoint {
        proj: sym(&(um * um.transpose())),
        rank: u.k(),
    }
}

/// Euclidean projection of a symmetric matrix onto `Gr(p, k)`: the projector
/// onto the span of the top-k eigenvectors.
pub fn proj_to_grassmann(x: &Mat, k: usize) -> Result<GrassmannPoint> {
    let p = x.nrows();
    if k == 0 || k > p {
        return Err(Error::DimensionMismatch {
            expected: format!("rank 1..={p}"),
            found: k.to_string(),
        });
    }
    let eig = sym_eig(x)?;
    if k < p {
        let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
        let tol = GAP_RTOL * scale;
        let gap = eig.eigenvalues[k - 1] - eig.eigenvalues[k];
        if !(gap > tol) {
            return Err(Error::EigenGapDegenerate { gap, tol });
        }
    }
    let vk = eig.leading(k);
    Ok(GrassmannPoint {
        proj: sym(&(&vk * vk.transpose())),
        rank: k,
    })
}

/// Orthogonal projection onto the tangent space at `P`:
/// `2 sym((I - P) Z P)`.
pub fn tangent_project_gr(p: &GrassmannPoint, z: &Mat) -> GrassmannTangent {
    assert_eq!(p.matrix().shape(), z.shape(), "tangent_project_gr: shape mismatch");
    let pm = p.matrix();
    let n = p.p();
    let xi = sym(&((Mat::identity(n, n) - pm) * z * pm)) * 2.0;
    GrassmannTangent {
        base: p.clone(),
        xi,
    }
}

/// Grassmann exponential on representatives: with the thin SVD
/// `Δ = W Σ Y^T`, returns `U Y cos(Σ) Y^T + W sin(Σ) Y^T`.
pub fn gr_exp(u: &StiefelPoint, delta: &Mat) -> Result<StiefelPoint> {
    let um = u.matrix();
    if delta.shape() != um.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x {}", um.nrows(), um.ncols()),
            found: format!("{} x {}", delta.nrows(), delta.ncols()),
        });
    }
    ensure_finite(delta)?;
    let horizontal = (um.transpose() * delta).norm();
    if horizontal >= MANIFOLD_TOL {
        return Err(Error::NotTangent(horizontal));
    }
    let dec = svd(delta)?;
    let (w, yt) = (dec.u, dec.v_t);
    let cos = Mat::from_diagonal(&dec.singular_values.map(f64::cos));
    let sin = Mat::from_diagonal(&dec.singular_values.map(f64::sin));
    let out = um * yt.transpose() * cos * &yt + w * sin * &yt;
    Ok(StiefelPoint::new_unchecked(out))
}

/// Grassmann logarithm on representatives. Equals `W atan(Σ) Y^T` for the
/// thin SVD `(I - U U^T) V (U^T V)^{-1} = W Σ Y^T`, but is evaluated without
/// the inverse: `V` is first rotated to the representative `V*` with
/// `U^T V*` symmetric positive definite, then the SVD `(I - U U^T) V* = W S Y^T`
/// gives the sines and `Y^T U^T V* Y` the matching cosines, so each angle is
/// an `atan2` of two well-conditioned quantities.
pub fn gr_log(u: &StiefelPoint, v: &StiefelPoint) -> Result<Mat> {
    let um = u.matrix();
    let vm = v.matrix();
    if um.shape() != vm.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x {}", um.nrows(), um.ncols()),
            found: format!("{} x {}", vm.nrows(), vm.ncols()),
        });
    }
    let vtu = vm.transpose() * um;
    let align = svd(&vtu)?;
    let cosine = align.singular_values.min();
    if !(cosine > ANGLE_TOL) {
        return Err(Error::CutLocus { cosine });
    }
    let aligned = vm * align.u * align.v_t;
    let c = um.transpose() * &aligned;
    let normal = &aligned - um * &c;
    let sines = svd(&normal)?;
    let (w, yt) = (sines.u, sines.v_t);
    let cos = &yt * c * yt.transpose();
    let theta = Mat::from_diagonal(&sines.singular_values.zip_map(&cos.diagonal(), f64::atan2));
    Ok(w * theta * yt)
}

/// Squared subspace distance `Σ θ_i²` between two representatives.
pub fn subspace_distance_sq(u: &StiefelPoint, v: &StiefelPoint) -> f64 {
    principal_angles(u.matrix(), v.matrix())
        .iter()
        .map(|t| t * t)
        .sum()
}

/// Squared Riemannian distance between projectors, `Σ θ_i²` over the
/// principal angles between their ranges.
pub fn gr_distance_sq(p: &GrassmannPoint, q: &GrassmannPoint) -> f64 {
    assert_eq!(p.matrix().shape(), q.matrix().shape(), "gr_distance_sq: shape mismatch");
    assert_eq!(p.k(), q.k(), "gr_distance_sq: rank mismatch");
    subspace_distance_sq(&p.range(), &q.range())
}

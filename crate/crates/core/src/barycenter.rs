//! Averaging on Stiefel and Grassmann manifolds.
//!
//! A retraction/lifting pair `(R, L)` defines a barycenter `G` as a solution
//! of `(1/n) Σ L_G(M_i) = 0`, computed by iterating
//! `G <- R_G((1/n) Σ L_G(M_i))`. With the exact inverse retraction as lifting
//! this is an R-barycenter; with `exp`/`log` it is the Riemannian mean.
//!
//! Taking the Euclidean projection onto the manifold as retraction and the
//! tangent projection of `M - G` as lifting, the fixed point is available in
//! closed form: the projection of the arithmetic mean. The same holds for the
//! QR projection paired with its differential.

use crate::error::{Error, Result};
use crate::grassmann::{
    gr_exp, gr_log, proj_to_grassmann, stiefel_to_grassmann, tangent_project_gr, GrassmannPoint,
};
use crate::linalg::{qr_positive, Mat};
use crate::stiefel::{
    inv_retract_polar, inv_retract_qr, lift_orthographic, lift_qr_differential, proj_to_stiefel,
    retract_orthographic, retract_polar, retract_qr, StiefelPoint, StiefelTangent,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    /// Threshold on the norm of the averaged lifting.
    pub tol: f64,
    pub max_iter: usize,
    /// Sample used as the initial iterate.
    pub init_index: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            tol: 1e-10,
            max_iter: 200,
            init_index: 0,
        }
    }
}

impl SolverControls {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if self.init_index >= n_samples {
            return Err(Error::InvalidConfig(format!(
                "init_index {} out of range for {n_samples} samples",
                self.init_index
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BarycenterResult<P> {
    /// Final iterate, or the iterate with the smallest step norm when the
    /// solver did not converge.
    pub point: P,
    /// Number of averaged-lifting evaluations.
    pub iterations: usize,
    pub final_step_norm: f64,
    pub converged: bool,
    /// Norm of the averaged lifting at each iterate.
    pub step_norms: Vec<f64>,
    /// `Σ ‖L_G(M_i)‖²` at each iterate. For the Riemannian mean this is the
    /// Fréchet objective.
    pub lifting_energy: Vec<f64>,
}

fn check_shapes<'a, I>(mut shapes: I) -> Result<()>
where
    I: Iterator<Item = (usize, usize)> + 'a,
{
    let Some(first) = shapes.next() else {
        return Err(Error::EmptyInput);
    };
    for (i, s) in shapes.enumerate() {
        if s != first {
            return Err(Error::DimensionMismatch {
                expected: format!("{} x {} (sample 0)", first.0, first.1),
                found: format!("{} x {} (sample {})", s.0, s.1, i + 1),
            });
        }
    }
    Ok(())
}

/// Averaged lifting `(1/n) Σ L_G(M_i)` and `Σ ‖L_G(M_i)‖²`.
pub fn mean_lifting<P, L>(g: &P, samples: &[P], lift: L) -> Result<(Mat, f64)>
where
    L: Fn(&P, &P) -> Result<Mat>,
{
    let mut sum: Option<Mat> = None;
    let mut energy = 0.0;
    for (i, m) in samples.iter().enumerate() {
        let l = lift(g, m).map_err(|e| Error::lifting(i, e))?;
        energy += l.norm_squared();
        match sum.as_mut() {
            Some(s) => *s += &l,
            None => sum = Some(l),
        }
    }
    let sum = sum.ok_or(Error::EmptyInput)?;
    Ok((sum / samples.len() as f64, energy))
}

/// Generic retraction/lifting fixed-point iteration, started at
/// `samples[controls.init_index]`.
pub fn rl_fixed_point<P, R, L>(
    samples: &[P],
    retract: R,
    lift: L,
    controls: &SolverControls,
) -> Result<BarycenterResult<P>>
where
    P: Clone,
    R: Fn(&P, &Mat) -> Result<P>,
    L: Fn(&P, &P) -> Result<Mat>,
{
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    controls.validate(samples.len())?;

    let mut g = samples[controls.init_index].clone();
    let mut step_norms = Vec::new();
    let mut lifting_energy = Vec::new();
    let mut best: Option<(P, f64)> = None;

    for _ in 0..controls.max_iter {
        let (mean, energy) = mean_lifting(&g, samples, &lift)?;
        let step = mean.norm();
        step_norms.push(step);
        lifting_energy.push(energy);
        if !step.is_finite() {
            break;
        }
        if best.as_ref().is_none_or(|(_, b)| step < *b) {
            best = Some((g.clone(), step));
        }
        if step <= controls.tol {
            return Ok(BarycenterResult {
                point: g,
                iterations: step_norms.len(),
                final_step_norm: step,
                converged: true,
                step_norms,
                lifting_energy,
            });
        }
        // A step outside the retraction's domain ends the run like a
        // non-convergent one.
        match retract(&g, &mean) {
            Ok(next) => g = next,
            Err(e) => {
                log::debug!("retraction failed after {} iterations: {e}", step_norms.len());
                break;
            }
        }
    }

    let (point, final_step_norm) = best.unwrap_or((g, f64::NAN));
    Ok(BarycenterResult {
        point,
        iterations: step_norms.len(),
        final_step_norm,
        converged: false,
        step_norms,
        lifting_energy,
    })
}

fn stiefel_fixed_point<R, L>(
    samples: &[StiefelPoint],
    retract: R,
    lift: L,
    controls: &SolverControls,
) -> Result<BarycenterResult<StiefelPoint>>
where
    R: Fn(&StiefelPoint, &StiefelTangent) -> Result<StiefelPoint>,
    L: Fn(&StiefelPoint, &StiefelPoint) -> Result<StiefelTangent>,
{
    check_shapes(samples.iter().map(|s| s.matrix().shape()))?;
    rl_fixed_point(
        samples,
        |g, xi| retract(g, &StiefelTangent::new_unchecked(g.clone(), xi.clone())),
        |g, m| lift(g, m).map(StiefelTangent::into_xi),
        controls,
    )
}

/// R-barycenter for the polar retraction and its exact inverse.
pub fn r_barycenter_polar(
    samples: &[StiefelPoint],
    controls: &SolverControls,
) -> Result<BarycenterResult<StiefelPoint>> {
    stiefel_fixed_point(samples, retract_polar, inv_retract_polar, controls)
}

/// R-barycenter for the QR retraction and its exact inverse.
pub fn r_barycenter_qr(
    samples: &[StiefelPoint],
    controls: &SolverControls,
) -> Result<BarycenterResult<StiefelPoint>> {
    stiefel_fixed_point(samples, retract_qr, inv_retract_qr, controls)
}

/// R-barycenter for the orthographic retraction and its inverse (the
/// orthographic lifting). Its fixed point is [`proj_mean_polar`].
pub fn r_barycenter_orthographic(
    samples: &[StiefelPoint],
    controls: &SolverControls,
) -> Result<BarycenterResult<StiefelPoint>> {
    stiefel_fixed_point(
        samples,
        retract_orthographic,
        |g, m| Ok(lift_orthographic(g, m)),
        controls,
    )
}

/// Iterative RL-barycenter with the polar (projection) retraction and the
/// orthographic lifting. Its fixed point is [`proj_mean_polar`].
pub fn rl_barycenter_polar_orthographic(
    samples: &[StiefelPoint],
    controls: &SolverControls,
) -> Result<BarycenterResult<StiefelPoint>> {
    stiefel_fixed_point(
        samples,
        retract_polar,
        |g, m| Ok(lift_orthographic(g, m)),
        controls,
    )
}

/// Entrywise arithmetic mean, summed in index order.
pub fn arithmetic_mean<'a, I>(matrices: I) -> Result<Mat>
where
    I: IntoIterator<Item = &'a Mat>,
{
    let mut count = 0usize;
    let mut sum: Option<Mat> = None;
    for m in matrices {
        count += 1;
        match sum.as_mut() {
            Some(s) => {
                if s.shape() != m.shape() {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{:?}", s.shape()),
                        found: format!("{:?} (sample {})", m.shape(), count - 1),
                    });
                }
                *s += m;
            }
            None => sum = Some(m.clone()),
        }
    }
    let sum = sum.ok_or(Error::EmptyInput)?;
    Ok(sum / count as f64)
}

/// Polar projection of the arithmetic mean, `uf((1/n) Σ M_i)`.
pub fn proj_mean_polar(samples: &[StiefelPoint]) -> Result<StiefelPoint> {
    proj_to_stiefel(&arithmetic_mean(samples.iter().map(StiefelPoint::matrix))?)
}

/// QR projection of the arithmetic mean, `qf((1/n) Σ M_i)`.
pub fn proj_mean_qr(samples: &[StiefelPoint]) -> Result<StiefelPoint> {
    let (q, _) = qr_positive(&arithmetic_mean(samples.iter().map(StiefelPoint::matrix))?)?;
    Ok(StiefelPoint::new_unchecked(q))
}

/// Grassmann projection (top-k eigenvectors) of the arithmetic mean of
/// projectors.
pub fn proj_mean_grassmann(samples: &[GrassmannPoint]) -> Result<GrassmannPoint> {
    let first = samples.first().ok_or(Error::EmptyInput)?;
    let k = first.k();
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.k() != k) {
        return Err(Error::DimensionMismatch {
            expected: format!("rank {k}"),
            found: format!("rank {} (sample {i})", s.k()),
        });
    }
    proj_to_grassmann(&arithmetic_mean(samples.iter().map(GrassmannPoint::matrix))?, k)
}

/// `‖(1/n) Σ P_G(M_i - G)‖` on the Stiefel manifold.
pub fn orthographic_residual(g: &StiefelPoint, samples: &[StiefelPoint]) -> Result<f64> {
    mean_lifting(g, samples, |g, m| Ok(lift_orthographic(g, m).into_xi())).map(|(m, _)| m.norm())
}

/// `‖(1/n) Σ dqf(G)[M_i - G]‖` on the Stiefel manifold.
pub fn qr_differential_residual(g: &StiefelPoint, samples: &[StiefelPoint]) -> Result<f64> {
    mean_lifting(g, samples, |g, m| Ok(lift_qr_differential(g, m).into_xi())).map(|(m, _)| m.norm())
}

/// `‖(1/n) Σ P_G(M_i - G)‖` on the Grassmann manifold.
pub fn grassmann_projection_residual(g: &GrassmannPoint, samples: &[GrassmannPoint]) -> Result<f64> {
    mean_lifting(g, samples, |g, m| {
        Ok(tangent_project_gr(g, &(m.matrix() - g.matrix())).into_xi())
    })
    .map(|(m, _)| m.norm())
}

/// Riemannian (Karcher) mean on orthonormal representatives by the unit-step
/// fixed point `G <- exp_G((1/n) Σ log_G(M_i))`.
pub fn riemannian_mean_representatives(
    samples: &[StiefelPoint],
    controls: &SolverControls,
) -> Result<BarycenterResult<StiefelPoint>> {
    check_shapes(samples.iter().map(|s| s.matrix().shape()))?;
    rl_fixed_point(samples, gr_exp, gr_log, controls)
}

/// Riemannian mean of projectors.
pub fn riemannian_mean_grassmann(
    samples: &[GrassmannPoint],
    controls: &SolverControls,
) -> Result<BarycenterResult<GrassmannPoint>> {
    let reps: Vec<StiefelPoint> = samples.iter().map(GrassmannPoint::range).collect();
    let res = riemannian_mean_representatives(&reps, controls)?;
    Ok(BarycenterResult {
        point: stiefel_to_grassmann(&res.point),
        iterations: res.iterations,
        final_step_norm: res.final_step_norm,
        converged: res.converged,
        step_norms: res.step_norms,
        lifting_energy: res.lifting_energy,
    })
}

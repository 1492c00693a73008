//! Dense small-matrix kernels: polar and QR factors, symmetric eigensolver,
//! matrix exponential, the structured solvers behind the polar, QR and
//! orthographic inverse retractions, and principal angles.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Dimensions in this crate are small
//! (p, k of order 10), so every structured solve is done by dense
//! elimination.

use faer::Side;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Relative pivot threshold below which a dense system is declared singular.
const PIVOT_RTOL: f64 = 1e-13;

pub const RICCATI_TOL: f64 = 1e-12;
pub const RICCATI_MAX_ITER: usize = 100;

pub fn ensure_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Symmetric part `(M + M^T) / 2`.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Skew-symmetric part `(M - M^T) / 2`.
pub fn skew(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

/// Strictly lower triangular part (diagonal and upper part zeroed).
pub fn strict_lower(m: &Mat) -> Mat {
    let mut out = m.clone();
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            out[(i, j)] = 0.0;
        }
    }
    out
}

/// Numerical-rank threshold `1e-12 * max(p, k) * scale`.
pub fn rank_tol(p: usize, k: usize, scale: f64) -> f64 {
    1e-12 * p.max(k) as f64 * scale
}

/// Thin SVD `X = U diag(σ) V^T`, σ non-increasing.
///
/// Backed by faer: nalgebra's bidiagonal QR leaves singular vectors of
/// clustered singular values (every near-orthogonal input here) with
/// orthogonality errors around 1e-5, far above the tolerances this crate
/// works to.
pub(crate) struct Svd {
    pub u: Mat,
    pub singular_values: DVector<f64>,
    pub v_t: Mat,
}

fn to_faer(x: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

fn from_faer(x: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

pub(crate) fn svd(x: &Mat) -> Result<Svd> {
    ensure_finite(x)?;
    let dec = to_faer(x).thin_svd().map_err(|_| Error::Decomposition("singular value"))?;
    let s = dec.S().column_vector();
    Ok(Svd {
        u: from_faer(dec.U()),
        singular_values: DVector::from_fn(s.nrows(), |i, _| s[i]),
        v_t: from_faer(dec.V()).transpose(),
    })
}

/// Eigenpairs of a symmetric matrix, eigenvalues non-decreasing.
fn symmetric_eigen(s: &Mat) -> Result<(DVector<f64>, Mat)> {
    let dec = to_faer(s)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Decomposition("symmetric eigenvalue"))?;
    let w = dec.S().column_vector();
    Ok((DVector::from_fn(w.nrows(), |i, _| w[i]), from_faer(dec.U())))
}

fn check_tall(x: &Mat) -> Result<()> {
    if x.ncols() == 0 || x.ncols() > x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: "p x k matrix with 1 <= k <= p".into(),
            found: format!("{} x {}", x.nrows(), x.ncols()),
        });
    }
    Ok(())
}

/// Orthogonal factor of the polar decomposition, `uf(X) = A B^T` for the thin
/// SVD `X = A Σ B^T`. This is the Euclidean projection onto the Stiefel
/// manifold.
pub fn polar_orthogonal_factor(x: &Mat) -> Result<Mat> {
    check_tall(x)?;
    ensure_finite(x)?;
    let (p, k) = x.shape();
    let svd = svd(x)?;
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let tol = rank_tol(p, k, smax);
    if !(smin > tol) {
        return Err(Error::RankDeficient { smallest: smin, tol });
    }
    Ok(svd.u * svd.v_t)
}

/// QR factorization `X = Q R` with `diag(R) > 0`.
///
/// The threshold on `|R_jj|` is scaled by the Frobenius norm of `X`, an
/// upper bound on its largest singular value.
pub fn qr_positive(x: &Mat) -> Result<(Mat, Mat)> {
    check_tall(x)?;
    ensure_finite(x)?;
    let (p, k) = x.shape();
    let qr = x.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let tol = rank_tol(p, k, x.norm());
    let mut smallest = f64::INFINITY;
    for j in 0..k {
        let d = r[(j, j)];
        smallest = smallest.min(d.abs());
        if d < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    if !(smallest > tol) {
        return Err(Error::RankDeficient { smallest, tol });
    }
    Ok((q, r))
}

/// Orthonormal complement of an orthonormal-column matrix `G` (p x k): the
/// trailing `p - k` columns of the full orthogonal factor of its QR
/// decomposition.
pub fn orthonormal_complement(g: &Mat) -> Mat {
    let (p, k) = g.shape();
    let qr = g.clone().qr();
    // Q^T applied to the identity yields the full p x p factor, transposed.
    let mut full_t = Mat::identity(p, p);
    qr.q_tr_mul(&mut full_t);
    full_t.transpose().columns(k, p - k).into_owned()
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: Mat,
}

impl SymEig {
    /// First `k` eigenvectors (those paired with the `k` largest
    /// eigenvalues).
    pub fn leading(&self, k: usize) -> Mat {
        self.eigenvectors.columns(0, k).into_owned()
    }

    pub fn recompose(&self) -> Mat {
        let v = &self.eigenvectors;
        v * Mat::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// Symmetric eigendecomposition. The input is symmetrized first. Each
/// eigenvector is signed so that its largest-magnitude entry is positive.
pub fn sym_eig(s: &Mat) -> Result<SymEig> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{} x {}", s.nrows(), s.ncols()),
        });
    }
    ensure_finite(s)?;
    let p = s.nrows();
    let (eigenvalues, eigenvectors) = symmetric_eigen(&sym(s))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));

    let mut values = DVector::zeros(p);
    let mut vectors = Mat::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eigenvalues[src];
        let mut col = eigenvectors.column(src).into_owned();
        let pivot = col.iter().copied().fold(0.0_f64, |best, x| {
            if x.abs() > best.abs() {
                x
            } else {
                best
            }
        });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymEig {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}

fn norm_1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = norm_1(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);
    let b = &PADE13;
    let id = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let v_inner = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];

    let mut r = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// Exponential of a skew-symmetric matrix; the result is a rotation. The
/// input is replaced by its skew-symmetric part first.
pub fn expm_skew(omega: &Mat) -> Result<Mat> {
    if omega.nrows() != omega.ncols() {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{} x {}", omega.nrows(), omega.ncols()),
        });
    }
    ensure_finite(omega)?;
    Ok(expm(&skew(omega)))
}

/// Dense solve that refuses numerically singular systems.
pub(crate) fn solve_dense(m: Mat, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = m.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || !(min > PIVOT_RTOL * max) {
        return None;
    }
    lu.solve(rhs).filter(|x| x.iter().all(|v| v.is_finite()))
}

fn sym_index(i: usize, j: usize, k: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row-major packing of the upper triangle
    i * k - i * (i + 1) / 2 + j
}

/// Solves `A S + S A^T = C` for symmetric `S`, `C` symmetric.
///
/// The unknowns are the `k(k+1)/2` entries of the upper triangle of `S`; the
/// equations are the matching entries of the (symmetric) left-hand side.
fn solve_sym_sylvester(a: &Mat, c: &Mat) -> Option<Mat> {
    let k = a.nrows();
    let m = k * (k + 1) / 2;
    let mut sys = Mat::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for i in 0..k {
        for j in i..k {
            let row = sym_index(i, j, k);
            for l in 0..k {
                sys[(row, sym_index(l, j, k))] += a[(i, l)];
                sys[(row, sym_index(i, l, k))] += a[(j, l)];
            }
            rhs[row] = c[(i, j)];
        }
    }
    let x = solve_dense(sys, &rhs)?;
    Some(Mat::from_fn(k, k, |i, j| x[sym_index(i, j, k)]))
}

/// Solves `A S + S A^T = 2 I` for symmetric `S`.
pub fn solve_sym_product(a: &Mat) -> Result<Mat> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{} x {}", a.nrows(), a.ncols()),
        });
    }
    ensure_finite(a)?;
    solve_sym_sylvester(a, &(Mat::identity(k, k) * 2.0))
        .ok_or(Error::Unsolvable("A S + S A^T = 2I has no unique symmetric solution"))
}

/// Solves `B R + R^T B^T = 2 I` for upper triangular `R`.
///
/// Column `j` of `R` only couples to earlier columns, and solves against the
/// leading `(j+1) x (j+1)` block of `B`.
pub fn solve_upper_from_sym(b: &Mat) -> Result<Mat> {
    let k = b.nrows();
    if b.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            found: format!("{} x {}", b.nrows(), b.ncols()),
        });
    }
    ensure_finite(b)?;
    let mut r = Mat::zeros(k, k);
    for j in 0..k {
        let block = b.view((0, 0), (j + 1, j + 1)).into_owned();
        let mut rhs = DVector::zeros(j + 1);
        for i in 0..j {
            rhs[i] = -(0..=i).map(|l| r[(l, i)] * b[(j, l)]).sum::<f64>();
        }
        rhs[j] = 1.0;
        let col = solve_dense(block, &rhs).ok_or(Error::Unsolvable(
            "B R + R^T B^T = 2I has no unique upper triangular solution",
        ))?;
        for i in 0..=j {
            r[(i, j)] = col[i];
        }
    }
    Ok(r)
}

/// Solves `2 S = Q + A S - S A + S^2` for symmetric `S`, i.e. finds the
/// fixed point of `S <- (Q + A S - S A + S^2) / 2` closest to zero.
///
/// `A` is skew-symmetric and `Q` symmetric positive semi-definite. With
/// `A = U^T ξ` and `Q = ξ^T ξ`, `U + ξ - U S` has orthonormal columns.
///
/// Uses Newton's method from `S = 0`: the plain fixed-point map has the
/// commutator `S -> (A S - S A) / 2` in its linearisation and stops
/// contracting once `‖A‖₂` approaches one, while each Newton step only needs
/// the symmetric Sylvester solve `M E + E M^T = -F(S)` with `M = A + S - I`.
pub fn solve_riccati_orthographic(a: &Mat, q: &Mat) -> Result<Mat> {
    let k = a.nrows();
    if a.shape() != (k, k) || q.shape() != (k, k) {
        return Err(Error::DimensionMismatch {
            expected: format!("{k} x {k} matrices"),
            found: format!("{:?} and {:?}", a.shape(), q.shape()),
        });
    }
    ensure_finite(a)?;
    ensure_finite(q)?;
    let id = Mat::identity(k, k);
    let mut s = Mat::zeros(k, k);
    let mut change = f64::INFINITY;
    for iteration in 0..RICCATI_MAX_ITER {
        let residual = sym(&(q + a * &s - &s * a + &s * &s - &s * 2.0));
        let m = a + &s - &id;
        let Some(step) = solve_sym_sylvester(&m, &-residual) else {
            // Singular Jacobian: no locally unique solution from here.
            return Err(Error::NoConvergence {
                iterations: iteration,
                last_change: change,
            });
        };
        change = step.norm();
        s += step;
        if !change.is_finite() {
            break;
        }
        if change < RICCATI_TOL {
            return Ok(s);
        }
    }
    Err(Error::NoConvergence {
        iterations: RICCATI_MAX_ITER,
        last_change: change,
    })
}

/// Principal angles between the column spans of two orthonormal p x k
/// matrices, ascending, each in `[0, π/2]`.
///
/// Cosines come from the singular values of `U^T V`, sines from those of
/// `(I - U U^T) V`; small angles are read from the sines, large ones from the
/// cosines.
pub fn principal_angles(u: &Mat, v: &Mat) -> Vec<f64> {
    assert_eq!(u.shape(), v.shape(), "principal_angles: shape mismatch");
    let k = u.ncols();
    let utv = u.transpose() * v;
    let values = |m: &Mat| svd(m).expect("SVD of finite orthonormal data").singular_values;
    let cosines = values(&utv); // descending
    let residual = v - u * &utv;
    let mut sines: Vec<f64> = values(&residual).iter().copied().collect();
    sines.sort_by(f64::total_cmp); // ascending
    let mut angles: Vec<f64> = (0..k)
        .map(|i| {
            let c = cosines[i].clamp(0.0, 1.0);
            let s = sines[i].clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn polar_of_orthonormal_is_itself() {
        let mut rng = rng(1);
        let u = random_stiefel(&mut rng, 6, 3);
        let f = polar_orthogonal_factor(&u).unwrap();
        assert!((f - &u).norm() < 1e-12);
    }

    #[test]
    fn polar_of_positive_diagonal_is_identity() {
        let x = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let f = polar_orthogonal_factor(&x).unwrap();
        assert!((f - Mat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn polar_factor_gives_symmetric_psd_remainder() {
        let mut rng = rng(2);
        let x = gaussian(&mut rng, 5, 3);
        let u = polar_orthogonal_factor(&x).unwrap();
        let s = u.transpose() * &x;
        assert!((&s - s.transpose()).norm() < 1e-12);
        let eig = sym_eig(&s).unwrap();
        assert!(eig.eigenvalues.min() > 0.0);
        assert!((&x - &u * &s).norm() < 1e-10);
        assert!((u.transpose() * &u - Mat::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn polar_rejects_rank_deficient() {
        let x = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            polar_orthogonal_factor(&x),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(qr_positive(&x), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn qr_of_padded_identity() {
        let x = Mat::identity(5, 3);
        let (q, r) = qr_positive(&x).unwrap();
        assert!((q - Mat::identity(5, 3)).norm() < 1e-14);
        assert!((r - Mat::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn qr_sign_convention_flips_column() {
        let x = Mat::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        let (q, r) = qr_positive(&x).unwrap();
        assert!((q - &x).norm() < 1e-14);
        assert!((r - Mat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn qr_matches_gram_schmidt() {
        let mut rng = rng(3);
        let x = gaussian(&mut rng, 6, 3);
        let (q, r) = qr_positive(&x).unwrap();
        let (q_gs, r_gs) = modified_gram_schmidt(&x);
        for j in 0..3 {
            assert!((q.column(j) - q_gs.column(j)).norm() < 1e-10, "column {j}");
        }
        assert!((r - r_gs).norm() < 1e-10);
    }

    #[test]
    fn complement_spans_the_orthogonal_space() {
        let mut rng = rng(4);
        let g = random_stiefel(&mut rng, 7, 3);
        let c = orthonormal_complement(&g);
        assert_eq!(c.shape(), (7, 4));
        assert!((c.transpose() * &c - Mat::identity(4, 4)).norm() < 1e-12);
        assert!((g.transpose() * &c).norm() < 1e-12);
        let proj = &c * c.transpose();
        assert!((proj - (Mat::identity(7, 7) - &g * g.transpose())).norm() < 1e-12);
    }

    #[test]
    fn sym_eig_diagonal() {
        let s = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let e = sym_eig(&s).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[3.0, 2.0, 1.0]);
        let expected = Mat::from_row_slice(3, 3, &[0., 0., 1., 1., 0., 0., 0., 1., 0.]);
        assert!((e.eigenvectors - expected).norm() < 1e-14);

        let s = Mat::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let e = sym_eig(&s).unwrap();
        assert!((e.eigenvectors - Mat::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn sym_eig_zero_matrix() {
        let e = sym_eig(&Mat::zeros(4, 4)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| l == 0.0));
        assert!((e.eigenvectors - Mat::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn sym_eig_random_reconstruction() {
        let mut rng = rng(5);
        let s = sym(&gaussian(&mut rng, 8, 8));
        let e = sym_eig(&s).unwrap();
        assert!((e.recompose() - &s).norm() < 1e-10 * s.norm());
        let v = &e.eigenvectors;
        assert!((v.transpose() * v - Mat::identity(8, 8)).norm() < 1e-12 * 8.0);
        for i in 0..7 {
            assert!(e.eigenvalues[i] >= e.eigenvalues[i + 1]);
        }
    }

    #[test]
    fn expm_zero_is_identity() {
        let w = expm_skew(&Mat::zeros(4, 4)).unwrap();
        assert_eq!(w, Mat::identity(4, 4));
    }

    #[test]
    fn expm_planar_rotation() {
        let t = PI / 3.0;
        let om = Mat::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let w = expm_skew(&om).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((w - expected).norm() < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_series() {
        let mut rng = rng(6);
        let mut om = skew(&gaussian(&mut rng, 5, 5));
        om /= om.norm();
        let w = expm_skew(&om).unwrap();
        assert!((&w - taylor_expm(&om, 30)).norm() < 1e-12);
        assert!((w.transpose() * &w - Mat::identity(5, 5)).norm() < 1e-12 * 5.0);
        assert!((w.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let mut rng = rng(7);
        let om = skew(&gaussian(&mut rng, 6, 6)) * 4.0;
        let w = expm_skew(&om).unwrap();
        assert!((w.transpose() * &w - Mat::identity(6, 6)).norm() < 1e-12 * 6.0);
        // exp(Ω) = exp(Ω/2)^2
        let half = expm_skew(&(&om * 0.5)).unwrap();
        assert!((&half * &half - w).norm() < 1e-11);
    }

    #[test]
    fn sym_product_trivial_cases() {
        let s = solve_sym_product(&Mat::identity(3, 3)).unwrap();
        assert!((s - Mat::identity(3, 3)).norm() < 1e-14);
        let s = solve_sym_product(&(Mat::identity(4, 4) * 2.0)).unwrap();
        assert!((s - Mat::identity(4, 4) * 0.5).norm() < 1e-14);
    }

    #[test]
    fn sym_product_matches_kronecker_oracle() {
        let mut rng = rng(8);
        let a = Mat::identity(4, 4) + gaussian(&mut rng, 4, 4) * 0.2;
        let s = solve_sym_product(&a).unwrap();
        let oracle = kronecker_sym_product(&a);
        assert!((&s - &oracle).norm() < 1e-10);
        let res = &a * &s + &s * a.transpose() - Mat::identity(4, 4) * 2.0;
        assert!(res.norm() < 1e-10);
    }

    #[test]
    fn sym_product_singular() {
        // A = [[0,1],[-1,0]] gives A S + S A^T with a nontrivial kernel (S = I).
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(solve_sym_product(&a), Err(Error::Unsolvable(_))));
    }

    #[test]
    fn upper_from_sym_trivial_cases() {
        let r = solve_upper_from_sym(&Mat::identity(3, 3)).unwrap();
        assert!((r - Mat::identity(3, 3)).norm() < 1e-14);
        let r = solve_upper_from_sym(&(Mat::identity(3, 3) * 4.0)).unwrap();
        assert!((r - Mat::identity(3, 3) * 0.25).norm() < 1e-14);
    }

    #[test]
    fn upper_from_sym_matches_dense_oracle() {
        let mut rng = rng(9);
        let b = Mat::identity(4, 4) + gaussian(&mut rng, 4, 4) * 0.2;
        let r = solve_upper_from_sym(&b).unwrap();
        let oracle = dense_upper_from_sym(&b);
        assert!((&r - &oracle).norm() < 1e-10);
        assert!((sym(&(&b * &r)) - Mat::identity(4, 4)).norm() < 1e-10);
        assert!(strict_lower(&r).norm() == 0.0);
    }

    #[test]
    fn upper_from_sym_singular_leading_block() {
        let b = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(solve_upper_from_sym(&b), Err(Error::Unsolvable(_))));
    }

    #[test]
    fn riccati_trivial_cases() {
        let s = solve_riccati_orthographic(&Mat::zeros(3, 3), &Mat::zeros(3, 3)).unwrap();
        assert_eq!(s, Mat::zeros(3, 3));
        let q = 0.19;
        let s = solve_riccati_orthographic(&Mat::zeros(3, 3), &(Mat::identity(3, 3) * q)).unwrap();
        let expected = 1.0 - (1.0 - q).sqrt();
        assert!((s - Mat::identity(3, 3) * expected).norm() < 1e-11);
    }

    #[test]
    fn riccati_yields_orthonormal_point() {
        let mut rng = rng(10);
        let u = random_stiefel(&mut rng, 10, 5);
        let z = gaussian(&mut rng, 10, 5);
        let mut xi = &z - &u * sym(&(u.transpose() * &z));
        xi *= 0.1 / xi.norm();
        let a = u.transpose() * &xi;
        let q = xi.transpose() * &xi;
        let s = solve_riccati_orthographic(&a, &q).unwrap();
        let v = &u + &xi - &u * &s;
        assert!((v.transpose() * &v - Mat::identity(5, 5)).norm() < 1e-10);
    }

    #[test]
    fn riccati_diverges_outside_domain() {
        let q = Mat::identity(2, 2) * 1.5;
        assert!(matches!(
            solve_riccati_orthographic(&Mat::zeros(2, 2), &q),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn principal_angles_identical_and_right() {
        let mut rng = rng(11);
        let u = random_stiefel(&mut rng, 6, 3);
        assert!(principal_angles(&u, &u).iter().all(|&t| t.abs() < 1e-7));

        let e = Mat::identity(4, 4);
        let u = Mat::from_columns(&[e.column(0), e.column(1)]);
        let v = Mat::from_columns(&[e.column(0), e.column(2)]);
        let th = principal_angles(&u, &v);
        assert!(th[0].abs() < 1e-15);
        assert!((th[1] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn principal_angles_match_gram_eigenvalues() {
        let mut rng = rng(12);
        let u = random_stiefel(&mut rng, 8, 3);
        let v = random_stiefel(&mut rng, 8, 3);
        let th = principal_angles(&u, &v);
        let utv = u.transpose() * &v;
        let gram = &utv * utv.transpose();
        let eig = sym_eig(&gram).unwrap();
        for i in 0..3 {
            // ascending angle i pairs with descending eigenvalue i
            let c = eig.eigenvalues[i].max(0.0).sqrt();
            assert!((th[i].cos() - c).abs() < 1e-10);
        }
        assert!(th.windows(2).all(|w| w[0] <= w[1]));
        assert!(th.iter().all(|&t| (0.0..=FRAC_PI_2).contains(&t)));
    }
}

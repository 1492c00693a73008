// Test-only helpers and independent oracles. Only depends on nalgebra and
// rand so integration tests can pull it in with `#[path]`.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type M = DMatrix<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> M {
    M::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Classical modified Gram–Schmidt with positive diagonal.
pub fn modified_gram_schmidt(x: &M) -> (M, M) {
    let (p, k) = x.shape();
    let mut q = x.clone();
    let mut r = M::zeros(k, k);
    for j in 0..k {
        for i in 0..j {
            let qi = q.column(i).into_owned();
            let rij = qi.dot(&q.column(j));
            r[(i, j)] = rij;
            let mut cj = q.column_mut(j);
            cj -= qi * rij;
        }
        let nrm = q.column(j).norm();
        r[(j, j)] = nrm;
        let mut cj = q.column_mut(j);
        cj /= nrm;
    }
    assert_eq!(q.nrows(), p);
    (q, r)
}

/// Random orthonormal p x k matrix via Gram–Schmidt (independent of the
/// Householder QR used by the library).
pub fn random_stiefel(rng: &mut ChaCha8Rng, p: usize, k: usize) -> M {
    modified_gram_schmidt(&gaussian(rng, p, k)).0
}

pub fn random_skew(rng: &mut ChaCha8Rng, p: usize) -> M {
    let z = gaussian(rng, p, p);
    (&z - z.transpose()) * 0.5
}

/// Random tangent vector at `u` with Frobenius norm `scale`.
pub fn random_tangent(rng: &mut ChaCha8Rng, u: &M, scale: f64) -> M {
    let z = gaussian(rng, u.nrows(), u.ncols());
    let utz = u.transpose() * &z;
    let xi = &z - u * ((&utz + utz.transpose()) * 0.5);
    let n = xi.norm();
    xi * (scale / n)
}

/// Truncated Taylor series of the matrix exponential.
pub fn taylor_expm(a: &M, terms: usize) -> M {
    let n = a.nrows();
    let mut term = M::identity(n, n);
    let mut sum = term.clone();
    for i in 1..terms {
        term = &term * a / i as f64;
        sum += &term;
    }
    sum
}

/// Solves A S + S A^T = 2I by the full k^2 x k^2 Kronecker system
/// (I ⊗ A + A ⊗ I) vec(S) = vec(2I), column-major vec.
pub fn kronecker_sym_product(a: &M) -> M {
    let k = a.nrows();
    let n = k * k;
    let mut sys = M::zeros(n, n);
    let id = M::identity(k, k);
    for c1 in 0..k {
        for r1 in 0..k {
            for c2 in 0..k {
                for r2 in 0..k {
                    // (I ⊗ A) block (c1, c2) = δ_{c1 c2} A ; (A ⊗ I) block = A[c1,c2] I
                    sys[(c1 * k + r1, c2 * k + r2)] =
                        id[(c1, c2)] * a[(r1, r2)] + a[(c1, c2)] * id[(r1, r2)];
                }
            }
        }
    }
    let rhs = DVector::from_iterator(n, (id * 2.0).iter().copied());
    let x = sys.lu().solve(&rhs).expect("oracle system singular");
    M::from_column_slice(k, k, x.as_slice())
}

/// Solves B R + R^T B^T = 2I for upper triangular R as one dense system in
/// the k(k+1)/2 upper-triangular unknowns, built by probing the linear map
/// with unit upper-triangular matrices.
pub fn dense_upper_from_sym(b: &M) -> M {
    let k = b.nrows();
    let unknowns: Vec<(usize, usize)> = (0..k).flat_map(|j| (0..=j).map(move |i| (i, j))).collect();
    let m = unknowns.len();
    let mut sys = M::zeros(m, m);
    for (col, &(i, j)) in unknowns.iter().enumerate() {
        let mut e = M::zeros(k, k);
        e[(i, j)] = 1.0;
        let img = b * &e + e.transpose() * b.transpose();
        for (row, &(a, c)) in unknowns.iter().enumerate() {
            sys[(row, col)] = img[(a, c)];
        }
    }
    let rhs = DVector::from_iterator(
        m,
        unknowns.iter().map(|&(a, c)| if a == c { 2.0 } else { 0.0 }),
    );
    let x = sys.lu().solve(&rhs).expect("oracle system singular");
    let mut r = M::zeros(k, k);
    for (idx, &(i, j)) in unknowns.iter().enumerate() {
        r[(i, j)] = x[idx];
    }
    r
}

/// Least-squares slope of log(err) against log(t).
pub fn loglog_slope(ts: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

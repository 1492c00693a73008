//! Synthetic data generation, error measures and the Monte Carlo sweep that
//! produces the error-vs-sample-size tables.
//!
//! Every (n, trial) cell draws its own center and samples from a generator
//! seeded by `(seed, n, trial)`, so results do not depend on execution order
//! or thread count. Stiefel and Grassmann runs with the same seed see the
//! same underlying Stiefel dataset; the Grassmann one is its projector image.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::barycenter::{
    proj_mean_grassmann, proj_mean_polar, proj_mean_qr, r_barycenter_orthographic,
    r_barycenter_polar, r_barycenter_qr, riemannian_mean_grassmann,
    rl_barycenter_polar_orthographic, SolverControls,
};
use crate::error::{Error, Result};
use crate::grassmann::{gr_distance_sq, stiefel_to_grassmann, GrassmannPoint};
use crate::linalg::{expm_skew, qr_positive, skew, Mat};
use crate::stiefel::StiefelPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Stiefel,
    Grassmann,
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifoldKind::Stiefel => "stiefel",
            ManifoldKind::Grassmann => "grassmann",
        })
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stiefel" => Ok(ManifoldKind::Stiefel),
            "grassmann" => Ok(ManifoldKind::Grassmann),
            other => Err(Error::InvalidConfig(format!("unknown manifold '{other}'"))),
        }
    }
}

/// Mean estimators, keyed by the column prefixes used in the result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// R-barycenter, polar retraction.
    RPolar,
    /// R-barycenter, QR retraction.
    RQr,
    /// R-barycenter, orthographic retraction.
    ROrthographic,
    /// Polar retraction with the orthographic lifting, iterated.
    RlPolarOrth,
    ProjPolar,
    ProjQr,
    /// Riemannian mean on Grassmann.
    RiemMean,
    /// Eigenvalue-based projected mean on Grassmann.
    ProjEvd,
}

impl Estimator {
    pub const ALL: [Estimator; 8] = [
        Estimator::RPolar,
        Estimator::RQr,
        Estimator::ROrthographic,
        Estimator::RlPolarOrth,
        Estimator::ProjPolar,
        Estimator::ProjQr,
        Estimator::RiemMean,
        Estimator::ProjEvd,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Estimator::RPolar => "R_polar",
            Estimator::RQr => "R_qr",
            Estimator::ROrthographic => "R_orthographic",
            Estimator::RlPolarOrth => "RL_polar_orth",
            Estimator::ProjPolar => "proj_polar",
            Estimator::ProjQr => "proj_qr",
            Estimator::RiemMean => "Riem_mean",
            Estimator::ProjEvd => "proj_evd",
        }
    }

    pub fn manifold(self) -> ManifoldKind {
        match self {
            Estimator::RiemMean | Estimator::ProjEvd => ManifoldKind::Grassmann,
            _ => ManifoldKind::Stiefel,
        }
    }

    pub fn is_iterative(self) -> bool {
        !matches!(
            self,
            Estimator::ProjPolar | Estimator::ProjQr | Estimator::ProjEvd
        )
    }

    /// Default set for a manifold, in table column order.
    pub fn defaults(manifold: ManifoldKind) -> Vec<Estimator> {
        match manifold {
            ManifoldKind::Stiefel => vec![
                Estimator::RPolar,
                Estimator::RQr,
                Estimator::ProjPolar,
                Estimator::ProjQr,
            ],
            ManifoldKind::Grassmann => vec![Estimator::RiemMean, Estimator::ProjEvd],
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.key() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown estimator '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub manifold: ManifoldKind,
    pub p: usize,
    pub k: usize,
    pub sigma: f64,
    pub n_values: Vec<usize>,
    pub n_trials: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub controls: SolverControls,
}

impl ExperimentConfig {
    /// Stiefel setup with p = 10, k = 5 and the default estimators.
    pub fn stiefel(sigma: f64, n_values: Vec<usize>, n_trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            manifold: ManifoldKind::Stiefel,
            p: 10,
            k: 5,
            sigma,
            n_values,
            n_trials,
            seed,
            estimators: Estimator::defaults(ManifoldKind::Stiefel),
            controls: SolverControls::default(),
        }
    }

    /// Grassmann setup with p = 10, k = 5 and the default estimators.
    pub fn grassmann(sigma: f64, n_values: Vec<usize>, n_trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            manifold: ManifoldKind::Grassmann,
            estimators: Estimator::defaults(ManifoldKind::Grassmann),
            ..Self::stiefel(sigma, n_values, n_trials, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 || self.k > self.p {
            return bad(format!("need 1 <= k <= p, got p = {}, k = {}", self.p, self.k));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be positive and finite, got {}", self.sigma));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n values must be a non-empty list of positive integers".into());
        }
        if self.n_trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators selected".into());
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if e.manifold() != self.manifold {
                return bad(format!("estimator {e} does not apply to the {} manifold", self.manifold));
            }
            if self.estimators[..i].contains(e) {
                return bad(format!("estimator {e} listed twice"));
            }
        }
        let min_n = *self.n_values.iter().min().expect("non-empty");
        self.controls.validate(min_n)
    }
}

/// Summary of one (n, estimator) cell over trials. Statistics are NaN when
/// every trial failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub manifold: ManifoldKind,
    pub n_values: Vec<usize>,
    pub estimators: Vec<Estimator>,
    /// `cells[row][col]` for `n_values[row]` and `estimators[col]`.
    pub cells: Vec<Vec<CellStats>>,
    /// `errors[row][col][trial]`; `None` marks a failed estimator run.
    pub errors: Vec<Vec<Vec<Option<f64>>>>,
}

impl ResultTable {
    pub fn column(&self, e: Estimator) -> Option<usize> {
        self.estimators.iter().position(|&x| x == e)
    }

    pub fn cell(&self, n: usize, e: Estimator) -> Option<&CellStats> {
        let row = self.n_values.iter().position(|&x| x == n)?;
        Some(&self.cells[row][self.column(e)?])
    }

    pub fn total_failures(&self, e: Estimator) -> usize {
        self.column(e)
            .map(|c| self.cells.iter().map(|row| row[c].failures).sum())
            .unwrap_or(0)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the generator for one (n, trial) cell.
pub fn cell_seed(seed: u64, n: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ n as u64) ^ trial as u64)
}

pub fn cell_rng(seed: u64, n: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cell_seed(seed, n, trial))
}

fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// First k columns of a Haar-distributed p x p orthogonal matrix.
pub fn sample_center_stiefel<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> StiefelPoint {
    assert!(k >= 1 && k <= p, "sample_center_stiefel: need 1 <= k <= p");
    let z = gaussian_matrix(rng, p, p);
    // A Gaussian matrix is full rank with probability one.
    let (q, _) = qr_positive(&z).expect("Gaussian matrix is full rank");
    StiefelPoint::new_unchecked(q.columns(0, k).into_owned())
}

/// `expm(σ Ω) G` with `Ω` the skew part of a standard Gaussian p x p matrix.
pub fn sample_perturbed<R: Rng + ?Sized>(center: &StiefelPoint, sigma: f64, rng: &mut R) -> StiefelPoint {
    let p = center.p();
    let omega = skew(&gaussian_matrix(rng, p, p));
    let rot = expm_skew(&(omega * sigma)).expect("finite skew input");
    StiefelPoint::new_unchecked(rot * center.matrix())
}

/// A center and samples drawn around it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub center: StiefelPoint,
    pub samples: Vec<StiefelPoint>,
}

impl Dataset {
    pub fn generate<R: Rng + ?Sized>(p: usize, k: usize, n: usize, sigma: f64, rng: &mut R) -> Self {
        let center = sample_center_stiefel(p, k, rng);
        let samples = (0..n).map(|_| sample_perturbed(&center, sigma, rng)).collect();
        Dataset { center, samples }
    }

    /// The dataset used by cell (n, trial) of a sweep.
    pub fn for_cell(seed: u64, p: usize, k: usize, n: usize, trial: usize, sigma: f64) -> Self {
        Self::generate(p, k, n, sigma, &mut cell_rng(seed, n, trial))
    }

    pub fn to_grassmann(&self) -> (GrassmannPoint, Vec<GrassmannPoint>) {
        (
            stiefel_to_grassmann(&self.center),
            self.samples.iter().map(stiefel_to_grassmann).collect(),
        )
    }
}

/// `‖G^T Ĝ - I‖²` (squared Frobenius norm).
pub fn err_st(g: &StiefelPoint, ghat: &StiefelPoint) -> f64 {
    let k = g.k();
    (g.matrix().transpose() * ghat.matrix() - Mat::identity(k, k)).norm_squared()
}

/// Squared Riemannian distance between projectors.
pub fn err_gr(g: &GrassmannPoint, ghat: &GrassmannPoint) -> f64 {
    gr_distance_sq(g, ghat)
}

/// Runs one Stiefel estimator on samples.
pub fn estimate_stiefel(
    e: Estimator,
    samples: &[StiefelPoint],
    controls: &SolverControls,
) -> Result<StiefelPoint> {
    match e {
        Estimator::RPolar => r_barycenter_polar(samples, controls).map(|r| r.point),
        Estimator::RQr => r_barycenter_qr(samples, controls).map(|r| r.point),
        Estimator::ROrthographic => r_barycenter_orthographic(samples, controls).map(|r| r.point),
        Estimator::RlPolarOrth => {
            rl_barycenter_polar_orthographic(samples, controls).map(|r| r.point)
        }
        Estimator::ProjPolar => proj_mean_polar(samples),
        Estimator::ProjQr => proj_mean_qr(samples),
        Estimator::RiemMean | Estimator::ProjEvd => Err(Error::InvalidConfig(format!(
            "estimator {e} does not apply to the stiefel manifold"
        ))),
    }
}

/// Runs one Grassmann estimator on samples.
pub fn estimate_grassmann(
    e: Estimator,
    samples: &[GrassmannPoint],
    controls: &SolverControls,
) -> Result<GrassmannPoint> {
    match e {
        Estimator::RiemMean => riemannian_mean_grassmann(samples, controls).map(|r| r.point),
        Estimator::ProjEvd => proj_mean_grassmann(samples),
        other => Err(Error::InvalidConfig(format!(
            "estimator {other} does not apply to the grassmann manifold"
        ))),
    }
}

/// Errors of every configured estimator on the dataset of one cell.
pub fn run_cell(config: &ExperimentConfig, n: usize, trial: usize) -> Vec<Option<f64>> {
    let data = Dataset::for_cell(config.seed, config.p, config.k, n, trial, config.sigma);
    match config.manifold {
        ManifoldKind::Stiefel => config
            .estimators
            .iter()
            .map(|&e| {
                estimate_stiefel(e, &data.samples, &config.controls)
                    .ok()
                    .map(|g| err_st(&data.center, &g))
            })
            .collect(),
        ManifoldKind::Grassmann => {
            let (center, samples) = data.to_grassmann();
            config
                .estimators
                .iter()
                .map(|&e| {
                    estimate_grassmann(e, &samples, &config.controls)
                        .ok()
                        .map(|g| err_gr(&center, &g))
                })
                .collect()
        }
    }
}

/// Linear-interpolation quantile between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidConfig(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn summarize(errors: &[Option<f64>]) -> CellStats {
    let ok: Vec<f64> = errors.iter().flatten().copied().collect();
    let failures = errors.len() - ok.len();
    let stat = |q| quantile(&ok, q).unwrap_or(f64::NAN);
    CellStats {
        median: stat(0.5),
        q10: stat(0.1),
        q90: stat(0.9),
        failures,
    }
}

/// Runs the sweep on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = config
        .n_values
        .iter()
        .flat_map(|&n| (0..config.n_trials).map(move |t| (n, t)))
        .collect();
    let results: Vec<Vec<Option<f64>>> = cells
        .par_iter()
        .map(|&(n, t)| run_cell(config, n, t))
        .collect();

    let n_est = config.estimators.len();
    let mut errors = Vec::with_capacity(config.n_values.len());
    let mut stats = Vec::with_capacity(config.n_values.len());
    for chunk in results.chunks(config.n_trials) {
        let per_est: Vec<Vec<Option<f64>>> = (0..n_est)
            .map(|c| chunk.iter().map(|trial| trial[c]).collect())
            .collect();
        stats.push(per_est.iter().map(|v| summarize(v)).collect());
        errors.push(per_est);
    }
    Ok(ResultTable {
        manifold: config.manifold,
        n_values: config.n_values.clone(),
        estimators: config.estimators.clone(),
        cells: stats,
        errors,
    })
}

/// Runs the sweep on a dedicated pool with `jobs` threads.
pub fn run_experiment_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

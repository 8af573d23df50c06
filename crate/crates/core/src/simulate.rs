//! Monte Carlo hypothesis testing over a dictionary ensemble.
//!
//! Each trial draws a member index uniformly, synthesizes `N` observations
//! from it, and decodes the index back, either by minimum residual given the
//! coefficients or by Gaussian likelihood given only the supports. The MSE
//! estimator outputs the decoded member itself, so its error is always either
//! zero or a pairwise ensemble distance.

use std::path::Path;

use nalgebra::{Cholesky, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundResult};
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::linalg::{self, IndexMultiset, Matrix};
use crate::model::{self, CoefficientModel};
use crate::packing::{self, DictionaryEnsemble};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideInfo {
    /// The detector sees the coefficient matrix `X`.
    FullX,
    /// The detector sees only the supports of the columns of `X`.
    SupportOnly,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec<'a> {
    pub ensemble: &'a DictionaryEnsemble,
    pub model: CoefficientModel,
    pub sigma: f64,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub side_info: SideInfo,
    pub master_seed: u64,
}

impl ExperimentSpec<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::InvalidParameter(
                "N grid must be nonempty and positive".into(),
            ));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "N grid must be strictly increasing".into(),
            ));
        }
        if self.ensemble.is_empty() {
            return Err(Error::InvalidParameter("ensemble has no members".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(
                "sigma must be finite and >= 0".into(),
            ));
        }
        self.model.validate(self.ensemble.reference.p())?;
        if self.side_info == SideInfo::SupportOnly
            && !matches!(self.model, CoefficientModel::SparseGaussian { .. })
        {
            return Err(Error::InvalidParameter(
                "support-only side information needs the sparse Gaussian model".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub true_index: usize,
    pub decoded_index: usize,
    pub sq_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_mse: f64,
    pub worst_mse: f64,
    pub seed: u64,
    #[serde(skip)]
    pub log: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub side_info: SideInfo,
    pub points: Vec<CurvePoint>,
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let phat = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (phat + z2 / (2.0 * n_f)) / denom;
    let half = z * (phat * (1.0 - phat) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one trial, a stable mix of the master seed and its coordinates.
pub fn trial_seed(master: u64, grid_index: usize, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(master) ^ grid_index as u64) ^ trial as u64)
}

/// Index minimizing `‖Y − Dₗ X‖_F`; ties go to the lowest index.
pub fn min_distance_detect(y: &Matrix, x: &Matrix, ensemble: &DictionaryEnsemble) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (l, member) in ensemble.members.iter().enumerate() {
        if member.p() != x.nrows() || member.m() != y.nrows() || x.ncols() != y.ncols() {
            return Err(Error::DimensionMismatch {
                op: "min_distance_detect",
                left: y.shape(),
                right: x.shape(),
            });
        }
        let resid = (y - member.d() * x).norm_squared();
        if resid < best.1 {
            best = (l, resid);
        }
    }
    Ok(best.0)
}

fn gaussian_log_density(y: &DVector<f64>, chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let m = y.len() as f64;
    let logdet = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let quad = y.dot(&chol.solve(y));
    -0.5 * (quad + logdet + m * (2.0 * std::f64::consts::PI).ln())
}

/// Index maximizing `Σₖ log N(yₖ; 0, Σₖ,ₗ)` with `Σₖ,ₗ` the support-conditional
/// covariance; ties go to the lowest index.
pub fn gaussian_ml_detect(
    y: &Matrix,
    supports: &[IndexMultiset],
    ensemble: &DictionaryEnsemble,
    sigma_a: f64,
    sigma: f64,
) -> Result<usize> {
    if supports.len() != y.ncols() {
        return Err(Error::LengthMismatch {
            expected: y.ncols(),
            got: supports.len(),
        });
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (l, member) in ensemble.members.iter().enumerate() {
        let mut ll = 0.0;
        for (k, support) in supports.iter().enumerate() {
            let cov = bounds::conditional_covariance(member, support, sigma_a, sigma)?;
            let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?;
            ll += gaussian_log_density(&y.column(k).into_owned(), &chol);
        }
        if ll > best.1 {
            best = (l, ll);
        }
    }
    Ok(best.0)
}

fn run_trial(spec: &ExperimentSpec<'_>, n: usize, seed: u64, trial: usize) -> Result<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = spec.ensemble;
    let true_index = rng.random_range(0..e.len());
    let member = &e.members[true_index];
    let ds = model::synthesize(member, &spec.model, n, spec.sigma, &mut rng)?;
    let decoded_index = match spec.side_info {
        SideInfo::FullX => min_distance_detect(&ds.y, &ds.x, e)?,
        SideInfo::SupportOnly => {
            let sigma_a = spec.model.sigma_a().unwrap_or(0.0);
            gaussian_ml_detect(&ds.y, &ds.supports, e, sigma_a, spec.sigma)?
        }
    };
    let sq_error = if decoded_index == true_index {
        0.0
    } else {
        linalg::fro_distance_sq(e.members[decoded_index].d(), member.d())?
    };
    Ok(TrialRecord {
        trial,
        true_index,
        decoded_index,
        sq_error,
    })
}

fn summarize(n: usize, master_seed: u64, log: Vec<TrialRecord>, members: usize) -> CurvePoint {
    let trials = log.len();
    let errors = log
        .iter()
        .filter(|r| r.decoded_index != r.true_index)
        .count();
    let (ci_low, ci_high) = wilson_interval(errors, trials, Z95);
    let mean_mse = log.iter().map(|r| r.sq_error).sum::<f64>() / trials as f64;
    let mut sums = vec![(0.0f64, 0usize); members];
    for r in &log {
        sums[r.true_index].0 += r.sq_error;
        sums[r.true_index].1 += 1;
    }
    let worst_mse = sums
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|(s, c)| s / *c as f64)
        .fold(0.0, f64::max);
    CurvePoint {
        n,
        trials,
        errors,
        error_rate: errors as f64 / trials as f64,
        ci_low,
        ci_high,
        mean_mse,
        worst_mse,
        seed: master_seed,
        log,
    }
}

/// Runs every grid point; trials execute in parallel but each one draws from
/// its own seeded stream, so results are independent of scheduling. Both the
/// error rate and the decode-then-output MSE are filled in.
pub fn run_error_experiment(spec: &ExperimentSpec<'_>) -> Result<ErrorCurve> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.n_grid.len());
    for (g, &n) in spec.n_grid.iter().enumerate() {
        let log = (0..spec.trials)
            .into_par_iter()
            .map(|k| run_trial(spec, n, trial_seed(spec.master_seed, g, k), k))
            .collect::<Result<Vec<_>>>()?;
        points.push(summarize(n, spec.master_seed, log, spec.ensemble.len()));
    }
    Ok(ErrorCurve {
        side_info: spec.side_info,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseComparison {
    pub n: usize,
    pub worst_mse: f64,
    pub bound_name: String,
    pub bound: BoundResult,
    /// `worst_mse ≥ bound`, or the bound is vacuous.
    pub consistent: bool,
}

/// Bound inputs matching an experiment at sample count `n`.
pub fn matching_inputs(spec: &ExperimentSpec<'_>, n: usize) -> BoundInputs {
    let mut inputs = packing::budget_inputs(spec.ensemble, &spec.model, spec.sigma);
    inputs.n = n as f64;
    inputs
}

/// The minimax lower bound that applies to an experiment: the general bound
/// for full coefficients, the sparse-Gaussian one for support-only.
pub fn matching_bound(spec: &ExperimentSpec<'_>, n: usize) -> Result<(String, BoundResult)> {
    let inputs = matching_inputs(spec, n);
    Ok(match spec.side_info {
        SideInfo::FullX => ("thm1".into(), bounds::thm1_bound(&inputs)?),
        SideInfo::SupportOnly => ("thm2".into(), bounds::thm2_bound(&inputs)?),
    })
}

/// [`run_error_experiment`] plus a comparison of each point's worst-case MSE
/// with the matching minimax lower bound.
pub fn run_mse_experiment(spec: &ExperimentSpec<'_>) -> Result<(ErrorCurve, Vec<MseComparison>)> {
    let curve = run_error_experiment(spec)?;
    let cmp = curve
        .points
        .iter()
        .map(|pt| {
            let (name, bound) = matching_bound(spec, pt.n)?;
            Ok(MseComparison {
                n: pt.n,
                worst_mse: pt.worst_mse,
                bound_name: name,
                bound,
                consistent: bound.vacuous || pt.worst_mse >= bound.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((curve, cmp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanoRow {
    pub n: usize,
    /// `(1 − error_rate_ci_high) log₂ L − 1`
    pub lhs: f64,
    pub mi_upper: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanoReport {
    pub cardinality: usize,
    pub rows: Vec<FanoRow>,
    pub violations: usize,
}

/// Checks `(1 − P̂e⁺) log₂ L − 1 ≤ mi_upper(N)` at every grid point, where
/// `P̂e⁺` is the upper Wilson limit of the error rate.
pub fn fano_consistency_with(
    curve: &ErrorCurve,
    cardinality: usize,
    mi_upper: impl Fn(usize) -> f64,
) -> FanoReport {
    let log_l = (cardinality as f64).log2();
    let rows: Vec<FanoRow> = curve
        .points
        .iter()
        .map(|pt| {
            let lhs = (1.0 - pt.ci_high) * log_l - 1.0;
            let mi = mi_upper(pt.n);
            FanoRow {
                n: pt.n,
                lhs,
                mi_upper: mi,
                violated: lhs > mi,
            }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violated).count();
    FanoReport {
        cardinality,
        rows,
        violations,
    }
}

/// MI upper bound for an experiment at `n` samples: coefficient side
/// information uses the known-covariance bound, support side information the
/// sparse-Gaussian one.
pub fn analytic_mi_upper(spec: &ExperimentSpec<'_>, n: usize) -> f64 {
    let inputs = matching_inputs(spec, n);
    let eps = spec.ensemble.params.eps_prime;
    match spec.side_info {
        SideInfo::FullX => bounds::mi_upper_general(&inputs, eps),
        SideInfo::SupportOnly => bounds::mi_upper_sparse_gaussian(&inputs, eps),
    }
}

pub fn fano_consistency_check(curve: &ErrorCurve, spec: &ExperimentSpec<'_>) -> FanoReport {
    fano_consistency_with(curve, spec.ensemble.len(), |n| analytic_mi_upper(spec, n))
}

pub const CURVE_SCHEMA: &str = "kslab-error-curve/1";
pub const CURVE_HEADER: [&str; 9] = [
    "N",
    "trials",
    "errors",
    "error_rate",
    "ci_low",
    "ci_high",
    "mean_mse",
    "worst_mse",
    "seed",
];
pub const TRIAL_LOG_SCHEMA: &str = "kslab-trial-log/1";

impl ErrorCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::create(path, CURVE_SCHEMA, &CURVE_HEADER)?;
        for pt in &self.points {
            t.row([
                pt.n.to_string(),
                pt.trials.to_string(),
                pt.errors.to_string(),
                format!("{}", pt.error_rate),
                format!("{}", pt.ci_low),
                format!("{}", pt.ci_high),
                format!("{}", pt.mean_mse),
                format!("{}", pt.worst_mse),
                pt.seed.to_string(),
            ])?;
        }
        t.finish()
    }

    /// One row per trial, 1-based member indices.
    pub fn write_trial_log(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::create(
            path,
            TRIAL_LOG_SCHEMA,
            &["N", "trial", "true_l", "decoded_l", "sq_error"],
        )?;
        for pt in &self.points {
            for r in &pt.log {
                t.row([
                    pt.n.to_string(),
                    r.trial.to_string(),
                    (r.true_index + 1).to_string(),
                    (r.decoded_index + 1).to_string(),
                    format!("{}", r.sq_error),
                ])?;
            }
        }
        t.finish()
    }
}

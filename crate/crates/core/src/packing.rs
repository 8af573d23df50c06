//! Hypothesis classes for the minimax argument: ±α sign codebooks with small
//! pairwise correlation and the Kronecker-structured dictionary ensembles
//! built from them inside a Frobenius neighborhood of a reference dictionary.
//!
//! Ensemble construction. Each coordinate factor is perturbed column by
//! column. For a reference column `a₀ⱼ`, a fixed orthonormal basis `Uⱼ` of its
//! orthogonal complement is taken from a Householder reflector; a sign
//! codeword column `sⱼ` (length `m₁ − 1`) is lifted to `Uⱼ sⱼ / ‖sⱼ‖` and
//!
//! ```text
//! aⱼ = √(1 − εa) a₀ⱼ + √εa · Uⱼ sⱼ / ‖sⱼ‖
//! ```
//!
//! which is unit norm by construction. The same is done for `B`, and the
//! member is `A ⊗ B`. With `εa = εb = ε'/r²` and codebook correlations in
//! `[−t, t]`, every pairwise squared distance lies in
//! `[(2p/r²)(1−t)ε', (8p/r²)ε']` as long as `ε'/r² ≤ (1−t)/(1+t)²`, and each
//! member sits at squared distance `2pε'/r²` from the reference. The
//! verifier rechecks all of this numerically; the construction itself is not
//! trusted.

use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs};
use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{self, Matrix};
use crate::model::{self, CoefficientModel, KsDictionary, UNIT_NORM_TOL};

/// Relative slack allowed on the pairwise distance sandwich.
pub const SANDWICH_SLACK: f64 = 1e-9;
/// Supports sampled per pair when measuring support-conditional KL.
pub const KL_SUPPORT_SAMPLES: usize = 64;
const KL_SUPPORT_SEED: u64 = 0x6b6c_5f73_7570_7073;
const ENSEMBLE_RETRIES: usize = 16;
const CODEBOOK_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PackingParams {
    pub t: f64,
    pub c1: f64,
    /// Codeword entry magnitude. `None` means unit-Frobenius codewords,
    /// `1/√(rows·cols)`, for whatever shape is being drawn.
    pub alpha: Option<f64>,
    pub eps_prime: f64,
    pub r: f64,
    /// Optional cap on the ensemble cardinality.
    pub l_target: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Known-covariance coefficients: `ε' < min{r², r⁴/4p}`.
    General,
    /// Sparse coefficients of order `s`: `ε' ≤ min{r²/s, r⁴/4p}`.
    Sparse { s: usize },
}

impl PackingParams {
    /// `t²/(8 ln 2)`; `c1` must stay strictly below it.
    pub fn c1_cap(t: f64) -> f64 {
        t * t / (8.0 * std::f64::consts::LN_2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "t = {} must lie in (0, 1)",
                self.t
            )));
        }
        let cap = Self::c1_cap(self.t);
        if !(self.c1 > 0.0 && self.c1 < cap) {
            return Err(Error::Inadmissible(format!(
                "c1 = {} must satisfy 0 < c1 < t^2/(8 ln 2) = {cap}",
                self.c1
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "r = {} must be positive",
                self.r
            )));
        }
        if !(self.eps_prime > 0.0 && self.eps_prime.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_prime = {} must be positive",
                self.eps_prime
            )));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "alpha = {a} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// The largest `ε'` the mode allows (strict for `General`).
    pub fn eps_cap(mode: EnsembleMode, r: f64, p: usize) -> f64 {
        let r2 = r * r;
        let tail = r2 * r2 / (4.0 * p as f64);
        match mode {
            EnsembleMode::General => r2.min(tail),
            EnsembleMode::Sparse { s } => (r2 / s as f64).min(tail),
        }
    }

    pub fn check_eps_cap(&self, mode: EnsembleMode, p: usize) -> Result<()> {
        let cap = Self::eps_cap(mode, self.r, p);
        let ok = match mode {
            EnsembleMode::General => self.eps_prime < cap,
            EnsembleMode::Sparse { .. } => self.eps_prime <= cap,
        };
        if ok {
            Ok(())
        } else {
            let rel = match mode {
                EnsembleMode::General => "<",
                EnsembleMode::Sparse { .. } => "<=",
            };
            let first = match mode {
                EnsembleMode::General => "r^2".to_string(),
                EnsembleMode::Sparse { s } => format!("r^2/{s}"),
            };
            Err(Error::Inadmissible(format!(
                "eps_prime = {} violates eps_prime {rel} min{{{first}, r^4/(4p)}} = {cap}",
                self.eps_prime
            )))
        }
    }

    fn alpha_for(&self, rows: usize, cols: usize) -> f64 {
        self.alpha
            .unwrap_or_else(|| 1.0 / ((rows * cols) as f64).sqrt())
    }
}

/// `⌊2^{c1·m·p − 1/2}⌋`, rejecting anything below 2.
pub fn max_codebook_size(m: usize, p: usize, c1: f64) -> Result<u64> {
    if !(c1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c1 = {c1} must be positive"
        )));
    }
    let l = (c1 * (m * p) as f64 - 0.5).exp2().floor();
    if l < 2.0 {
        return Err(Error::DegenerateCodebook(l as u64));
    }
    Ok(if l >= u64::MAX as f64 {
        u64::MAX
    } else {
        l as u64
    })
}

/// `c1 < (1/(2 ln 2)) (t / (2α² m p))²`
pub fn alpha_admissible(c1: f64, t: f64, alpha: f64, m: usize, p: usize) -> bool {
    let ratio = t / (2.0 * alpha * alpha * (m * p) as f64);
    c1 < ratio * ratio / (2.0 * std::f64::consts::LN_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignCodebook {
    pub matrices: Vec<Matrix>,
    pub alpha: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookReport {
    pub size: usize,
    pub max_abs_correlation: f64,
    /// 1-based indices of the most correlated pair.
    pub worst_pair: Option<(usize, usize)>,
    pub entries_ok: bool,
    pub pass: bool,
}

fn correlation(a: &Matrix, b: &Matrix) -> f64 {
    linalg::sum_entries(&linalg::hadamard(a, b).expect("codebook shapes agree"))
}

fn random_signs<R: Rng + ?Sized>(rows: usize, cols: usize, alpha: f64, rng: &mut R) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        if rng.random::<bool>() {
            alpha
        } else {
            -alpha
        }
    })
}

/// One greedy pass: draw up to `candidates` sign matrices, keeping each one
/// whose correlation with every kept matrix is within `t`, until `cap` are kept.
pub(crate) fn greedy_pass<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    alpha: f64,
    t: f64,
    cap: usize,
    candidates: usize,
    rng: &mut R,
) -> Vec<Matrix> {
    let mut kept: Vec<Matrix> = Vec::with_capacity(cap.min(candidates));
    for _ in 0..candidates {
        if kept.len() == cap {
            break;
        }
        let cand = random_signs(rows, cols, alpha, rng);
        if kept.iter().all(|k| correlation(k, &cand).abs() <= t) {
            kept.push(cand);
        }
    }
    kept
}

fn greedy_codebook<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    alpha: f64,
    t: f64,
    l_target: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Vec<Matrix>> {
    let candidates = 64 * l_target.max(1);
    for _ in 0..max_attempts {
        let kept = greedy_pass(rows, cols, alpha, t, l_target, candidates, rng);
        if kept.len() == l_target {
            return Ok(kept);
        }
    }
    Err(Error::AttemptsExhausted(max_attempts))
}

/// Draws `l_target` i.i.d. uniform ±α matrices, accepting each only if its
/// correlation with every earlier member is within `t`; restarts from scratch
/// up to `max_attempts` times.
pub fn build_sign_codebook<R: Rng + ?Sized>(
    m: usize,
    p: usize,
    params: &PackingParams,
    l_target: u64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<SignCodebook> {
    if l_target < 2 {
        return Err(Error::DegenerateCodebook(l_target));
    }
    params.validate()?;
    let max = max_codebook_size(m, p, params.c1)?;
    if l_target > max {
        return Err(Error::Inadmissible(format!(
            "L_target = {l_target} exceeds floor(2^(c1 m p - 1/2)) = {max}"
        )));
    }
    let alpha = params.alpha_for(m, p);
    if !alpha_admissible(params.c1, params.t, alpha, m, p) {
        return Err(Error::Inadmissible(format!(
            "alpha = {alpha} violates c1 < (t/(2 alpha^2 m p))^2/(2 ln 2)"
        )));
    }
    let matrices = greedy_codebook(m, p, alpha, params.t, l_target as usize, rng, max_attempts)?;
    Ok(SignCodebook {
        matrices,
        alpha,
        t: params.t,
    })
}

/// Exhaustive pairwise recheck of `|Σ(Aₗ ⊙ Aₗ')| ≤ t` plus the ±α entry shape.
pub fn verify_sign_codebook(cb: &SignCodebook) -> CodebookReport {
    let entries_ok = cb
        .matrices
        .iter()
        .all(|m| m.shape() == cb.matrices[0].shape() && m.iter().all(|&v| v.abs() == cb.alpha));
    let mut max_abs = 0.0f64;
    let mut worst = None;
    let n = cb.matrices.len();
    for i in 0..n {
        for j in i + 1..n {
            let c = correlation(&cb.matrices[i], &cb.matrices[j]).abs();
            if worst.is_none() || c > max_abs {
                max_abs = c;
                worst = Some((i + 1, j + 1));
            }
        }
    }
    CodebookReport {
        size: n,
        max_abs_correlation: max_abs,
        worst_pair: worst,
        entries_ok,
        pass: entries_ok && max_abs <= cb.t,
    }
}

/// Orthonormal basis of the complement of the unit vector `a`, as the last
/// `m − 1` columns of the Householder reflector mapping `e₁` to `±a`.
pub fn complement_basis(a: &DVector<f64>) -> Matrix {
    let m = a.len();
    let mut v = a.clone();
    let sign = if a[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.norm_squared();
    let h = Matrix::identity(m, m) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, m - 1).into_owned()
}

fn perturb_factor(reference: &Matrix, signs: Option<&Matrix>, eps: f64) -> Result<Matrix> {
    let Some(signs) = signs else {
        return Ok(reference.clone());
    };
    let mut out = reference.clone();
    let keep = (1.0 - eps).sqrt();
    let push = eps.sqrt();
    for j in 0..reference.ncols() {
        let a0 = reference.column(j).into_owned();
        let basis = complement_basis(&a0);
        let s = signs.column(j);
        let dir = &basis * s / s.norm();
        out.set_column(j, &(a0 * keep + dir * push));
    }
    linalg::normalize_columns(&out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlCheck {
    /// Worst per-sample KL over member pairs, nats; the ensemble's `α_L / N`.
    pub alpha_l_per_sample: f64,
    /// Per-sample MI upper bound the KL must stay under.
    pub budget_per_sample: f64,
    pub side_information: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub cardinality: usize,
    pub min_pair_dist_sq: f64,
    pub max_pair_dist_sq: f64,
    pub lower_sandwich: f64,
    pub upper_sandwich: f64,
    pub max_dist_to_reference: f64,
    pub radius: f64,
    pub max_column_norm_deviation: f64,
    /// `2√(2ε)` for `8ε = (2p/r²)(1−t)ε'`.
    pub separation: f64,
    pub membership_ok: bool,
    pub sandwich_ok: bool,
    pub unit_norm_ok: bool,
    pub separation_ok: bool,
    pub kl: Option<KlCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryEnsemble {
    pub reference: KsDictionary,
    pub members: Vec<KsDictionary>,
    pub params: PackingParams,
    pub mode: EnsembleMode,
    pub seed: Option<u64>,
    pub report: EnsembleReport,
}

impl DictionaryEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    /// `L` as the bounds see it.
    pub fn cardinality(&self) -> f64 {
        self.members.len() as f64
    }
}

/// `⌊2^{c1((m1−1)p1 + (m2−1)p2) − 1}⌋`, capped by `params.l_target`.
pub fn ensemble_size(dims: (usize, usize, usize, usize), params: &PackingParams) -> Result<u64> {
    let (m1, m2, p1, p2) = dims;
    let dof = ((m1 - 1) * p1 + (m2 - 1) * p2) as f64;
    let l = bounds::ensemble_cardinality(params.c1, dof);
    let l = if l >= u64::MAX as f64 {
        u64::MAX
    } else {
        l as u64
    };
    let l = params.l_target.map_or(l, |cap| l.min(cap));
    if l < 2 {
        return Err(Error::DegenerateCodebook(l));
    }
    Ok(l)
}

/// Builds a verified ensemble of `L` Kronecker-structured dictionaries around
/// `reference`. Geometry (membership, sandwich, unit norms) is rechecked and
/// the construction retried with fresh codebooks on failure.
pub fn build_ensemble<R: Rng + ?Sized>(
    reference: &KsDictionary,
    params: &PackingParams,
    mode: EnsembleMode,
    rng: &mut R,
) -> Result<DictionaryEnsemble> {
    params.validate()?;
    let (m1, m2, p1, p2) = reference.dims();
    let p = reference.p();
    if let EnsembleMode::Sparse { s } = mode {
        if s == 0 || s > p {
            return Err(Error::InvalidParameter(format!(
                "sparsity s = {s} out of range"
            )));
        }
    }
    params.check_eps_cap(mode, p)?;
    if m1 < 2 && m2 < 2 {
        return Err(Error::InvalidParameter(
            "at least one coordinate dictionary needs m >= 2".into(),
        ));
    }
    let l = ensemble_size((m1, m2, p1, p2), params)?;
    if l > 1 << 20 {
        return Err(Error::InvalidParameter(format!(
            "ensemble of {l} members is too large; set l_target"
        )));
    }
    let l = l as usize;

    let budget = params.eps_prime / (params.r * params.r);
    let (eps_a, eps_b) = match (m1 >= 2, m2 >= 2) {
        (true, true) => (budget, budget),
        (true, false) => (2.0 * budget, 0.0),
        _ => (0.0, 2.0 * budget),
    };

    let mut last = None;
    for _ in 0..ENSEMBLE_RETRIES {
        let code_a = if m1 >= 2 {
            let alpha = params.alpha_for(m1 - 1, p1);
            Some(greedy_codebook(
                m1 - 1,
                p1,
                alpha,
                params.t,
                l,
                rng,
                CODEBOOK_ATTEMPTS,
            )?)
        } else {
            None
        };
        let code_b = if m2 >= 2 {
            let alpha = params.alpha_for(m2 - 1, p2);
            Some(greedy_codebook(
                m2 - 1,
                p2,
                alpha,
                params.t,
                l,
                rng,
                CODEBOOK_ATTEMPTS,
            )?)
        } else {
            None
        };
        let members = (0..l)
            .map(|i| {
                let a = perturb_factor(reference.a(), code_a.as_ref().map(|c| &c[i]), eps_a)?;
                let b = perturb_factor(reference.b(), code_b.as_ref().map(|c| &c[i]), eps_b)?;
                KsDictionary::new(a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        let report = geometry_report(reference, &members, params);
        let ensemble = DictionaryEnsemble {
            reference: reference.clone(),
            members,
            params: *params,
            mode,
            seed: None,
            report,
        };
        if ensemble.report.pass {
            return Ok(ensemble);
        }
        last = Some(ensemble.report);
    }
    Err(Error::VerificationFailed(format!(
        "construction failed geometric checks after {ENSEMBLE_RETRIES} tries: {last:?}"
    )))
}

/// [`build_ensemble`] on a ChaCha8 stream seeded with `seed`.
pub fn build_ensemble_seeded(
    reference: &KsDictionary,
    params: &PackingParams,
    mode: EnsembleMode,
    seed: u64,
) -> Result<DictionaryEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = build_ensemble(reference, params, mode, &mut rng)?;
    e.seed = Some(seed);
    Ok(e)
}

fn pairs(l: usize) -> Vec<(usize, usize)> {
    (0..l)
        .flat_map(|i| (i + 1..l).map(move |j| (i, j)))
        .collect()
}

fn geometry_report(
    reference: &KsDictionary,
    members: &[KsDictionary],
    params: &PackingParams,
) -> EnsembleReport {
    let p = reference.p() as f64;
    let r2 = params.r * params.r;
    let lower = 2.0 * p / r2 * (1.0 - params.t) * params.eps_prime;
    let upper = 8.0 * p / r2 * params.eps_prime;

    let dists: Vec<f64> = pairs(members.len())
        .par_iter()
        .map(|&(i, j)| {
            linalg::fro_distance_sq(members[i].d(), members[j].d()).unwrap_or(f64::INFINITY)
        })
        .collect();
    let min_d = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let max_d = dists.iter().copied().fold(0.0, f64::max);

    let max_ref = members
        .iter()
        .map(|m| linalg::fro_distance(m.d(), reference.d()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let max_norm_dev = members
        .iter()
        .flat_map(|m| {
            m.d()
                .column_iter()
                .map(|c| (c.norm() - 1.0).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);

    let membership_ok = max_ref < params.r;
    let sandwich_ok = !dists.is_empty()
        && min_d >= lower * (1.0 - SANDWICH_SLACK)
        && max_d <= upper * (1.0 + SANDWICH_SLACK);
    let unit_norm_ok = max_norm_dev <= UNIT_NORM_TOL;
    // 8ε = lower, so 2√(2ε) = √lower.
    let separation = lower.sqrt();
    let separation_ok = !dists.is_empty() && min_d.sqrt() >= separation * (1.0 - SANDWICH_SLACK);

    EnsembleReport {
        cardinality: members.len(),
        min_pair_dist_sq: min_d,
        max_pair_dist_sq: max_d,
        lower_sandwich: lower,
        upper_sandwich: upper,
        max_dist_to_reference: max_ref,
        radius: params.r,
        max_column_norm_deviation: max_norm_dev,
        separation,
        membership_ok,
        sandwich_ok,
        unit_norm_ok,
        separation_ok,
        kl: None,
        pass: membership_ok && sandwich_ok && unit_norm_ok && separation_ok,
    }
}

/// Inputs for the per-sample MI budgets, taken from an ensemble and model.
pub fn budget_inputs(e: &DictionaryEnsemble, model: &CoefficientModel, sigma: f64) -> BoundInputs {
    let (m1, m2, p1, p2) = e.reference.dims();
    let p = e.reference.p();
    BoundInputs {
        n: 1.0,
        m1,
        m2,
        p1,
        p2,
        r: e.params.r,
        sigma,
        sigma_a: model.sigma_a().unwrap_or(1.0),
        s: model.sparsity().unwrap_or(1),
        sigma_x_spectral: model.covariance_spectral_norm(p),
        t: e.params.t,
        c1: e.params.c1,
    }
}

fn kl_check(e: &DictionaryEnsemble, model: &CoefficientModel, sigma: f64) -> Result<KlCheck> {
    let p = e.reference.p();
    let inputs = budget_inputs(e, model, sigma);
    let idx = pairs(e.members.len());
    match model {
        CoefficientModel::SparseGaussian { s, sigma_a } => {
            let mut rng = ChaCha8Rng::seed_from_u64(KL_SUPPORT_SEED);
            let supports = (0..KL_SUPPORT_SAMPLES)
                .map(|_| model::sample_support(p, *s, &mut rng))
                .collect::<Result<Vec<_>>>()?;
            let covs = e
                .members
                .iter()
                .map(|m| {
                    supports
                        .iter()
                        .map(|sup| bounds::conditional_covariance(m, sup, *sigma_a, sigma))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let kls = idx
                .par_iter()
                .map(|&(i, j)| {
                    let mut worst = 0.0f64;
                    for (a, b) in [(i, j), (j, i)] {
                        let mut total = 0.0;
                        for k in 0..supports.len() {
                            total += bounds::kl_gaussian(&covs[a][k], &covs[b][k])?;
                        }
                        worst = worst.max(total / supports.len() as f64);
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<f64>>>()?;
            let alpha = kls.into_iter().fold(0.0, f64::max);
            let budget = bounds::mi_upper_sparse_gaussian(&inputs, e.params.eps_prime);
            Ok(KlCheck {
                alpha_l_per_sample: alpha,
                budget_per_sample: budget,
                side_information: "support".into(),
                pass: alpha <= budget,
            })
        }
        _ => {
            // Given x, y ~ N(D x, σ² I): E KL = tr(Δ Σx Δᵀ) / (2σ²).
            let cov = model.covariance(p);
            let kls: Vec<f64> = idx
                .par_iter()
                .map(|&(i, j)| {
                    let delta = e.members[i].d() - e.members[j].d();
                    (&delta * &cov * delta.transpose()).trace() / (2.0 * sigma * sigma)
                })
                .collect();
            let alpha = kls.into_iter().fold(0.0, f64::max);
            let budget = bounds::mi_upper_general(&inputs, e.params.eps_prime);
            Ok(KlCheck {
                alpha_l_per_sample: alpha,
                budget_per_sample: budget,
                side_information: "coefficients".into(),
                pass: alpha <= budget,
            })
        }
    }
}

/// Full recheck of an ensemble: membership in the radius-`r` ball, the pairwise
/// sandwich, unit-norm columns, separation `2√(2ε)`, and the per-sample KL
/// between member-induced observation laws against the MI budget.
pub fn verify_ensemble(
    e: &DictionaryEnsemble,
    model: &CoefficientModel,
    sigma: f64,
) -> Result<EnsembleReport> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter("KL check needs sigma > 0".into()));
    }
    model.validate(e.reference.p())?;
    let mut report = geometry_report(&e.reference, &e.members, &e.params);
    let kl = kl_check(e, model, sigma)?;
    report.pass = report.pass && kl.pass;
    report.kl = Some(kl);
    Ok(report)
}

pub const ENSEMBLE_SCHEMA: &str = "kslab-ensemble/1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleManifest {
    pub schema: String,
    pub m1: usize,
    pub m2: usize,
    pub p1: usize,
    pub p2: usize,
    pub cardinality: usize,
    pub params: PackingParams,
    pub mode: EnsembleMode,
    pub seed: Option<u64>,
    pub report: EnsembleReport,
}

impl DictionaryEnsemble {
    /// Writes factor CSVs for the reference and every member plus
    /// `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_matrix(&dir.join("reference_a.csv"), self.reference.a())?;
        io::write_matrix(&dir.join("reference_b.csv"), self.reference.b())?;
        for (l, m) in self.members.iter().enumerate() {
            io::write_matrix(&dir.join(format!("member_{:04}_a.csv", l + 1)), m.a())?;
            io::write_matrix(&dir.join(format!("member_{:04}_b.csv", l + 1)), m.b())?;
        }
        let (m1, m2, p1, p2) = self.reference.dims();
        let manifest = EnsembleManifest {
            schema: ENSEMBLE_SCHEMA.into(),
            m1,
            m2,
            p1,
            p2,
            cardinality: self.members.len(),
            params: self.params,
            mode: self.mode,
            seed: self.seed,
            report: self.report.clone(),
        };
        io::write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: EnsembleManifest = io::read_json(&dir.join("manifest.json"))?;
        if manifest.schema != ENSEMBLE_SCHEMA {
            return Err(Error::Malformed {
                path: dir.display().to_string(),
                reason: format!("unknown schema {}", manifest.schema),
            });
        }
        let reference = KsDictionary::new(
            io::read_matrix(&dir.join("reference_a.csv"))?,
            io::read_matrix(&dir.join("reference_b.csv"))?,
        )?;
        let members = (1..=manifest.cardinality)
            .map(|l| {
                KsDictionary::new(
                    io::read_matrix(&dir.join(format!("member_{l:04}_a.csv")))?,
                    io::read_matrix(&dir.join(format!("member_{l:04}_b.csv")))?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        if reference.dims() != (manifest.m1, manifest.m2, manifest.p1, manifest.p2) {
            return Err(Error::Malformed {
                path: dir.display().to_string(),
                reason: "reference dimensions disagree with manifest".into(),
            });
        }
        Ok(Self {
            reference,
            members,
            params: manifest.params,
            mode: manifest.mode,
            seed: manifest.seed,
            report: manifest.report,
        })
    }
}

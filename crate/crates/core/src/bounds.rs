//! Closed-form information quantities and minimax lower-bound evaluators.
//!
//! Units: the Fano threshold is in bits. The mutual-information upper bounds
//! are the closed-form expressions evaluated verbatim and compared with the
//! Fano threshold directly, which is how the bound evaluators below are
//! derived. Measured Gaussian KL divergences ([`kl_gaussian`]) use natural
//! logarithms.

use std::path::Path;

use nalgebra::{Cholesky, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::linalg::{IndexMultiset, Matrix};
use crate::model::KsDictionary;

/// Leading constant of the sparse-Gaussian bound, before the `p(1-t)/r²` factor.
pub const THM2_CONSTANT: f64 = 1.58e-5;
/// Constant in the support-side-information MI bound.
pub const SPARSE_GAUSSIAN_MI_CONSTANT: f64 = 7921.0;
/// Default cap on the number of supports [`rip_constant`] will enumerate.
pub const RIP_BUDGET: u128 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: f64,
    pub m1: usize,
    pub m2: usize,
    pub p1: usize,
    pub p2: usize,
    pub r: f64,
    pub sigma: f64,
    pub sigma_a: f64,
    pub s: usize,
    /// `‖Σx‖₂`, used by the general-coefficient bound only.
    pub sigma_x_spectral: f64,
    pub t: f64,
    pub c1: f64,
}

impl BoundInputs {
    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }
    pub fn p(&self) -> usize {
        self.p1 * self.p2
    }

    /// `p1(m1-1) + p2(m2-1)`, the number of free coordinates of the
    /// perturbation directions.
    pub fn degrees_of_freedom(&self) -> f64 {
        (self.p1 * (self.m1 - 1) + self.p2 * (self.m2 - 1)) as f64
    }

    /// `c1 (p1(m1-1) + p2(m2-1)) - 3`
    pub fn degrees_term(&self) -> f64 {
        self.c1 * self.degrees_of_freedom() - 3.0
    }

    /// `⌊2^{c1((m1-1)p1 + (m2-1)p2) - 1}⌋`
    pub fn cardinality(&self) -> f64 {
        ensemble_cardinality(self.c1, self.degrees_of_freedom())
    }

    /// Largest admissible `c1` for the theorems: `t / (8 ln 2)`.
    pub fn c1_cap(t: f64) -> f64 {
        t / (8.0 * std::f64::consts::LN_2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidParameter(what));
        if self.m1 == 0 || self.m2 == 0 || self.p1 == 0 || self.p2 == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.s == 0 {
            return bad("sparsity must be positive".into());
        }
        for (name, v) in [
            ("N", self.n),
            ("r", self.r),
            ("sigma", self.sigma),
            ("sigma_a", self.sigma_a),
            ("sigma_x_spectral", self.sigma_x_spectral),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return bad(format!("t = {} must lie in (0, 1)", self.t));
        }
        let cap = Self::c1_cap(self.t);
        if !(self.c1 > 0.0 && self.c1 < cap) {
            return Err(Error::Inadmissible(format!(
                "c1 = {} must satisfy 0 < c1 < t/(8 ln 2) = {cap}",
                self.c1
            )));
        }
        Ok(())
    }
}

pub fn ensemble_cardinality(c1: f64, dof: f64) -> f64 {
    (c1 * dof - 1.0).exp2().floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Lower bound on the minimax risk, squared-Frobenius units; 0 when vacuous.
    pub value: f64,
    pub vacuous: bool,
    pub degrees_term: f64,
    /// Implied ensemble cardinality `L`.
    pub cardinality: f64,
    /// Largest minimax risk for which the theorem applies.
    pub precondition_cap: f64,
}

fn clamp_bound(raw: f64, inputs: &BoundInputs, cap: f64) -> BoundResult {
    let degrees_term = inputs.degrees_term();
    let vacuous = degrees_term <= 0.0;
    BoundResult {
        value: if vacuous { 0.0 } else { raw.max(0.0) },
        vacuous,
        degrees_term,
        cardinality: inputs.cardinality(),
        precondition_cap: cap,
    }
}

/// `C1 = (1-t) p / (32 r²)`
pub fn c1_constant(inputs: &BoundInputs) -> f64 {
    (1.0 - inputs.t) * inputs.p() as f64 / (32.0 * inputs.r * inputs.r)
}

/// `C2 = 1.58e-5 · p (1-t) / r²`
pub fn c2_constant(inputs: &BoundInputs) -> f64 {
    THM2_CONSTANT * inputs.p() as f64 * (1.0 - inputs.t) / (inputs.r * inputs.r)
}

fn general_cap(inputs: &BoundInputs, first: f64) -> f64 {
    let p = inputs.p() as f64;
    2.0 * p * (1.0 - inputs.t) / 8.0 * first.min(inputs.r * inputs.r / (4.0 * p))
}

/// General coefficients with known `‖Σx‖₂` and full side information.
pub fn thm1_bound(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let raw = c1_constant(inputs) * inputs.r * inputs.r * inputs.sigma * inputs.sigma
        / (inputs.n * inputs.p() as f64 * inputs.sigma_x_spectral)
        * inputs.degrees_term();
    Ok(clamp_bound(raw, inputs, general_cap(inputs, 1.0)))
}

/// Sparse coefficients: the general bound with `‖Σx‖₂ = (s/p) σa²`.
pub fn cor1_bound(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let raw = c1_constant(inputs) * inputs.r * inputs.r * inputs.sigma * inputs.sigma
        / (inputs.n * inputs.s as f64 * inputs.sigma_a * inputs.sigma_a)
        * inputs.degrees_term();
    Ok(clamp_bound(raw, inputs, general_cap(inputs, 1.0)))
}

/// Sparse Gaussian coefficients with support side information.
pub fn thm2_bound(inputs: &BoundInputs) -> Result<BoundResult> {
    inputs.validate()?;
    let s = inputs.s as f64;
    let raw = c2_constant(inputs) * inputs.r * inputs.r * inputs.sigma.powi(4)
        / (inputs.n * s * s * inputs.sigma_a.powi(4))
        * inputs.degrees_term();
    Ok(clamp_bound(raw, inputs, general_cap(inputs, 1.0 / s)))
}

/// `4 N p ‖Σx‖₂ ε' / (r² σ²)`
pub fn mi_upper_general(inputs: &BoundInputs, eps_prime: f64) -> f64 {
    4.0 * inputs.n * inputs.p() as f64 * inputs.sigma_x_spectral * eps_prime
        / (inputs.r * inputs.r * inputs.sigma * inputs.sigma)
}

/// `7921 (σa/σ)⁴ N s² ε' / r²`
pub fn mi_upper_sparse_gaussian(inputs: &BoundInputs, eps_prime: f64) -> f64 {
    let s = inputs.s as f64;
    SPARSE_GAUSSIAN_MI_CONSTANT
        * (inputs.sigma_a / inputs.sigma).powi(4)
        * inputs.n
        * s
        * s
        * eps_prime
        / (inputs.r * inputs.r)
}

/// Fano threshold `½ log₂ L − 1`, in bits. May be negative.
pub fn fano_lower(cardinality: f64) -> Result<f64> {
    if !(cardinality >= 2.0) {
        return Err(Error::DegenerateCodebook(cardinality.max(0.0) as u64));
    }
    Ok(0.5 * cardinality.log2() - 1.0)
}

/// The `ε'` whose pairwise separation `(2p/r²)(1-t)ε'` equals `8ε`.
pub fn eps_prime_for_risk(inputs: &BoundInputs, eps: f64) -> f64 {
    8.0 * eps * inputs.r * inputs.r / (2.0 * inputs.p() as f64 * (1.0 - inputs.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table1Distribution {
    Sparse,
    GaussianSparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table1Structure {
    Unstructured,
    Kronecker,
}

/// Order-wise minimax scalings for the four (distribution, structure) cells.
pub fn table1_scaling(
    distribution: Table1Distribution,
    structure: Table1Structure,
    (m1, m2, p1, p2): (usize, usize, usize, usize),
    n: f64,
    r: f64,
    snr: f64,
) -> f64 {
    let m = (m1 * m2) as f64;
    let p = (p1 * p2) as f64;
    let ks_dof = (m1 * p1 + m2 * p2) as f64;
    let r2 = r * r;
    match (distribution, structure) {
        (Table1Distribution::Sparse, Table1Structure::Unstructured) => r2 * p / (n * snr),
        (Table1Distribution::Sparse, Table1Structure::Kronecker) => r2 * ks_dof / (n * m * snr),
        (Table1Distribution::GaussianSparse, Table1Structure::Unstructured) => {
            r2 * p / (n * m * snr * snr)
        }
        (Table1Distribution::GaussianSparse, Table1Structure::Kronecker) => {
            r2 * ks_dof / (n * m * m * snr * snr)
        }
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = a.abs().max().max(1e-300);
    if (a - a.transpose()).abs().max() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// `KL(N(0, Σ1) ‖ N(0, Σ2))` in nats.
pub fn kl_gaussian(sigma1: &Matrix, sigma2: &Matrix) -> Result<f64> {
    if sigma1.shape() != sigma2.shape() {
        return Err(Error::DimensionMismatch {
            op: "kl_gaussian",
            left: sigma1.shape(),
            right: sigma2.shape(),
        });
    }
    check_symmetric(sigma1)?;
    check_symmetric(sigma2)?;
    let d = sigma1.nrows() as f64;
    let c1 = Cholesky::new(sigma1.clone()).ok_or(Error::NotPositiveDefinite)?;
    let c2 = Cholesky::new(sigma2.clone()).ok_or(Error::NotPositiveDefinite)?;
    let logdet = |c: &Cholesky<f64, nalgebra::Dyn>| -> f64 {
        2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    };
    let trace = c2.solve(sigma1).trace();
    let kl = 0.5 * (trace - d + logdet(&c2) - logdet(&c1));
    Ok(kl.max(0.0))
}

/// Observation covariance given the support: `σa² D_S D_Sᵀ + σ² I_m`, with
/// `D_S` formed as a Khatri-Rao product of the factor selections.
pub fn conditional_covariance(
    dict: &KsDictionary,
    support: &IndexMultiset,
    sigma_a: f64,
    sigma: f64,
) -> Result<Matrix> {
    if support.is_empty() {
        return Err(Error::InvalidParameter("empty support".into()));
    }
    let sub = dict.subdictionary(support)?;
    let m = dict.m();
    Ok(&sub * sub.transpose() * (sigma_a * sigma_a) + Matrix::identity(m, m) * (sigma * sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipReport {
    pub s: usize,
    pub delta: f64,
    pub witness: IndexMultiset,
}

pub fn n_choose_k(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Deviation of a support's Gram spectrum from 1: `max(1 − λmin, λmax − 1)`.
pub fn gram_deviation(d: &Matrix, cols: &[usize]) -> f64 {
    let sub = d.select_columns(cols.iter());
    let gram = sub.transpose() * &sub;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    (1.0 - eig.min()).max(eig.max() - 1.0)
}

/// Exhaustive restricted isometry constant of order `s`.
///
/// Every `s`-subset of columns is visited; ties on `δ` resolve to the
/// lexicographically smallest support so parallel runs agree.
pub fn rip_constant(d: &Matrix, s: usize, budget: u128) -> Result<RipReport> {
    let p = d.ncols();
    if s == 0 || s > p {
        return Err(Error::InvalidParameter(format!(
            "RIP order s = {s} must satisfy 1 <= s <= p = {p}"
        )));
    }
    let needed = n_choose_k(p, s);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let best = (0..=p - s)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut combo: Vec<usize> = (first..first + s).collect();
            loop {
                let dev = gram_deviation(d, &combo);
                if best.as_ref().is_none_or(|(b, _)| dev > *b) {
                    best = Some((dev, combo.clone()));
                }
                if !next_combination(&mut combo[1..], p) {
                    break;
                }
            }
            best.expect("at least one support")
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("p >= s");
    Ok(RipReport {
        s,
        delta: best.0.max(0.0),
        witness: IndexMultiset::from_unchecked(best.1.into_iter().map(|i| i + 1).collect()),
    })
}

// Advances an increasing run of indices below `n` to the next combination in
// lexicographic order.
fn next_combination(tail: &mut [usize], n: usize) -> bool {
    let k = tail.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if tail[i] < n - k + i {
            tail[i] += 1;
            for j in i + 1..k {
                tail[j] = tail[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub sigma_a: f64,
    pub snr: f64,
    pub cor1: f64,
    pub thm2: f64,
}

/// The coefficient scale `σa*` (and its SNR `s σa²/(m σ²)`) at which the
/// sparse and sparse-Gaussian bounds coincide, by bisection on `ln σa`.
/// Below it the sparse-Gaussian bound is larger.
pub fn crossover_snr(inputs: &BoundInputs) -> Result<Crossover> {
    inputs.validate()?;
    if inputs.degrees_term() <= 0.0 {
        return Err(Error::InvalidParameter("bounds are vacuous".into()));
    }
    let gap = |log_sa: f64| -> Result<(f64, f64, f64)> {
        let at = BoundInputs {
            sigma_a: log_sa.exp(),
            ..*inputs
        };
        let c = cor1_bound(&at)?.value;
        let g = thm2_bound(&at)?.value;
        Ok((c.ln() - g.ln(), c, g))
    };
    let span = 40.0f64;
    let mut lo = inputs.sigma.ln() - span;
    let mut hi = inputs.sigma.ln() + span;
    if gap(lo)?.0 > 0.0 || gap(hi)?.0 < 0.0 {
        return Err(Error::NoCrossing);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)?.0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    let log_sa = 0.5 * (lo + hi);
    let (_, cor1, thm2) = gap(log_sa)?;
    if (cor1 - thm2).abs() > 1e-9 * cor1 {
        return Err(Error::NoCrossing);
    }
    let sigma_a = log_sa.exp();
    let snr =
        inputs.s as f64 * sigma_a * sigma_a / (inputs.m() as f64 * inputs.sigma * inputs.sigma);
    Ok(Crossover {
        sigma_a,
        snr,
        cor1,
        thm2,
    })
}

pub const BOUND_SCHEMA: &str = "kslab-bounds/1";
pub const BOUND_HEADER: [&str; 18] = [
    "N",
    "m1",
    "m2",
    "p1",
    "p2",
    "r",
    "sigma",
    "sigma_a",
    "s",
    "sigma_x_spectral",
    "t",
    "c1",
    "bound_name",
    "value",
    "vacuous",
    "L",
    "mi_upper",
    "fano_threshold",
];

/// One row of a bound sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub inputs: BoundInputs,
    pub bound_name: String,
    pub value: f64,
    pub vacuous: bool,
    pub cardinality: f64,
    /// MI upper bound evaluated at the `ε'` matching `value` (0 when vacuous).
    pub mi_upper: f64,
    pub fano_threshold: f64,
}

impl BoundRow {
    /// Row for one of the theorem evaluators; `mi_upper` is evaluated at the
    /// separation matching the bound value, where it equals the Fano threshold.
    pub fn from_theorem(name: &str, inputs: &BoundInputs, res: &BoundResult) -> Result<Self> {
        let eps_prime = eps_prime_for_risk(inputs, res.value);
        let mi_upper = match name {
            "thm2" => mi_upper_sparse_gaussian(inputs, eps_prime),
            "cor1" => {
                let sparse = BoundInputs {
                    sigma_x_spectral: inputs.s as f64 / inputs.p() as f64
                        * inputs.sigma_a
                        * inputs.sigma_a,
                    ..*inputs
                };
                mi_upper_general(&sparse, eps_prime)
            }
            _ => mi_upper_general(inputs, eps_prime),
        };
        Ok(Self {
            inputs: *inputs,
            bound_name: name.into(),
            value: res.value,
            vacuous: res.vacuous,
            cardinality: res.cardinality,
            mi_upper,
            fano_threshold: fano_threshold_or_nan(res.cardinality),
        })
    }
}

fn fano_threshold_or_nan(l: f64) -> f64 {
    fano_lower(l).unwrap_or(f64::NAN)
}

/// Writes a bound sweep as CSV with the schema comment line first.
pub fn write_bound_rows(path: &Path, rows: &[BoundRow]) -> Result<()> {
    let mut t = CsvTable::create(path, BOUND_SCHEMA, &BOUND_HEADER)?;
    for row in rows {
        let i = &row.inputs;
        t.row([
            format!("{}", i.n),
            i.m1.to_string(),
            i.m2.to_string(),
            i.p1.to_string(),
            i.p2.to_string(),
            format!("{}", i.r),
            format!("{}", i.sigma),
            format!("{}", i.sigma_a),
            i.s.to_string(),
            format!("{}", i.sigma_x_spectral),
            format!("{}", i.t),
            format!("{}", i.c1),
            row.bound_name.clone(),
            format!("{}", row.value),
            row.vacuous.to_string(),
            format!("{}", row.cardinality),
            format!("{}", row.mi_upper),
            format!("{}", row.fano_threshold),
        ])?;
    }
    t.finish()
}

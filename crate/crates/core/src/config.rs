//! Run configuration for the `kslab` commands.
//!
//! The file is TOML. Blocks may be written as tables (`[model]`) or as flat
//! dotted keys (`model.m1 = 4`); both parse to the same thing. Unknown keys
//! are rejected. Every field except the four dimensions has a default:
//!
//! | key | default |
//! |-----|---------|
//! | `coeff.type` | `"sparse_gaussian"` (`general`, `sparse_uniform`, `sparse_gaussian`) |
//! | `coeff.s` | `2` |
//! | `coeff.sigma_a` | `1.0`; for `general` the covariance is `sigma_a² I` |
//! | `coeff.law` | `"rademacher"` (`uniform`), `sparse_uniform` only |
//! | `noise.sigma` | `1.0` |
//! | `packing.t` | `0.5` |
//! | `packing.c1` | `0.044` |
//! | `packing.eps_prime` | half the cap for the coefficient type |
//! | `packing.r` | `1.0` |
//! | `packing.alpha` | unit-Frobenius codewords |
//! | `packing.L_target` | none |
//! | `packing.seed` | `1` |
//! | `experiment.N_grid` | `[1, 5, 25, 125]` |
//! | `experiment.trials` | `500` |
//! | `experiment.side_info` | `"full_x"` (`support_only`) |
//! | `experiment.master_seed` | `7` |
//! | `bound.N_grid` | `[100, 1000, 10000]` |
//! | `rip.s` | `2` |
//! | `rip.threshold` | `0.5` |
//! | `rip.budget` | `5000000` |
//! | `output.directory` | `"out"` |
//! | `output.formats` | `["csv", "json", "svg"]` |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, RIP_BUDGET};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{CoefficientModel, NonzeroLaw};
use crate::packing::{EnsembleMode, PackingParams};
use crate::simulate::SideInfo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub coeff: CoeffBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub packing: PackingBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub bound: BoundBlock,
    #[serde(default)]
    pub rip: RipBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub m1: usize,
    pub m2: usize,
    pub p1: usize,
    pub p2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffType {
    General,
    SparseUniform,
    SparseGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoeffBlock {
    #[serde(rename = "type")]
    pub kind: CoeffType,
    pub s: usize,
    pub sigma_a: f64,
    pub law: NonzeroLaw,
}

impl Default for CoeffBlock {
    fn default() -> Self {
        Self {
            kind: CoeffType::SparseGaussian,
            s: 2,
            sigma_a: 1.0,
            law: NonzeroLaw::Rademacher,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseBlock {
    pub sigma: f64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PackingBlock {
    pub t: f64,
    pub c1: f64,
    pub eps_prime: Option<f64>,
    pub r: f64,
    pub alpha: Option<f64>,
    #[serde(rename = "L_target")]
    pub l_target: Option<u64>,
    pub seed: u64,
}

impl Default for PackingBlock {
    fn default() -> Self {
        Self {
            t: 0.5,
            c1: 0.044,
            eps_prime: None,
            r: 1.0,
            alpha: None,
            l_target: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub side_info: SideInfo,
    pub master_seed: u64,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            n_grid: vec![1, 5, 25, 125],
            trials: 500,
            side_info: SideInfo::FullX,
            master_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundBlock {
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<f64>,
}

impl Default for BoundBlock {
    fn default() -> Self {
        Self {
            n_grid: vec![100.0, 1000.0, 10000.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RipBlock {
    pub s: usize,
    pub threshold: f64,
    pub budget: u64,
}

impl Default for RipBlock {
    fn default() -> Self {
        Self {
            s: 2,
            threshold: 0.5,
            budget: RIP_BUDGET as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![Format::Csv, Format::Json, Format::Svg],
        }
    }
}

fn field_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Pulls the first backquoted identifier out of a TOML error message, which
/// is how the parser names the offending key.
fn named_field(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .filter(|s| !s.is_empty())
        .unwrap_or("config")
        .to_string()
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            field_error(&named_field(&msg), e.to_string().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| field_error("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Range checks that do not depend on which command runs.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        for (name, v) in [
            ("model.m1", m.m1),
            ("model.m2", m.m2),
            ("model.p1", m.p1),
            ("model.p2", m.p2),
        ] {
            if v == 0 {
                return Err(field_error(name, "must be >= 1"));
            }
        }
        if m.m1 < 2 && m.m2 < 2 {
            return Err(field_error("model.m1", "m1 or m2 must be >= 2"));
        }
        let p = m.p1 * m.p2;
        let c = &self.coeff;
        if c.kind != CoeffType::General && !(1..=p).contains(&c.s) {
            return Err(field_error("coeff.s", format!("must lie in 1..={p}")));
        }
        if !(c.sigma_a.is_finite() && c.sigma_a > 0.0) {
            return Err(field_error("coeff.sigma_a", "must be positive"));
        }
        if !(self.noise.sigma.is_finite() && self.noise.sigma >= 0.0) {
            return Err(field_error("noise.sigma", "must be finite and >= 0"));
        }
        let k = &self.packing;
        if !(k.t > 0.0 && k.t < 1.0) {
            return Err(field_error("packing.t", "must lie in (0, 1)"));
        }
        if !(k.c1 > 0.0 && k.c1.is_finite()) {
            return Err(field_error("packing.c1", "must be positive"));
        }
        if !(k.r > 0.0 && k.r.is_finite()) {
            return Err(field_error("packing.r", "must be positive"));
        }
        if let Some(e) = k.eps_prime {
            if !(e > 0.0 && e.is_finite()) {
                return Err(field_error("packing.eps_prime", "must be positive"));
            }
        }
        if let Some(a) = k.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(field_error("packing.alpha", "must be positive"));
            }
        }
        if k.l_target.is_some_and(|l| l < 2) {
            return Err(field_error("packing.L_target", "must be >= 2"));
        }
        let x = &self.experiment;
        if x.trials == 0 {
            return Err(field_error("experiment.trials", "must be >= 1"));
        }
        if x.n_grid.is_empty() || x.n_grid[0] == 0 || x.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_error(
                "experiment.N_grid",
                "must be a nonempty, strictly increasing list of positive integers",
            ));
        }
        if x.side_info == SideInfo::SupportOnly && c.kind != CoeffType::SparseGaussian {
            return Err(field_error(
                "experiment.side_info",
                "support_only needs coeff.type = \"sparse_gaussian\"",
            ));
        }
        let b = &self.bound;
        if b.n_grid.is_empty()
            || b.n_grid.iter().any(|n| !(n.is_finite() && *n > 0.0))
            || b.n_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(field_error(
                "bound.N_grid",
                "must be a nonempty, strictly increasing list of positive numbers",
            ));
        }
        if self.rip.s == 0 {
            return Err(field_error("rip.s", "must be >= 1"));
        }
        if !(self.rip.threshold >= 0.0 && self.rip.threshold.is_finite()) {
            return Err(field_error("rip.threshold", "must be finite and >= 0"));
        }
        if self.output.formats.is_empty() {
            return Err(field_error(
                "output.formats",
                "must list at least one format",
            ));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.model.m1, self.model.m2, self.model.p1, self.model.p2)
    }

    pub fn p(&self) -> usize {
        self.model.p1 * self.model.p2
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn coefficient_model(&self) -> CoefficientModel {
        let c = &self.coeff;
        match c.kind {
            CoeffType::General => CoefficientModel::General {
                covariance: Matrix::identity(self.p(), self.p()) * (c.sigma_a * c.sigma_a),
            },
            CoeffType::SparseUniform => CoefficientModel::SparseUniform {
                s: c.s,
                sigma_a: c.sigma_a,
                law: c.law,
            },
            CoeffType::SparseGaussian => CoefficientModel::sparse_gaussian(c.s, c.sigma_a),
        }
    }

    pub fn ensemble_mode(&self) -> EnsembleMode {
        match self.coeff.kind {
            CoeffType::General => EnsembleMode::General,
            _ => EnsembleMode::Sparse { s: self.coeff.s },
        }
    }

    /// Packing parameters with `eps_prime` defaulted to half its cap.
    pub fn packing_params(&self) -> PackingParams {
        let k = &self.packing;
        let eps_prime = k
            .eps_prime
            .unwrap_or_else(|| 0.5 * PackingParams::eps_cap(self.ensemble_mode(), k.r, self.p()));
        PackingParams {
            t: k.t,
            c1: k.c1,
            alpha: k.alpha,
            eps_prime,
            r: k.r,
            l_target: k.l_target,
        }
    }

    /// Theorem inputs at sample count `n`. Sparsity is reported as 1 for the
    /// general coefficient model, where it does not enter.
    pub fn bound_inputs(&self, n: f64) -> BoundInputs {
        let (m1, m2, p1, p2) = self.dims();
        let model = self.coefficient_model();
        BoundInputs {
            n,
            m1,
            m2,
            p1,
            p2,
            r: self.packing.r,
            sigma: self.noise.sigma,
            sigma_a: self.coeff.sigma_a,
            s: model.sparsity().unwrap_or(1),
            sigma_x_spectral: model.covariance_spectral_norm(self.p()),
            t: self.packing.t,
            c1: self.packing.c1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = "model.m1 = 4\nmodel.m2 = 4\nmodel.p1 = 8\nmodel.p2 = 8\n";

    #[test]
    fn flat_dotted_keys_and_defaults() {
        let cfg = RunConfig::from_toml_str(DESK).unwrap();
        assert_eq!(cfg.dims(), (4, 4, 8, 8));
        assert_eq!(cfg.coeff, CoeffBlock::default());
        assert_eq!(cfg.experiment.n_grid, vec![1, 5, 25, 125]);
        let params = cfg.packing_params();
        assert_eq!(params.eps_prime, 1.0 / 512.0);
    }

    #[test]
    fn tables_parse_the_same() {
        let text = "[model]\nm1 = 4\nm2 = 4\np1 = 8\np2 = 8\n[coeff]\ntype = \"general\"\n\
                    sigma_a = 2.0\n[packing]\nL_target = 3\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.coeff.kind, CoeffType::General);
        assert_eq!(cfg.packing.l_target, Some(3));
        assert_eq!(cfg.bound_inputs(10.0).sigma_x_spectral, 4.0);
        assert_eq!(cfg.ensemble_mode(), EnsembleMode::General);
    }

    fn field_of(text: &str) -> String {
        match RunConfig::from_toml_str(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of("model.m1 = 4\nmodel.m2 = 4\nmodel.p1 = 8\n"), "p2");
        assert_eq!(field_of(&format!("{DESK}packing.bogus = 1\n")), "bogus");
        assert_eq!(field_of(&format!("{DESK}packing.t = 1.5\n")), "packing.t");
        assert_eq!(field_of(&format!("{DESK}coeff.s = 65\n")), "coeff.s");
        assert_eq!(
            field_of(&format!("{DESK}experiment.N_grid = [5, 5]\n")),
            "experiment.N_grid"
        );
        assert_eq!(
            field_of(&format!(
                "{DESK}coeff.type = \"general\"\nexperiment.side_info = \"support_only\"\n"
            )),
            "experiment.side_info"
        );
    }
}

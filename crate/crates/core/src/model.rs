//! Generative model `Y = D X + N` with a Kronecker-structured dictionary
//! `D = A ⊗ B`, the three coefficient laws and white Gaussian noise.

use std::path::Path;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{self, IndexMultiset, Matrix};

/// Tolerance on column norms of a dictionary.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// `D = A ⊗ B` with unit-norm columns in every factor.
#[derive(Debug, Clone, PartialEq)]
pub struct KsDictionary {
    a: Matrix,
    b: Matrix,
    d: Matrix,
}

impl KsDictionary {
    /// Fails if any column of `a` or `b` is off unit norm by more than
    /// [`UNIT_NORM_TOL`].
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        linalg::check_finite(&a)?;
        linalg::check_finite(&b)?;
        for m in [&a, &b] {
            for (j, col) in m.column_iter().enumerate() {
                let n = col.norm();
                if (n - 1.0).abs() > UNIT_NORM_TOL {
                    return Err(Error::NonUnitColumn { column: j, norm: n });
                }
            }
        }
        let d = linalg::kron(&a, &b);
        Ok(Self { a, b, d })
    }

    /// Skips the unit-norm check. For loading or inspecting dictionaries that
    /// are about to be verified.
    pub fn from_factors_unchecked(a: Matrix, b: Matrix) -> Self {
        let d = linalg::kron(&a, &b);
        Self { a, b, d }
    }

    /// Coordinate factors with i.i.d. Gaussian entries, columns normalized.
    pub fn random<R: Rng + ?Sized>(
        m1: usize,
        p1: usize,
        m2: usize,
        p2: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut gaussian = |r, c| {
            let g = Matrix::from_fn(r, c, |_, _| StandardNormal.sample(rng));
            linalg::normalize_columns(&g)
        };
        let a = gaussian(m1, p1)?;
        let b = gaussian(m2, p2)?;
        Self::new(a, b)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }
    /// `(m1, m2, p1, p2)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.a.nrows(),
            self.b.nrows(),
            self.a.ncols(),
            self.b.ncols(),
        )
    }
    pub fn m(&self) -> usize {
        self.d.nrows()
    }
    pub fn p(&self) -> usize {
        self.d.ncols()
    }

    /// Subdictionary on a merged support, built from factor selections via
    /// the Khatri-Rao product rather than by slicing `D`.
    pub fn subdictionary(&self, support: &IndexMultiset) -> Result<Matrix> {
        let (_, _, p1, p2) = self.dims();
        let (sa, sb) = linalg::split_indices(support, p1, p2)?;
        let a = linalg::select_columns(&self.a, &sa)?;
        let b = linalg::select_columns(&self.b, &sb)?;
        linalg::khatri_rao(&a, &b)
    }
}

/// Distribution of nonzero entries for [`CoefficientModel::SparseUniform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonzeroLaw {
    /// `σa · (±1)` with equal probability.
    #[default]
    Rademacher,
    /// Uniform on `[-√3 σa, √3 σa]`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientModel {
    /// Zero-mean vectors with the given covariance.
    General { covariance: Matrix },
    /// Uniformly random `s`-support, i.i.d. nonzeros of variance `σa²`.
    SparseUniform {
        s: usize,
        sigma_a: f64,
        law: NonzeroLaw,
    },
    /// Uniformly random `s`-support, nonzeros `N(0, σa² I_s)`.
    SparseGaussian { s: usize, sigma_a: f64 },
}

impl CoefficientModel {
    pub fn sparse_uniform(s: usize, sigma_a: f64) -> Self {
        Self::SparseUniform {
            s,
            sigma_a,
            law: NonzeroLaw::Rademacher,
        }
    }

    pub fn sparse_gaussian(s: usize, sigma_a: f64) -> Self {
        Self::SparseGaussian { s, sigma_a }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            Self::General { covariance } => {
                if covariance.shape() != (p, p) {
                    return Err(Error::DimensionMismatch {
                        op: "covariance",
                        left: covariance.shape(),
                        right: (p, p),
                    });
                }
                psd_sqrt(covariance).map(|_| ())
            }
            Self::SparseUniform { s, sigma_a, .. } | Self::SparseGaussian { s, sigma_a } => {
                if *s == 0 || *s > p {
                    return Err(Error::InvalidParameter(format!(
                        "sparsity s = {s} must satisfy 1 <= s <= p = {p}"
                    )));
                }
                if !(sigma_a.is_finite() && *sigma_a >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sigma_a = {sigma_a} must be finite and nonnegative"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn sparsity(&self) -> Option<usize> {
        match self {
            Self::General { .. } => None,
            Self::SparseUniform { s, .. } | Self::SparseGaussian { s, .. } => Some(*s),
        }
    }

    pub fn sigma_a(&self) -> Option<f64> {
        match self {
            Self::General { .. } => None,
            Self::SparseUniform { sigma_a, .. } | Self::SparseGaussian { sigma_a, .. } => {
                Some(*sigma_a)
            }
        }
    }

    /// Covariance of the coefficient vector; `(s/p) σa² I` for the sparse laws.
    pub fn covariance(&self, p: usize) -> Matrix {
        match self {
            Self::General { covariance } => covariance.clone(),
            Self::SparseUniform { s, sigma_a, .. } | Self::SparseGaussian { s, sigma_a } => {
                Matrix::identity(p, p) * (*s as f64 / p as f64 * sigma_a * sigma_a)
            }
        }
    }

    /// `‖Σx‖₂`.
    pub fn covariance_spectral_norm(&self, p: usize) -> f64 {
        match self {
            Self::General { covariance } => linalg::spectral_norm(covariance),
            Self::SparseUniform { s, sigma_a, .. } | Self::SparseGaussian { s, sigma_a } => {
                *s as f64 / p as f64 * sigma_a * sigma_a
            }
        }
    }
}

/// Symmetric PSD square root. Eigenvalues down to `-1e-12·λmax` are treated as
/// round-off and clamped to zero.
pub fn psd_sqrt(sigma: &Matrix) -> Result<Matrix> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::DimensionMismatch {
            op: "psd_sqrt",
            left: sigma.shape(),
            right: (sigma.ncols(), sigma.ncols()),
        });
    }
    linalg::check_finite(sigma)?;
    let asym = (sigma - sigma.transpose()).abs().max();
    let scale = sigma.abs().max().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::InvalidParameter(
            "covariance is not symmetric".into(),
        ));
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let top = eig.eigenvalues.max().max(0.0);
    let low = eig.eigenvalues.min();
    if low < -1e-12 * top.max(1e-300) && low < 0.0 {
        return Err(Error::NotPositiveSemidefinite(low));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Ok(q * Matrix::from_diagonal(&roots) * q.transpose())
}

/// Uniform `s`-subset of `[p]`, sorted, 1-based.
pub fn sample_support<R: Rng + ?Sized>(p: usize, s: usize, rng: &mut R) -> Result<IndexMultiset> {
    if s == 0 || s > p {
        return Err(Error::InvalidParameter(format!(
            "cannot draw s = {s} distinct indices from p = {p}"
        )));
    }
    let mut idx: Vec<usize> = rand::seq::index::sample(rng, p, s)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    idx.sort_unstable();
    Ok(IndexMultiset::from_unchecked(idx))
}

/// Draws `n` coefficient vectors as the columns of a `p × n` matrix. Supports
/// are returned for the sparse laws and left empty for `General`.
pub fn sample_coefficients<R: Rng + ?Sized>(
    model: &CoefficientModel,
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<(Matrix, Vec<IndexMultiset>)> {
    model.validate(p)?;
    match model {
        CoefficientModel::General { covariance } => {
            let root = psd_sqrt(covariance)?;
            let z = Matrix::from_fn(p, n, |_, _| StandardNormal.sample(rng));
            Ok((root * z, Vec::new()))
        }
        CoefficientModel::SparseUniform { s, sigma_a, law } => {
            let law = *law;
            let sigma_a = *sigma_a;
            sparse_draw(p, *s, n, rng, |rng| match law {
                NonzeroLaw::Rademacher => {
                    if rng.random::<bool>() {
                        sigma_a
                    } else {
                        -sigma_a
                    }
                }
                NonzeroLaw::Uniform => {
                    let h = 3f64.sqrt() * sigma_a;
                    rng.random_range(-1.0..1.0) * h
                }
            })
        }
        CoefficientModel::SparseGaussian { s, sigma_a } => {
            let sigma_a = *sigma_a;
            sparse_draw(p, *s, n, rng, |rng| {
                sigma_a * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            })
        }
    }
}

fn sparse_draw<R: Rng + ?Sized>(
    p: usize,
    s: usize,
    n: usize,
    rng: &mut R,
    mut value: impl FnMut(&mut R) -> f64,
) -> Result<(Matrix, Vec<IndexMultiset>)> {
    let mut x = Matrix::zeros(p, n);
    let mut supports = Vec::with_capacity(n);
    for k in 0..n {
        let support = sample_support(p, s, rng)?;
        for i in support.zero_based() {
            x[(i, k)] = value(rng);
        }
        supports.push(support);
    }
    Ok((x, supports))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Matrix,
    pub x: Matrix,
    pub supports: Vec<IndexMultiset>,
    pub sigma: f64,
    pub seed: Option<u64>,
}

/// `Y = D X + N`, noise i.i.d. `N(0, σ²)` per entry. Coefficients are drawn
/// before the noise.
pub fn synthesize<R: Rng + ?Sized>(
    dict: &KsDictionary,
    model: &CoefficientModel,
    n: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma = {sigma} must be finite and nonnegative"
        )));
    }
    let (x, supports) = sample_coefficients(model, dict.p(), n, rng)?;
    let mut y = dict.d() * &x;
    if sigma > 0.0 {
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(rng);
            *v += sigma * e;
        }
    }
    Ok(Dataset {
        y,
        x,
        supports,
        sigma,
        seed: None,
    })
}

/// [`synthesize`] driven by a ChaCha8 stream seeded with `seed`; the seed is
/// recorded in the dataset.
pub fn synthesize_seeded(
    dict: &KsDictionary,
    model: &CoefficientModel,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = synthesize(dict, model, n, sigma, &mut rng)?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// `E‖Dx‖² / E‖n‖²`. The sparse laws reduce to `s σa² / (m σ²)`; the general
/// law needs the dictionary for `tr(D Σx Dᵀ)`.
pub fn snr(
    model: &CoefficientModel,
    m: usize,
    sigma: f64,
    dict: Option<&KsDictionary>,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter("SNR needs sigma > 0".into()));
    }
    let noise = m as f64 * sigma * sigma;
    match model {
        CoefficientModel::SparseUniform { s, sigma_a, .. }
        | CoefficientModel::SparseGaussian { s, sigma_a } => {
            Ok(*s as f64 * sigma_a * sigma_a / noise)
        }
        CoefficientModel::General { covariance } => {
            let d = dict.ok_or_else(|| {
                Error::InvalidParameter("general-model SNR needs a dictionary".into())
            })?;
            Ok((d.d() * covariance * d.d().transpose()).trace() / noise)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelManifest {
    /// Covariance stored alongside as `sigma_x.csv`.
    General,
    SparseUniform {
        s: usize,
        sigma_a: f64,
        law: NonzeroLaw,
    },
    SparseGaussian {
        s: usize,
        sigma_a: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub schema: String,
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub model: ModelManifest,
}

pub const DATASET_SCHEMA: &str = "kslab-dataset/1";
const SUPPORTS_SCHEMA: &str = "kslab-supports/1";

impl Dataset {
    /// Writes `y.csv`, `x.csv`, `supports.csv`, `manifest.json` (and
    /// `sigma_x.csv` for the general model) into `dir`.
    pub fn save(&self, dir: &Path, model: &CoefficientModel) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        io::write_matrix(&dir.join("y.csv"), &self.y)?;
        io::write_matrix(&dir.join("x.csv"), &self.x)?;
        let s = self.supports.first().map_or(0, |s| s.len());
        let header: Vec<String> = (1..=s).map(|k| format!("i{k}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = io::CsvTable::create(&dir.join("supports.csv"), SUPPORTS_SCHEMA, &header)?;
        for sup in &self.supports {
            t.row(sup.iter().map(|i| i.to_string()))?;
        }
        t.finish()?;
        let model_manifest = match model {
            CoefficientModel::General { covariance } => {
                io::write_matrix(&dir.join("sigma_x.csv"), covariance)?;
                ModelManifest::General
            }
            CoefficientModel::SparseUniform { s, sigma_a, law } => ModelManifest::SparseUniform {
                s: *s,
                sigma_a: *sigma_a,
                law: *law,
            },
            CoefficientModel::SparseGaussian { s, sigma_a } => ModelManifest::SparseGaussian {
                s: *s,
                sigma_a: *sigma_a,
            },
        };
        let manifest = DatasetManifest {
            schema: DATASET_SCHEMA.into(),
            m: self.y.nrows(),
            p: self.x.nrows(),
            n: self.y.ncols(),
            sigma: self.sigma,
            seed: self.seed,
            model: model_manifest,
        };
        io::write_json(&dir.join("manifest.json"), &manifest)
    }

    pub fn load(dir: &Path) -> Result<(Self, CoefficientModel)> {
        let manifest: DatasetManifest = io::read_json(&dir.join("manifest.json"))?;
        let y = io::read_matrix(&dir.join("y.csv"))?;
        let x = io::read_matrix(&dir.join("x.csv"))?;
        if y.shape() != (manifest.m, manifest.n) || x.shape() != (manifest.p, manifest.n) {
            return Err(Error::Malformed {
                path: dir.display().to_string(),
                reason: "matrix shapes disagree with manifest".into(),
            });
        }
        let model = match manifest.model {
            ModelManifest::General => CoefficientModel::General {
                covariance: io::read_matrix(&dir.join("sigma_x.csv"))?,
            },
            ModelManifest::SparseUniform { s, sigma_a, law } => {
                CoefficientModel::SparseUniform { s, sigma_a, law }
            }
            ModelManifest::SparseGaussian { s, sigma_a } => {
                CoefficientModel::SparseGaussian { s, sigma_a }
            }
        };
        let (_, _, rows) = io::read_table(&dir.join("supports.csv"))?;
        let supports = rows
            .into_iter()
            .map(|r| {
                let idx = r
                    .iter()
                    .map(|f| {
                        f.parse::<usize>().map_err(|_| Error::Malformed {
                            path: "supports.csv".into(),
                            reason: format!("bad index {f:?}"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                IndexMultiset::new(idx, manifest.p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            Self {
                y,
                x,
                supports,
                sigma: manifest.sigma,
                seed: manifest.seed,
            },
            model,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_dictionary() {
        let i2 = Matrix::identity(2, 2);
        let d = KsDictionary::new(i2.clone(), i2).unwrap();
        assert_eq!(d.d(), &Matrix::identity(4, 4));
    }

    #[test]
    fn random_dictionary_has_unit_columns_and_index_mapping() {
        let d = KsDictionary::random(4, 8, 4, 8, &mut rng(1)).unwrap();
        assert_eq!(d.d().shape(), (16, 64));
        for col in d.d().column_iter() {
            assert!((col.norm() - 1.0).abs() <= 1e-10);
        }
        for ja in 1..=8 {
            for jb in 1..=8 {
                let k = (ja - 1) * 8 + jb;
                let want = linalg::kron(
                    &d.a().columns(ja - 1, 1).into_owned(),
                    &d.b().columns(jb - 1, 1).into_owned(),
                );
                assert_eq!(d.d().columns(k - 1, 1).into_owned(), want);
            }
        }
    }

    #[test]
    fn non_unit_columns_rejected() {
        let a = Matrix::identity(2, 2) * 2.0;
        assert!(matches!(
            KsDictionary::new(a, Matrix::identity(2, 2)),
            Err(Error::NonUnitColumn { .. })
        ));
    }

    #[test]
    fn full_support_and_errors() {
        let mut r = rng(2);
        for _ in 0..10 {
            assert_eq!(
                sample_support(5, 5, &mut r).unwrap().as_slice(),
                &[1, 2, 3, 4, 5]
            );
        }
        assert!(sample_support(3, 4, &mut r).is_err());
        assert!(sample_support(3, 0, &mut r).is_err());
    }

    #[test]
    fn support_frequencies_are_uniform() {
        // p = 4, s = 2 has 6 subsets; each should appear 1/6 of the time.
        let mut r = rng(3);
        let draws = 60_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            *counts
                .entry(sample_support(4, 2, &mut r).unwrap().into_vec())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (k, c) in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.01, "{k:?}: {f}");
        }
    }

    #[test]
    fn singleton_inclusion_is_uniform() {
        let mut r = rng(4);
        let p = 5;
        let mut counts = vec![0usize; p];
        let draws = 50_000;
        for _ in 0..draws {
            counts[sample_support(p, 1, &mut r).unwrap()[0] - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.2).abs() < 0.01);
        }
    }

    fn empirical_covariance(x: &Matrix) -> Matrix {
        x * x.transpose() / x.ncols() as f64
    }

    #[test]
    fn sparse_gaussian_covariance() {
        let model = CoefficientModel::sparse_gaussian(2, 1.0);
        let (x, supports) = sample_coefficients(&model, 8, 100_000, &mut rng(5)).unwrap();
        let c = empirical_covariance(&x);
        let want = Matrix::identity(8, 8) * 0.25;
        assert!((c - want).abs().max() <= 0.02);
        for (k, s) in supports.iter().enumerate() {
            let nz: Vec<usize> = (0..8)
                .filter(|&i| x[(i, k)] != 0.0)
                .map(|i| i + 1)
                .collect();
            assert_eq!(nz.as_slice(), s.as_slice());
        }
    }

    #[test]
    fn sparse_uniform_covariance_both_laws() {
        for law in [NonzeroLaw::Rademacher, NonzeroLaw::Uniform] {
            let model = CoefficientModel::SparseUniform {
                s: 3,
                sigma_a: 2.0,
                law,
            };
            let (x, _) = sample_coefficients(&model, 6, 100_000, &mut rng(6)).unwrap();
            let want = Matrix::identity(6, 6) * (3.0 / 6.0 * 4.0);
            assert!(
                (empirical_covariance(&x) - want).abs().max() <= 0.05,
                "{law:?}"
            );
        }
        let model = CoefficientModel::sparse_uniform(2, 1.5);
        let (x, _) = sample_coefficients(&model, 5, 100, &mut rng(7)).unwrap();
        assert!(x.iter().all(|&v| v == 0.0 || (v.abs() - 1.5).abs() < 1e-15));
    }

    #[test]
    fn general_identity_covariance() {
        let model = CoefficientModel::General {
            covariance: Matrix::identity(4, 4),
        };
        let (x, supports) = sample_coefficients(&model, 4, 100_000, &mut rng(8)).unwrap();
        assert!(supports.is_empty());
        assert!(
            (empirical_covariance(&x) - Matrix::identity(4, 4))
                .abs()
                .max()
                <= 0.02
        );
    }

    #[test]
    fn general_colored_covariance() {
        let cov = nalgebra::dmatrix![2.0, 0.5, 0.0; 0.5, 1.0, 0.3; 0.0, 0.3, 0.5];
        let root = psd_sqrt(&cov).unwrap();
        assert!((&root * &root - &cov).abs().max() < 1e-12);
        assert!((&root - root.transpose()).abs().max() < 1e-12);
        let model = CoefficientModel::General {
            covariance: cov.clone(),
        };
        let (x, _) = sample_coefficients(&model, 3, 100_000, &mut rng(9)).unwrap();
        assert!((empirical_covariance(&x) - cov).abs().max() <= 0.03);
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let bad = nalgebra::dmatrix![1.0, 2.0; 2.0, 1.0];
        let model = CoefficientModel::General { covariance: bad };
        assert!(matches!(
            sample_coefficients(&model, 2, 3, &mut rng(0)),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn zero_sigma_a_gives_zero_coefficients() {
        for model in [
            CoefficientModel::sparse_gaussian(2, 0.0),
            CoefficientModel::sparse_uniform(2, 0.0),
            CoefficientModel::General {
                covariance: Matrix::zeros(4, 4),
            },
        ] {
            let (x, _) = sample_coefficients(&model, 4, 50, &mut rng(10)).unwrap();
            assert!(x.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn synthesize_noiseless_and_pure_noise() {
        let d = KsDictionary::random(2, 3, 3, 2, &mut rng(11)).unwrap();
        let model = CoefficientModel::sparse_gaussian(2, 1.0);
        let ds = synthesize(&d, &model, 20, 0.0, &mut rng(12)).unwrap();
        assert_eq!(ds.y, d.d() * &ds.x);

        let zero = CoefficientModel::sparse_gaussian(1, 0.0);
        let n = 100_000 / d.m() + 1;
        let ds = synthesize(&d, &zero, n, 1.0, &mut rng(13)).unwrap();
        let count = ds.y.len() as f64;
        let mean = ds.y.sum() / count;
        let var = ds.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        assert!((var - 1.0).abs() <= 0.02, "{var}");
        assert!(synthesize(&d, &zero, 1, -1.0, &mut rng(0)).is_err());
    }

    #[test]
    fn synthesize_is_deterministic() {
        let d = KsDictionary::random(3, 4, 2, 5, &mut rng(14)).unwrap();
        let model = CoefficientModel::sparse_uniform(3, 0.7);
        let a = synthesize_seeded(&d, &model, 40, 0.3, 99).unwrap();
        let b = synthesize_seeded(&d, &model, 40, 0.3, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, Some(99));
    }

    #[test]
    fn snr_formulas() {
        let m = CoefficientModel::sparse_uniform(4, 1.0);
        assert_eq!(snr(&m, 16, 0.5, None).unwrap(), 1.0);
        let m = CoefficientModel::sparse_gaussian(1, 0.3);
        assert!((snr(&m, 1, 0.3, None).unwrap() - 1.0).abs() < 1e-15);
        assert!(snr(&m, 1, 0.0, None).is_err());
        let g = CoefficientModel::General {
            covariance: Matrix::identity(4, 4),
        };
        assert!(snr(&g, 4, 1.0, None).is_err());
    }

    #[test]
    fn general_snr_matches_monte_carlo() {
        // Orthonormal D with m = p: tr(D Dᵀ)/(m σ²) = p/(m σ²).
        let i2 = Matrix::identity(2, 2);
        let d = KsDictionary::new(i2.clone(), i2).unwrap();
        let model = CoefficientModel::General {
            covariance: Matrix::identity(4, 4),
        };
        let sigma = 0.5;
        let analytic = snr(&model, 4, sigma, Some(&d)).unwrap();
        assert!((analytic - 4.0).abs() < 1e-12);
        let n = 100_000;
        let ds = synthesize(&d, &model, n, sigma, &mut rng(15)).unwrap();
        let signal = (d.d() * &ds.x).norm_squared() / n as f64;
        let noise = (&ds.y - d.d() * &ds.x).norm_squared() / n as f64;
        assert!((signal / noise / analytic - 1.0).abs() <= 0.02);
    }

    #[test]
    fn subdictionary_matches_column_selection() {
        let d = KsDictionary::random(3, 3, 4, 6, &mut rng(16)).unwrap();
        let support = IndexMultiset::new(vec![3, 7, 10, 17], 18).unwrap();
        let direct = linalg::select_columns(d.d(), &support).unwrap();
        let kr = d.subdictionary(&support).unwrap();
        assert!((direct - kr).abs().max() <= 1e-12);
    }

    #[test]
    fn dataset_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let d = KsDictionary::random(2, 3, 2, 3, &mut rng(17)).unwrap();
        for model in [
            CoefficientModel::sparse_gaussian(2, 1.0),
            CoefficientModel::General {
                covariance: Matrix::identity(9, 9) * 0.5,
            },
        ] {
            let ds = synthesize_seeded(&d, &model, 7, 0.2, 5).unwrap();
            ds.save(dir.path(), &model).unwrap();
            let (back, back_model) = Dataset::load(dir.path()).unwrap();
            assert_eq!(back, ds);
            assert_eq!(back_model, model);
        }
    }
}

//! Structured dense kernels: Kronecker, Khatri-Rao and Hadamard products,
//! column-major vectorization, factor/merged index mapping and the norms
//! used to measure dictionary distances.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; its storage is column-major, so
//! [`vec`] is exactly the column-stacking operator under which
//! `vec(B X Aᵀ) = (A ⊗ B) vec(X)` holds for the standard Kronecker product.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative tolerance of the power iteration in [`spectral_norm`].
pub const SPECTRAL_TOL: f64 = 1e-10;
const SPECTRAL_MAX_ITERS: usize = 10_000;

/// Ordered list of 1-based column indices. Repetitions are allowed, which is
/// what the factor-level supports of a Kronecker dictionary look like.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexMultiset(Vec<usize>);

impl IndexMultiset {
    /// Builds a multiset, checking every entry lies in `1..=max`.
    pub fn new(entries: Vec<usize>, max: usize) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|&&i| i == 0 || i > max) {
            return Err(Error::IndexOutOfRange { index: bad, max });
        }
        Ok(Self(entries))
    }

    pub(crate) fn from_unchecked(entries: Vec<usize>) -> Self {
        Self(entries)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Zero-based column positions, for indexing into matrices.
    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|i| i - 1)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl std::ops::Deref for IndexMultiset {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Checks every entry is finite; the `Matrix` invariant.
pub fn check_finite(a: &Matrix) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "matrix has non-finite entries".into(),
        ))
    }
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (m1, p1) = a.shape();
    let (m2, p2) = b.shape();
    let mut out = Matrix::zeros(m1 * m2, p1 * p2);
    for j in 0..p1 {
        for i in 0..m1 {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for jb in 0..p2 {
                for ib in 0..m2 {
                    out[(i * m2 + ib, j * p2 + jb)] = aij * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Column-wise Kronecker product of two matrices with the same column count.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            op: "khatri_rao",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (m1, n) = a.shape();
    let m2 = b.nrows();
    let mut out = Matrix::zeros(m1 * m2, n);
    for j in 0..n {
        for i in 0..m1 {
            let aij = a[(i, j)];
            for ib in 0..m2 {
                out[(i * m2 + ib, j)] = aij * b[(ib, j)];
            }
        }
    }
    Ok(out)
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op: "hadamard",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(a.component_mul(b))
}

pub fn sum_entries(a: &Matrix) -> f64 {
    a.iter().sum()
}

/// Column-stacking vectorization.
pub fn vec(x: &Matrix) -> Matrix {
    Matrix::from_column_slice(x.len(), 1, x.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(x: &Matrix, rows: usize, cols: usize) -> Result<Matrix> {
    if x.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            got: x.len(),
        });
    }
    Ok(Matrix::from_column_slice(rows, cols, x.as_slice()))
}

/// Merges factor-level indices into indices of `A ⊗ B`:
/// `i'' = (i - 1) p2 + i'`, all 1-based.
pub fn merge_indices(
    ia: &IndexMultiset,
    ib: &IndexMultiset,
    p1: usize,
    p2: usize,
) -> Result<IndexMultiset> {
    if ia.len() != ib.len() {
        return Err(Error::LengthMismatch {
            expected: ia.len(),
            got: ib.len(),
        });
    }
    let mut out = Vec::with_capacity(ia.len());
    for (&i, &j) in ia.iter().zip(ib.iter()) {
        if i == 0 || i > p1 {
            return Err(Error::IndexOutOfRange { index: i, max: p1 });
        }
        if j == 0 || j > p2 {
            return Err(Error::IndexOutOfRange { index: j, max: p2 });
        }
        out.push((i - 1) * p2 + j);
    }
    Ok(IndexMultiset(out))
}

/// Inverse of [`merge_indices`].
pub fn split_indices(
    merged: &IndexMultiset,
    p1: usize,
    p2: usize,
) -> Result<(IndexMultiset, IndexMultiset)> {
    let max = p1 * p2;
    let mut ia = Vec::with_capacity(merged.len());
    let mut ib = Vec::with_capacity(merged.len());
    for &k in merged.iter() {
        if k == 0 || k > max {
            return Err(Error::IndexOutOfRange { index: k, max });
        }
        ia.push((k - 1) / p2 + 1);
        ib.push((k - 1) % p2 + 1);
    }
    Ok((IndexMultiset(ia), IndexMultiset(ib)))
}

/// Columns of `a` listed by the multiset, in order, repeats included.
pub fn select_columns(a: &Matrix, idx: &IndexMultiset) -> Result<Matrix> {
    let p = a.ncols();
    let cols: Vec<usize> = idx
        .iter()
        .map(|&i| {
            if i == 0 || i > p {
                Err(Error::IndexOutOfRange { index: i, max: p })
            } else {
                Ok(i - 1)
            }
        })
        .collect::<Result<_>>()?;
    Ok(a.select_columns(cols.iter()))
}

pub fn fro_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    Ok(fro_distance_sq(a, b)?.sqrt())
}

pub fn fro_distance_sq(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op: "fro_distance",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Largest singular value.
///
/// Diagonal matrices and matrices with a 2×2 Gram are handled in closed form;
/// everything else goes through power iteration on `AᵀA` until the
/// Rayleigh quotient moves by less than [`SPECTRAL_TOL`] relative.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if is_diagonal(a) {
        let k = a.nrows().min(a.ncols());
        return (0..k).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    }
    let gram = if a.ncols() <= a.nrows() {
        a.transpose() * a
    } else {
        a * a.transpose()
    };
    if gram.nrows() == 1 {
        return gram[(0, 0)].sqrt();
    }
    if gram.nrows() == 2 {
        let (p, q, r) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 1)]);
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        return (mean + rad).max(0.0).sqrt();
    }
    power_iteration(&gram).sqrt()
}

fn is_diagonal(a: &Matrix) -> bool {
    a.iter()
        .enumerate()
        .all(|(k, &v)| v == 0.0 || k % a.nrows() == k / a.nrows())
}

// Largest eigenvalue of a symmetric PSD matrix.
fn power_iteration(g: &Matrix) -> f64 {
    let n = g.nrows();
    // Start away from any particular eigenvector.
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sqrt());
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..SPECTRAL_MAX_ITERS {
        let w = g * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= SPECTRAL_TOL * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Scales every column to unit ℓ2 norm.
pub fn normalize_columns(a: &Matrix) -> Result<Matrix> {
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        col /= n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn kron_identity() {
        let i2 = Matrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), Matrix::identity(4, 4));
    }

    #[test]
    fn kron_by_hand() {
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        let b = dmatrix![0.0, 1.0; 1.0, 0.0];
        let want = dmatrix![
            0.0, 1.0, 0.0, 2.0;
            1.0, 0.0, 2.0, 0.0;
            0.0, 3.0, 0.0, 4.0;
            3.0, 0.0, 4.0, 0.0
        ];
        assert_eq!(kron(&a, &b), want);
    }

    #[test]
    fn khatri_rao_cases() {
        let a = dmatrix![1.0; 2.0];
        let b = dmatrix![3.0; 4.0];
        assert_eq!(khatri_rao(&a, &b).unwrap(), dmatrix![3.0; 4.0; 6.0; 8.0]);
        assert_eq!(khatri_rao(&a, &b).unwrap(), kron(&a, &b));
        let c = Matrix::zeros(2, 3);
        assert!(matches!(
            khatri_rao(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hadamard_and_sum() {
        let a = dmatrix![1.0, -1.0; 1.0, 1.0];
        let b = dmatrix![1.0, 1.0; -1.0, 1.0];
        assert_eq!(sum_entries(&hadamard(&a, &b).unwrap()), 0.0);
        let ones = Matrix::from_element(2, 2, 1.0);
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        let alpha = 0.3;
        let s = dmatrix![alpha, -alpha, alpha; -alpha, -alpha, alpha];
        let got = sum_entries(&hadamard(&s, &s).unwrap());
        assert!((got - alpha * alpha * 6.0).abs() < 1e-15);
        assert!(hadamard(&a, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn vec_conventions() {
        let x = dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0];
        let v = vec(&x);
        assert_eq!(v.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(unvec(&v, 2, 3).unwrap(), x);
        let one = dmatrix![7.0];
        assert_eq!(vec(&one), one);
        assert!(matches!(unvec(&v, 4, 2), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn figure_index_mapping() {
        let ia = IndexMultiset::new(vec![1, 2, 2, 3], 3).unwrap();
        let ib = IndexMultiset::new(vec![3, 1, 4, 5], 6).unwrap();
        let merged = merge_indices(&ia, &ib, 3, 6).unwrap();
        assert_eq!(merged.as_slice(), &[3, 7, 10, 17]);
        let (sa, sb) = split_indices(&merged, 3, 6).unwrap();
        assert_eq!((sa, sb), (ia, ib));

        let one = IndexMultiset::new(vec![1], 1).unwrap();
        assert_eq!(merge_indices(&one, &one, 1, 1).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn index_range_errors() {
        assert!(IndexMultiset::new(vec![0], 3).is_err());
        assert!(IndexMultiset::new(vec![4], 3).is_err());
        let ia = IndexMultiset::from_unchecked(vec![4]);
        let ib = IndexMultiset::from_unchecked(vec![1]);
        assert!(matches!(
            merge_indices(&ia, &ib, 3, 6),
            Err(Error::IndexOutOfRange { index: 4, max: 3 })
        ));
        let long = IndexMultiset::from_unchecked(vec![1, 2]);
        assert!(merge_indices(&long, &ib, 3, 6).is_err());
        assert!(split_indices(&IndexMultiset::from_unchecked(vec![19]), 3, 6).is_err());
    }

    #[test]
    fn norms() {
        let a = dmatrix![3.0, 0.0; 0.0, 4.0];
        assert_eq!(spectral_norm(&a), 4.0);
        assert_eq!(fro_distance(&a, &Matrix::zeros(2, 2)).unwrap(), 5.0);
        assert_eq!(fro_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(spectral_norm(&Matrix::identity(5, 5)), 1.0);
        assert!(fro_distance(&a, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let a = Matrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f64 * 0.37).sin());
        let svd = a.clone().svd(false, false);
        let want = svd.singular_values.max();
        let got = spectral_norm(&a);
        assert!((got - want).abs() <= 1e-8 * want, "{got} vs {want}");
        let two = dmatrix![1.0, 2.0; 0.5, -1.0; 3.0, 0.25];
        let want2 = two.clone().svd(false, false).singular_values.max();
        assert!((spectral_norm(&two) - want2).abs() < 1e-12);
    }

    #[test]
    fn normalize() {
        let a = dmatrix![3.0, 0.0; 4.0, 2.0];
        let n = normalize_columns(&a).unwrap();
        assert_eq!(n, dmatrix![0.6, 0.0; 0.8, 1.0]);
        let z = dmatrix![1.0, 0.0; 1.0, 0.0];
        assert!(matches!(normalize_columns(&z), Err(Error::ZeroColumn(1))));
    }
}

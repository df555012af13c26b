//! Dense real linear algebra: symmetric eigensolver, canonical orthogonalization,
//! matrix square roots and a general einsum contraction.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayD, IxDyn};

pub mod einsum;
pub use einsum::contract;

/// Row-major real tensor of arbitrary rank.
pub type DenseTensor = ArrayD<f64>;

#[derive(Debug, Clone)]
pub struct SymEigResult {
    /// Ascending.
    pub eigenvalues: Array1<f64>,
    /// Columns are eigenvectors.
    pub eigenvectors: Array2<f64>,
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut d = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            d = d.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    d
}

fn to_na(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    let (r, c) = a.dim();
    nalgebra::DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

fn from_na(m: &nalgebra::DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

pub fn sym_eig(a: &Array2<f64>) -> Result<SymEigResult> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch(format!("sym_eig on {}x{}", n, a.ncols())));
    }
    if n == 0 {
        return Ok(SymEigResult { eigenvalues: Array1::zeros(0), eigenvectors: Array2::zeros((0, 0)) });
    }
    let scale = max_abs(a).max(1.0);
    let asym = max_asymmetry(a);
    if asym > 1e-10 * scale {
        return Err(Error::NonSymmetric(asym));
    }
    let sym = (a + &a.t()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(to_na(&sym), 1e-15, 100_000)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vecs = from_na(&eig.eigenvectors);
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        values[k] = eig.eigenvalues[i];
        vectors.column_mut(k).assign(&vecs.column(i));
    }
    Ok(SymEigResult { eigenvalues: values, eigenvectors: vectors })
}

#[derive(Debug, Clone)]
pub struct CanonicalOrtho {
    pub n_half: Array2<f64>,
    pub n_inv_half: Array2<f64>,
    pub kept: usize,
}

/// Discards eigenpairs of `n` below `threshold`. Columns of the returned
/// factors span the kept subspace.
pub fn canonical_orthogonalization(n: &Array2<f64>, threshold: f64) -> Result<CanonicalOrtho> {
    if !(threshold > 0.0) {
        return Err(Error::Config(format!("orthogonalization threshold {threshold} must be positive")));
    }
    let eig = sym_eig(n)?;
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] >= threshold).collect();
    if keep.is_empty() {
        return Err(Error::AllModesDiscarded);
    }
    let dim = n.nrows();
    let mut half = Array2::zeros((dim, keep.len()));
    let mut inv_half = Array2::zeros((dim, keep.len()));
    for (k, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        let v = eig.eigenvectors.column(i);
        half.column_mut(k).assign(&(&v * s));
        inv_half.column_mut(k).assign(&(&v / s));
    }
    Ok(CanonicalOrtho { n_half: half, n_inv_half: inv_half, kept: keep.len() })
}

/// Square root and inverse square root from a spectral decomposition.
/// Eigenvalues below `-neg_tol` are rejected, the rest are raised to at least `floor`.
pub fn sqrt_pair_clamped(a: &Array2<f64>, neg_tol: f64, floor: f64) -> Result<(Array2<f64>, Array2<f64>)> {
    let eig = sym_eig(a)?;
    let n = a.nrows();
    let mut half = Array2::zeros((n, n));
    let mut inv_half = Array2::zeros((n, n));
    for i in 0..n {
        let mut l = eig.eigenvalues[i];
        if l < -neg_tol {
            return Err(Error::NotPositiveDefinite(l));
        }
        if l < floor {
            l = floor;
        }
        let v = eig.eigenvectors.column(i);
        let (s, si) = if l > 0.0 { (l.sqrt(), 1.0 / l.sqrt()) } else { (0.0, 0.0) };
        for r in 0..n {
            for c in 0..n {
                let vv = v[r] * v[c];
                half[[r, c]] += s * vv;
                inv_half[[r, c]] += si * vv;
            }
        }
    }
    Ok((half, inv_half))
}

/// `(A^{1/2}, A^{-1/2})`. Eigenvalues in `(-tol_psd, 0)` with
/// `tol_psd = 1e-10 * max|A|` are clamped to zero; the inverse root is then a pseudo-inverse.
pub fn matrix_sqrt_pair(a: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    let tol = 1e-10 * max_abs(a);
    sqrt_pair_clamped(a, tol, 0.0)
}

/// Matrix exponential of a square matrix.
pub fn expm(a: &Array2<f64>) -> Array2<f64> {
    from_na(&to_na(a).exp())
}

pub fn identity(n: usize) -> Array2<f64> {
    Array2::eye(n)
}

pub fn tensor4(shape: [usize; 4], data: Vec<f64>) -> ndarray::Array4<f64> {
    ndarray::Array4::from_shape_vec(shape, data).expect("tensor4 shape")
}

pub fn into_dyn2(a: Array2<f64>) -> DenseTensor {
    a.into_dyn()
}

pub fn from_dyn2(t: DenseTensor) -> Result<Array2<f64>> {
    t.into_dimensionality::<ndarray::Ix2>()
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

pub fn from_dyn4(t: DenseTensor) -> Result<ndarray::Array4<f64>> {
    t.into_dimensionality::<ndarray::Ix4>()
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

pub fn scalar_of(t: &DenseTensor) -> f64 {
    if t.ndim() == 0 {
        t[IxDyn(&[])]
    } else {
        t.sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_eigenvalues() {
        let r = sym_eig(&Array2::eye(3)).unwrap();
        for v in r.eigenvalues.iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_eigenpairs() {
        let r = sym_eig(&array![[2.0, 0.0], [0.0, -1.0]]).unwrap();
        assert!((r.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-14);
        assert!((r.eigenvectors[[1, 0]].abs() - 1.0).abs() < 1e-14);
        assert!((r.eigenvectors[[0, 1]].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        assert!(matches!(sym_eig(&array![[1.0, 0.5], [0.0, 1.0]]), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn ortho_identity_and_discard() {
        let c = canonical_orthogonalization(&Array2::eye(4), 1e-5).unwrap();
        assert_eq!(c.kept, 4);
        assert!(max_abs(&(c.n_half.dot(&c.n_half.t()) - Array2::<f64>::eye(4))) < 1e-14);
        let c = canonical_orthogonalization(&array![[1.0, 0.0], [0.0, 1e-9]], 1e-5).unwrap();
        assert_eq!(c.kept, 1);
        assert!(matches!(
            canonical_orthogonalization(&Array2::zeros((2, 2)), 1e-5),
            Err(Error::AllModesDiscarded)
        ));
    }

    #[test]
    fn sqrt_of_diagonal() {
        let (h, ih) = matrix_sqrt_pair(&array![[4.0, 0.0], [0.0, 9.0]]).unwrap();
        assert!(max_abs(&(h - array![[2.0, 0.0], [0.0, 3.0]])) < 1e-14);
        assert!(max_abs(&(ih - array![[0.5, 0.0], [0.0, 1.0 / 3.0]])) < 1e-14);
        let (h, ih) = matrix_sqrt_pair(&Array2::eye(3)).unwrap();
        assert!(max_abs(&(h - Array2::<f64>::eye(3))) < 1e-14);
        assert!(max_abs(&(ih - Array2::<f64>::eye(3))) < 1e-14);
        assert!(matches!(
            matrix_sqrt_pair(&array![[1.0, 0.0], [0.0, -0.5]]),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.3_f64;
        let u = expm(&array![[0.0, -t], [t, 0.0]]);
        assert!((u[[0, 0]] - t.cos()).abs() < 1e-14);
        assert!((u[[1, 0]] - t.sin()).abs() < 1e-14);
    }
}

//! Dense matrix primitives shared by every stage of the pipeline.
//!
//! Matrices are `faer` matrices with column-major storage. Real and complex
//! matrices are distinct types; [`to_complex`] is the only promotion path and
//! it is lossless.

use faer::{c64, Mat, MatRef};
use log::debug;

use crate::error::{Error, Result};

pub type RealMatrix = Mat<f64>;
pub type ComplexMatrix = Mat<c64>;

/// Default relative cut-off used to decide numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Largest reduced operator handed to [`eig_general`].
pub const MAX_EIG_DIM: usize = 512;

/// Relative residual accepted from [`eig_general`].
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// Rejects matrices with NaN or infinite entries, naming the first offender.
pub fn ensure_finite(a: MatRef<'_, f64>) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let value = a[(i, j)];
            if !value.is_finite() {
                return Err(Error::NonFinite { row: i, col: j, value });
            }
        }
    }
    Ok(())
}

pub fn to_complex(a: MatRef<'_, f64>) -> ComplexMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

/// Frobenius norm of a real matrix.
pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

/// Frobenius norm of a complex matrix.
pub fn frobenius_complex(a: MatRef<'_, c64>) -> f64 {
    a.norm_l2()
}

/// Economy singular value factors `A ≈ U diag(sigma) Wᵀ`.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// Left singular vectors, `m × k` with orthonormal columns.
    pub u: RealMatrix,
    /// Singular values, nonnegative and nonincreasing.
    pub sigma: Vec<f64>,
    /// Right singular vectors, `n × k` with orthonormal columns.
    pub w: RealMatrix,
    /// Number of singular values above the relative rank tolerance.
    pub rank_used: usize,
}

impl SvdFactors {
    pub(crate) fn new(u: RealMatrix, sigma: Vec<f64>, w: RealMatrix) -> Self {
        debug_assert_eq!(u.ncols(), sigma.len());
        debug_assert_eq!(w.ncols(), sigma.len());
        let rank_used = numerical_rank(&sigma, DEFAULT_RANK_TOL);
        Self { u, sigma, w, rank_used }
    }

    /// Number of retained singular triplets.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> RealMatrix {
        let scaled = Mat::from_fn(self.u.nrows(), self.rank(), |i, j| self.u[(i, j)] * self.sigma[j]);
        &scaled * self.w.transpose()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(self, k: usize) -> Self {
        let k = k.min(self.rank());
        let u = self.u.subcols(0, k).to_owned();
        let w = self.w.subcols(0, k).to_owned();
        let mut sigma = self.sigma;
        sigma.truncate(k);
        Self::new(u, sigma, w)
    }
}

/// Number of entries of a nonincreasing sequence above `rel_tol * sigma[0]`.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    match sigma.first() {
        Some(&s0) if s0 > 0.0 => sigma.iter().take_while(|&&s| s > rel_tol * s0).count(),
        _ => 0,
    }
}

/// Economy SVD of a tall (or square) matrix.
pub fn economy_svd(a: MatRef<'_, f64>) -> Result<SvdFactors> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Err(Error::Shape(format!("cannot factor an empty {m}x{n} matrix")));
    }
    if m < n {
        return Err(Error::Shape(format!(
            "economy SVD expects rows >= cols, got {m}x{n}; transpose the input"
        )));
    }
    ensure_finite(a)?;
    let svd = a
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence { rows: m, cols: n })?;
    let sigma: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    Ok(SvdFactors::new(svd.U().to_owned(), sigma, svd.V().to_owned()))
}

/// Eigenvectors (unit 2-norm columns) and eigenvalues of a real square matrix.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub vectors: ComplexMatrix,
    pub values: Vec<c64>,
    /// `‖S X − X Λ‖_F` achieved by the returned pairs.
    pub residual: f64,
}

/// General (nonsymmetric) eigendecomposition `S X = X Λ`.
///
/// Complex eigenvalues of a real input come out as exact conjugate pairs with
/// conjugate eigenvectors.
pub fn eig_general(s: MatRef<'_, f64>) -> Result<EigenPairs> {
    let k = s.nrows();
    if s.ncols() != k {
        return Err(Error::Shape(format!("eigenproblem needs a square matrix, got {}x{}", k, s.ncols())));
    }
    if k > MAX_EIG_DIM {
        return Err(Error::Shape(format!("reduced operator of size {k} exceeds the limit {MAX_EIG_DIM}")));
    }
    ensure_finite(s)?;
    if k == 0 {
        return Ok(EigenPairs { vectors: Mat::zeros(0, 0), values: Vec::new(), residual: 0.0 });
    }
    let evd = s.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values: Vec<c64> = evd.S().column_vector().iter().copied().collect();
    let mut vectors = evd.U().to_owned();
    for j in 0..k {
        let norm = vectors.col(j).norm_l2();
        if norm > 0.0 {
            for i in 0..k {
                vectors[(i, j)] /= norm;
            }
        }
    }

    let sc = to_complex(s);
    let mut r = &sc * &vectors;
    for j in 0..k {
        for i in 0..k {
            r[(i, j)] -= vectors[(i, j)] * values[j];
        }
    }
    let residual = r.norm_l2();
    let bound = EIG_RESIDUAL_TOL * s.norm_l2();
    if residual > bound {
        return Err(Error::EigenResidual { residual, bound });
    }
    Ok(EigenPairs { vectors, values, residual })
}

/// Orthonormal basis for the range of `q`.
///
/// Uses a column-pivoted QR factorization and keeps only the columns whose
/// pivot exceeds [`DEFAULT_RANK_TOL`] relative to the largest one, so the
/// result has as many columns as the numerical rank of `q`. A zero matrix
/// yields a matrix with no columns.
pub fn orthonormalize(q: MatRef<'_, f64>) -> RealMatrix {
    let (m, n) = (q.nrows(), q.ncols());
    if m == 0 || n == 0 {
        return Mat::zeros(m, 0);
    }
    let qr = q.col_piv_qr();
    let r = qr.R();
    let diag_len = m.min(n);
    let pivots: Vec<f64> = (0..diag_len).map(|i| r[(i, i)].abs()).collect();
    let rank = numerical_rank(&pivots, DEFAULT_RANK_TOL);
    if rank < n {
        debug!("orthonormalize: dropped {} dependent column(s)", n - rank);
    }
    qr.compute_thin_Q().subcols(0, rank).to_owned()
}

/// Moore-Penrose inverse of a nonincreasing diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagPinv {
    pub inverse: Vec<f64>,
    /// Count of inverted (nonzero) entries.
    pub rank: usize,
}

impl DiagPinv {
    /// True when every input was below tolerance.
    pub fn is_zero(&self) -> bool {
        self.rank == 0
    }
}

/// Inverts the entries above `rel_tol * sigma[0]` and zeroes the rest.
pub fn pinv_diag(sigma: &[f64], rel_tol: f64) -> DiagPinv {
    let s0 = sigma.first().copied().unwrap_or(0.0);
    let inverse: Vec<f64> = sigma
        .iter()
        .map(|&s| if s0 > 0.0 && s > rel_tol * s0 { 1.0 / s } else { 0.0 })
        .collect();
    let rank = inverse.iter().filter(|&&x| x != 0.0).count();
    DiagPinv { inverse, rank }
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub solution: Vec<c64>,
    /// `‖A x − b‖₂`.
    pub residual: f64,
    pub rank: usize,
}

/// Solves `min ‖A x − b‖₂` through the pseudoinverse `A⁺ = V Σ⁺ Uᴴ`.
pub fn complex_lstsq(a: MatRef<'_, c64>, b: &[c64], rel_tol: f64) -> Result<LeastSquares> {
    let (m, n) = (a.nrows(), a.ncols());
    if b.len() != m {
        return Err(Error::Shape(format!("right-hand side has length {}, expected {m}", b.len())));
    }
    if n == 0 {
        let residual = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        return Ok(LeastSquares { solution: Vec::new(), residual, rank: 0 });
    }
    let svd = a
        .thin_svd()
        .map_err(|_| Error::SvdNoConvergence { rows: m, cols: n })?;
    let sigma: Vec<f64> = svd.S().column_vector().iter().map(|s| s.re).collect();
    let pinv = pinv_diag(&sigma, rel_tol);
    let (u, v) = (svd.U(), svd.V());

    let p = sigma.len();
    let mut coeffs = vec![c64::new(0.0, 0.0); p];
    for (l, c) in coeffs.iter_mut().enumerate() {
        if pinv.inverse[l] == 0.0 {
            continue;
        }
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..m {
            acc += u[(i, l)].conj() * b[i];
        }
        *c = acc * pinv.inverse[l];
    }
    let solution: Vec<c64> = (0..n)
        .map(|j| (0..p).fold(c64::new(0.0, 0.0), |acc, l| acc + v[(j, l)] * coeffs[l]))
        .collect();

    let mut residual_sq = 0.0;
    for i in 0..m {
        let mut ax = c64::new(0.0, 0.0);
        for j in 0..n {
            ax += a[(i, j)] * solution[j];
        }
        residual_sq += (ax - b[i]).norm_sqr();
    }
    Ok(LeastSquares { solution, residual: residual_sq.sqrt(), rank: pinv.rank })
}

/// Extends an orthonormal basis to `target` columns with canonical-basis
/// directions orthogonalized against the existing columns.
pub(crate) fn complete_orthonormal(basis: MatRef<'_, f64>, target: usize) -> RealMatrix {
    let m = basis.nrows();
    assert!(target <= m, "cannot build {target} orthonormal columns in dimension {m}");
    let mut cols: Vec<Vec<f64>> = (0..basis.ncols())
        .map(|j| (0..m).map(|i| basis[(i, j)]).collect())
        .collect();
    let mut candidate = 0;
    while cols.len() < target && candidate < m {
        let mut v = vec![0.0; m];
        v[candidate] = 1.0;
        candidate += 1;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for c in &cols {
                let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    Mat::from_fn(m, cols.len(), |i, j| cols[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gram_residual(q: MatRef<'_, f64>) -> f64 {
        let g = q.transpose() * q;
        let eye = Mat::<f64>::identity(q.ncols(), q.ncols());
        (&g - &eye).norm_l2()
    }

    #[test]
    fn svd_of_identity() {
        let f = economy_svd(Mat::<f64>::identity(3, 3).as_ref()).unwrap();
        assert_eq!(f.sigma.len(), 3);
        for s in &f.sigma {
            assert_relative_eq!(*s, 1.0, epsilon = 1e-14);
        }
        let uw = &f.u * f.w.transpose();
        assert!((&uw - Mat::<f64>::identity(3, 3)).norm_l2() < 1e-13);
    }

    #[test]
    fn svd_of_diagonal() {
        let a = Mat::from_fn(2, 2, |i, j| if i == j { [3.0, 1.0][i] } else { 0.0 });
        let f = economy_svd(a.as_ref()).unwrap();
        assert_relative_eq!(f.sigma[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(f.sigma[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn svd_of_scaled_outer_product() {
        let u = [1.0, 2.0, -1.0, 0.5, 3.0];
        let v = [0.3, -1.0, 2.0, 1.0];
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a = Mat::from_fn(5, 4, |i, j| 7.0 * u[i] / nu * v[j] / nv);
        let f = economy_svd(a.as_ref()).unwrap();
        assert_relative_eq!(f.sigma[0], 7.0, epsilon = 1e-12);
        for s in &f.sigma[1..] {
            assert!(s.abs() < 1e-12);
        }
        assert_eq!(f.rank_used, 1);
    }

    #[test]
    fn svd_rejects_wide_and_nonfinite() {
        let wide = Mat::<f64>::zeros(2, 3);
        assert!(matches!(economy_svd(wide.as_ref()), Err(Error::Shape(_))));
        let mut bad = Mat::<f64>::identity(3, 2);
        bad[(2, 1)] = f64::NAN;
        match economy_svd(bad.as_ref()) {
            Err(Error::NonFinite { row, col, .. }) => assert_eq!((row, col), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eig_of_diagonal() {
        let s = Mat::from_fn(2, 2, |i, j| if i == j { [2.0, -1.0][i] } else { 0.0 });
        let e = eig_general(s.as_ref()).unwrap();
        let mut re: Vec<f64> = e.values.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re, vec![-1.0, 2.0]);
        for j in 0..2 {
            let nonzero = (0..2).filter(|&i| e.vectors[(i, j)].norm() > 1e-12).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn eig_of_rotation_generator() {
        let s = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -1.0,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let e = eig_general(s.as_ref()).unwrap();
        let mut im: Vec<f64> = e.values.iter().map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        assert_relative_eq!(im[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(im[1], 1.0, epsilon = 1e-14);
        assert!(e.values.iter().all(|z| z.re.abs() < 1e-14));
    }

    #[test]
    fn eig_rejects_non_square() {
        assert!(eig_general(Mat::<f64>::zeros(2, 3).as_ref()).is_err());
    }

    #[test]
    fn orthonormalize_scaled_identity() {
        let q = orthonormalize((Mat::<f64>::identity(2, 2) * faer::Scale(2.0)).as_ref());
        assert_eq!(q.ncols(), 2);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(q[(i, j)].abs(), expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn orthonormalize_drops_duplicate_column() {
        let q = Mat::from_fn(3, 2, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let basis = orthonormalize(q.as_ref());
        assert_eq!(basis.ncols(), 1);
        assert_relative_eq!(basis[(0, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn orthonormalize_zero_matrix_is_empty() {
        let basis = orthonormalize(Mat::<f64>::zeros(4, 3).as_ref());
        assert_eq!(basis.ncols(), 0);
        assert_eq!(basis.nrows(), 4);
    }

    #[test]
    fn pinv_diag_examples() {
        let p = pinv_diag(&[3.0, 1.0], 1e-12);
        assert_eq!(p.inverse, vec![1.0 / 3.0, 1.0]);
        assert_eq!(p.rank, 2);

        let p = pinv_diag(&[7.0, 0.0, 0.0, 0.0], 1e-12);
        assert_eq!(p.inverse, vec![1.0 / 7.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.rank, 1);

        let p = pinv_diag(&[1.0, 1e-15], 1e-12);
        assert_eq!(p.inverse, vec![1.0, 0.0]);

        let p = pinv_diag(&[0.0, 0.0], 1e-12);
        assert!(p.is_zero());
        assert_eq!(p.inverse, vec![0.0, 0.0]);
    }

    #[test]
    fn frobenius_examples() {
        assert_relative_eq!(frobenius(Mat::<f64>::identity(3, 3).as_ref()), 3f64.sqrt(), epsilon = 1e-15);
        let a = Mat::from_fn(2, 2, |i, j| if i == j { [3.0, 4.0][i] } else { 0.0 });
        assert_relative_eq!(frobenius(a.as_ref()), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn lstsq_orthonormal_projection() {
        let a = to_complex(Mat::<f64>::identity(3, 2).as_ref());
        let b = [c64::new(1.0, 2.0), c64::new(-3.0, 0.0), c64::new(0.0, 0.0)];
        let ls = complex_lstsq(a.as_ref(), &b, DEFAULT_RANK_TOL).unwrap();
        assert!((ls.solution[0] - b[0]).norm() < 1e-14);
        assert!((ls.solution[1] - b[1]).norm() < 1e-14);
        assert!(ls.residual < 1e-14);
        assert_eq!(ls.rank, 2);
    }

    #[test]
    fn completion_produces_orthonormal_columns() {
        let seed = orthonormalize(Mat::from_fn(6, 2, |i, j| ((i + 1) * (j + 2)) as f64 + (i * j) as f64).as_ref());
        let full = complete_orthonormal(seed.as_ref(), 5);
        assert_eq!(full.ncols(), 5);
        assert!(gram_residual(full.as_ref()) < 1e-13);
    }
}

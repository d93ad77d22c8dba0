//! Dense symmetric linear algebra: Jacobi eigendecomposition, inverse square
//! roots, Cholesky, and projector distances between row spaces.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use thiserror::Error;

/// Default relative eigenvalue floor for [`inv_sqrt_sym`].
pub const DEFAULT_REL_FLOOR: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-12;
const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix must be square with dimension >= 1, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is near singular: lambda_min / lambda_max = {ratio:e}")]
    NearSingular { ratio: f64 },
    #[error("matrix is not positive definite: pivot {index} = {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("row basis is rank deficient")]
    RankDeficient,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A square matrix validated to be symmetric within round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = entries.dim();
        if rows != cols || rows == 0 {
            return Err(LinalgError::BadShape { rows, cols });
        }
        for i in 0..rows {
            for j in (i + 1)..rows {
                let a = entries[[i, j]];
                let b = entries[[j, i]];
                let diff = (a - b).abs();
                if !(diff <= SYMMETRY_TOL * a.abs().max(1.0)) {
                    return Err(LinalgError::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self(entries))
    }

    /// Builds a symmetric matrix from its upper triangle, mirroring it exactly.
    pub fn from_upper(mut entries: Array2<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = entries.dim();
        if rows != cols || rows == 0 {
            return Err(LinalgError::BadShape { rows, cols });
        }
        for i in 0..rows {
            for j in 0..i {
                entries[[i, j]] = entries[[j, i]];
            }
        }
        Ok(Self(entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Array2::eye(dim))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(Array2::from_diag(&Array1::from(values.to_vec())))
    }

    /// AR(1) correlation structure `rho^|i-j|`.
    pub fn ar1(dim: usize, rho: f64) -> Self {
        Self(Array2::from_shape_fn((dim, dim), |(i, j)| {
            rho.powi(i.abs_diff(j) as i32)
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Entrywise difference `self - other`.
    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(SymMatrix(&self.0 - &other.0))
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub eigenvalues: Array1<f64>,
    /// Column `j` is paired with `eigenvalues[j]`.
    pub eigenvectors: Array2<f64>,
}

impl EigenDecomp {
    /// Rebuilds `V f(diag(lambda)) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let v = &self.eigenvectors;
        let scaled = v * &self.eigenvalues.mapv(f).insert_axis(Axis(0));
        scaled.dot(&v.t())
    }
}

/// Cyclic Jacobi eigendecomposition.
///
/// Eigenvalues come back in descending order (ties keep their diagonal
/// position order), and each eigenvector is signed so its largest-magnitude
/// entry is positive, lowest index winning ties.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomp, LinalgError> {
    let p = a.dim();
    let mut m = a.as_array().clone();
    let mut v = Array2::<f64>::eye(p);

    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = JACOBI_OFF_TOL * frob;
    let off_norm = |m: &Array2<f64>| {
        let mut s = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                s += 2.0 * m[[i, j]] * m[[i, j]];
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&m) <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = m[[i, j]];
                if apq == 0.0 {
                    continue;
                }
                let app = m[[i, i]];
                let aqq = m[[j, j]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..p {
                    let mki = m[[k, i]];
                    let mkj = m[[k, j]];
                    m[[k, i]] = c * mki - s * mkj;
                    m[[k, j]] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let mik = m[[i, k]];
                    let mjk = m[[j, k]];
                    m[[i, k]] = c * mik - s * mjk;
                    m[[j, k]] = s * mik + c * mjk;
                }
                m[[i, j]] = 0.0;
                m[[j, i]] = 0.0;
                for k in 0..p {
                    let vki = v[[k, i]];
                    let vkj = v[[k, j]];
                    v[[k, i]] = c * vki - s * vkj;
                    v[[k, j]] = s * vki + c * vkj;
                }
            }
        }
        converged = off_norm(&m) <= tol;
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m[[y, y]].total_cmp(&m[[x, x]]));

    let eigenvalues = Array1::from_iter(order.iter().map(|&k| m[[k, k]]));
    let mut eigenvectors = Array2::<f64>::zeros((p, p));
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).to_owned();
        let mut lead = 0;
        for r in 1..p {
            if col[r].abs() > col[lead].abs() {
                lead = r;
            }
        }
        if col[lead] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        eigenvectors.column_mut(dst).assign(&col);
    }
    Ok(EigenDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Symmetric inverse square root `V diag(lambda^-1/2) V^T`.
///
/// Fails with [`LinalgError::NearSingular`] unless
/// `lambda_min > rel_floor * lambda_max`.
pub fn inv_sqrt_sym(a: &SymMatrix, rel_floor: f64) -> Result<SymMatrix, LinalgError> {
    let eig = sym_eig(a)?;
    let max = eig.eigenvalues[0];
    let min = eig.eigenvalues[a.dim() - 1];
    if !(max > 0.0 && min > rel_floor * max) {
        let ratio = if max > 0.0 { min / max } else { f64::NAN };
        return Err(LinalgError::NearSingular { ratio });
    }
    SymMatrix::from_upper(eig.reconstruct_with(|l| 1.0 / l.sqrt()))
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &SymMatrix) -> Result<f64, LinalgError> {
    let eig = sym_eig(a)?;
    Ok(eig.eigenvalues.iter().fold(0.0_f64, |m, l| m.max(l.abs())))
}

/// Lower-triangular `L` with `L L^T = a`.
pub fn cholesky(a: &SymMatrix) -> Result<Array2<f64>, LinalgError> {
    let p = a.dim();
    let a = a.as_array();
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > CHOLESKY_PIVOT_TOL) {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..p {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the Cholesky factor.
pub(crate) fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let p = l.nrows();
    let mut z = b.clone();
    for i in 0..p {
        for k in 0..i {
            z[i] -= l[[i, k]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    for i in (0..p).rev() {
        for k in (i + 1)..p {
            z[i] -= l[[k, i]] * z[k];
        }
        z[i] /= l[[i, i]];
    }
    z
}

/// Orthogonal projector onto the row space of a full-row-rank basis.
pub fn row_space_projector(basis: ArrayView2<'_, f64>) -> Result<SymMatrix, LinalgError> {
    let q = orthonormal_rows(basis)?;
    SymMatrix::from_upper(q.t().dot(&q))
}

/// Modified Gram-Schmidt on the rows of `basis`.
pub fn orthonormal_rows(basis: ArrayView2<'_, f64>) -> Result<Array2<f64>, LinalgError> {
    let (k, p) = basis.dim();
    if k == 0 || k > p {
        return Err(LinalgError::RankDeficient);
    }
    let mut q = basis.to_owned();
    for r in 0..k {
        let original = q.row(r).dot(&q.row(r)).sqrt();
        for s in 0..r {
            let proj = q.row(r).dot(&q.row(s));
            let qs = q.row(s).to_owned();
            q.row_mut(r).scaled_add(-proj, &qs);
        }
        let norm = q.row(r).dot(&q.row(r)).sqrt();
        if !(norm > 1e-10 * original.max(f64::MIN_POSITIVE)) || norm == 0.0 {
            return Err(LinalgError::RankDeficient);
        }
        q.row_mut(r).mapv_inplace(|x| x / norm);
    }
    Ok(q)
}

/// Spectral norm of `P1 - P2` where `Pi` projects onto the row space of `vi`.
pub fn projection_distance(
    v1: ArrayView2<'_, f64>,
    v2: ArrayView2<'_, f64>,
) -> Result<f64, LinalgError> {
    if v1.ncols() != v2.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "bases live in R^{} and R^{}",
            v1.ncols(),
            v2.ncols()
        )));
    }
    let p1 = row_space_projector(v1)?;
    let p2 = row_space_projector(v2)?;
    spectral_norm(&p1.sub(&p2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn random_sym(p: usize, vals: &[f64]) -> SymMatrix {
        let mut a = Array2::zeros((p, p));
        let mut it = vals.iter().cycle();
        for i in 0..p {
            for j in i..p {
                a[[i, j]] = *it.next().unwrap();
            }
        }
        SymMatrix::from_upper(a).unwrap()
    }

    #[test]
    fn identity_eigen() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, array![1.0, 1.0, 1.0]);
        assert_eq!(e.eigenvectors, Array2::<f64>::eye(3));
    }

    #[test]
    fn diagonal_eigen_is_sorted() {
        let e = sym_eig(&SymMatrix::diag(&[4.0, 9.0])).unwrap();
        assert_eq!(e.eigenvalues, array![9.0, 4.0]);
        assert_eq!(e.eigenvectors, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn two_by_two_eigen() {
        let a = SymMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // tie in |entry|: index 0 wins and is made positive
        assert_abs_diff_eq!(e.eigenvectors[[0, 0]], h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[[1, 0]], h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[[0, 1]], h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[[1, 1]], -h, epsilon = 1e-14);
    }

    #[test]
    fn asymmetric_rejected() {
        let err = SymMatrix::new(array![[1.0, 2.0], [2.1, 1.0]]).unwrap_err();
        assert!(matches!(err, LinalgError::NotSymmetric { i: 0, j: 1, .. }));
    }

    #[test]
    fn inv_sqrt_examples() {
        let b = inv_sqrt_sym(&SymMatrix::diag(&[4.0, 9.0]), DEFAULT_REL_FLOOR).unwrap();
        assert_abs_diff_eq!(b.as_array()[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.as_array()[[1, 1]], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.as_array()[[0, 1]], 0.0, epsilon = 1e-15);

        let i4 = inv_sqrt_sym(&SymMatrix::identity(4), DEFAULT_REL_FLOOR).unwrap();
        assert_eq!(i4.as_array(), &Array2::<f64>::eye(4));

        let a = SymMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let b = inv_sqrt_sym(&a, DEFAULT_REL_FLOOR).unwrap();
        let bab = b.as_array().dot(a.as_array()).dot(b.as_array());
        for ((i, j), v) in bab.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, want, epsilon = 1e-12);
        }
        // V diag(1/sqrt3, 1) V^T by hand
        let s = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(b.as_array()[[0, 0]], 0.5 * (s + 1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(b.as_array()[[0, 1]], 0.5 * (s - 1.0), epsilon = 1e-14);
    }

    #[test]
    fn inv_sqrt_near_singular() {
        let a = SymMatrix::diag(&[1.0, 1e-12]);
        match inv_sqrt_sym(&a, DEFAULT_REL_FLOOR) {
            Err(LinalgError::NearSingular { ratio }) => assert!((ratio - 1e-12).abs() < 1e-20),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spectral_norm_examples() {
        assert_eq!(spectral_norm(&SymMatrix::diag(&[-3.0, 2.0])).unwrap(), 3.0);
        assert_eq!(spectral_norm(&SymMatrix::diag(&[0.0, 0.0])).unwrap(), 0.0);
        let a = SymMatrix::new(array![[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert_abs_diff_eq!(spectral_norm(&a).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(
            cholesky(&SymMatrix::identity(3)).unwrap(),
            Array2::<f64>::eye(3)
        );
        assert_eq!(
            cholesky(&SymMatrix::diag(&[4.0, 9.0])).unwrap(),
            array![[2.0, 0.0], [0.0, 3.0]]
        );
        let l = cholesky(&SymMatrix::new(array![[4.0, 2.0], [2.0, 5.0]]).unwrap()).unwrap();
        assert_eq!(l, array![[2.0, 0.0], [1.0, 2.0]]);
        let err = cholesky(&SymMatrix::diag(&[1.0, -1.0])).unwrap_err();
        assert!(matches!(
            err,
            LinalgError::NotPositiveDefinite { index: 1, .. }
        ));
    }

    #[test]
    fn projection_distance_examples() {
        let e1 = array![[1.0, 0.0]];
        let e2 = array![[0.0, 1.0]];
        let d = array![[1.0, 1.0]];
        assert_abs_diff_eq!(
            projection_distance(e1.view(), e1.view()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            projection_distance(e1.view(), e2.view()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            projection_distance(e1.view(), d.view()).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-14
        );
        let dup = array![[1.0, 0.0], [2.0, 0.0]];
        assert_eq!(
            projection_distance(dup.view(), e1.view()).unwrap_err(),
            LinalgError::RankDeficient
        );
    }

    proptest! {
        #[test]
        fn eig_reconstructs(p in 1usize..=8, vals in prop::collection::vec(-5.0f64..5.0, 36)) {
            let a = random_sym(p, &vals);
            let e = sym_eig(&a).unwrap();
            let recon = e.reconstruct_with(|l| l);
            let scale = 1.0 + a.max_abs();
            for (x, y) in recon.iter().zip(a.as_array().iter()) {
                prop_assert!((x - y).abs() <= 1e-8 * scale);
            }
            let vtv = e.eigenvectors.t().dot(&e.eigenvectors);
            for ((i, j), v) in vtv.indexed_iter() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-8);
            }
            for w in e.eigenvalues.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let sn = spectral_norm(&a).unwrap();
            let direct = e.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            prop_assert_eq!(sn, direct);
        }

        #[test]
        fn inv_sqrt_squares_to_inverse(p in 1usize..=6, vals in prop::collection::vec(-1.0f64..1.0, 36)) {
            // diagonally dominant SPD
            let mut a = random_sym(p, &vals).into_inner();
            for i in 0..p { a[[i, i]] = a[[i, i]].abs() + p as f64; }
            let a = SymMatrix::new(a).unwrap();
            let b = inv_sqrt_sym(&a, DEFAULT_REL_FLOOR).unwrap();
            let bba = b.as_array().dot(b.as_array()).dot(a.as_array());
            for ((i, j), v) in bba.indexed_iter() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-6);
            }
        }

        #[test]
        fn projection_distance_symmetric_and_basis_free(
            v1 in prop::collection::vec(-2.0f64..2.0, 8),
            v2 in prop::collection::vec(-2.0f64..2.0, 8),
            r in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let a = Array2::from_shape_vec((2, 4), v1).unwrap();
            let b = Array2::from_shape_vec((2, 4), v2).unwrap();
            let r = Array2::from_shape_vec((2, 2), r).unwrap();
            let det = r[[0, 0]] * r[[1, 1]] - r[[0, 1]] * r[[1, 0]];
            prop_assume!(det.abs() > 0.1);
            let (Ok(ab), Ok(ba)) = (projection_distance(a.view(), b.view()), projection_distance(b.view(), a.view())) else {
                return Ok(());
            };
            prop_assert!((ab - ba).abs() <= 1e-10);
            let ra = r.dot(&a);
            let rab = projection_distance(ra.view(), b.view()).unwrap();
            prop_assert!((rab - ab).abs() <= 1e-8);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }
    }
}

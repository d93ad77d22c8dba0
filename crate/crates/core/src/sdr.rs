//! Slicing and the two inverse-regression estimators.
//!
//! Both estimators centre and whiten the covariates, cut the sorted response
//! into `H` slices of `floor(n / H)` points (the last slice absorbs the
//! remainder), and take the top eigenvectors of a matrix built from the
//! whitened slice means:
//!
//! * SIR whitens with the sample covariance and uses the second-moment matrix
//!   `(1/H) sum_h m_h m_h^T`.
//! * ESIR whitens with the sample Kendall's tau matrix and uses the Kendall's
//!   tau matrix of the slice means.
//!
//! Directions are mapped back to the original scale by the same symmetric
//! inverse square root used for whitening.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::elliptical::Dataset;
use crate::error::{Error, Result};
use crate::kendall::{column_means, kendall_tau, TauMatrix, ZeroDistancePolicy};
use crate::linalg::{inv_sqrt_sym, sym_eig, SymMatrix, DEFAULT_REL_FLOOR};

/// Equal-count slices of the response order statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceAssignment {
    /// Row indices sorted by ascending response, ties by original index.
    pub order: Vec<usize>,
    /// `h_count + 1` offsets into `order`.
    pub boundaries: Vec<usize>,
    pub h_count: usize,
}

impl SliceAssignment {
    /// Row indices of slice `s` (0-based).
    pub fn members(&self, s: usize) -> &[usize] {
        &self.order[self.boundaries[s]..self.boundaries[s + 1]]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn slice_by_response(y: ArrayView1<'_, f64>, h: usize) -> Result<SliceAssignment> {
    let n = y.len();
    if h == 0 || n < 2 * h {
        return Err(Error::TooFewPoints { n, h });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "response contains non-finite values".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal responses keep index order
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let l = n / h;
    let mut boundaries: Vec<usize> = (0..h).map(|s| s * l).collect();
    boundaries.push(n);
    Ok(SliceAssignment {
        order,
        boundaries,
        h_count: h,
    })
}

/// Row `s` is the mean of the rows of `x_std` belonging to slice `s`.
pub fn slice_means(x_std: ArrayView2<'_, f64>, a: &SliceAssignment) -> Result<Array2<f64>> {
    if x_std.nrows() != a.order.len() {
        return Err(Error::InvalidInput(format!(
            "slice assignment covers {} rows but data has {}",
            a.order.len(),
            x_std.nrows()
        )));
    }
    let mut means = Array2::<f64>::zeros((a.h_count, x_std.ncols()));
    for (s, mut row) in means.rows_mut().into_iter().enumerate() {
        let members = a.members(s);
        for &i in members {
            row += &x_std.row(i);
        }
        row /= members.len() as f64;
    }
    Ok(means)
}

/// Kendall's tau matrix of the slice means, coincident means skipped.
pub fn slice_kendall_tau(means: ArrayView2<'_, f64>) -> Result<TauMatrix> {
    if means.nrows() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 slice means, got {}",
            means.nrows()
        )));
    }
    kendall_tau(means, ZeroDistancePolicy::Skip)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SIR")]
    Sir,
    #[serde(rename = "ESIR")]
    Esir,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sir => "SIR",
            Method::Esir => "ESIR",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sir" => Ok(Method::Sir),
            "esir" => Ok(Method::Esir),
            _ => Err(Error::InvalidInput(format!("unknown method `{s}`"))),
        }
    }
}

/// Fitted dimension-reduction directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdrFit {
    pub method: Method,
    /// `K x p`; row `k` is the estimated direction on the original scale.
    pub directions: Array2<f64>,
    /// `K x p`; orthonormal eigenvectors in the whitened coordinates.
    pub standardized_directions: Array2<f64>,
    pub eigenvalues: Array1<f64>,
    pub h_used: usize,
    pub k: usize,
}

impl SdrFit {
    /// `n x K` matrix of projections `x_i . beta_k`.
    pub fn project(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.directions.t())
    }
}

/// Whitening used before slicing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Standardization {
    /// Centre and whiten with the method's scatter matrix.
    #[default]
    Standardized,
    /// Use the covariates as given.
    Raw,
}

fn check_sizes(d: &Dataset, h: usize, k: usize) -> Result<()> {
    if h == 0 || d.n() < 2 * h {
        return Err(Error::TooFewPoints { n: d.n(), h });
    }
    let max = d.p().min(h.saturating_sub(1));
    if k == 0 || k > max {
        return Err(Error::KTooLarge { k, max });
    }
    Ok(())
}

fn centered(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mean = column_means(x);
    &x - &mean.insert_axis(Axis(0))
}

fn sample_covariance(x: ArrayView2<'_, f64>) -> Result<SymMatrix> {
    let c = centered(x);
    let cov = c.t().dot(&c) / (x.nrows() as f64 - 1.0);
    Ok(SymMatrix::from_upper(cov)?)
}

/// Top-`k` eigenpairs of `target`, mapped back through `whitener`.
fn leading_directions(
    method: Method,
    target: &SymMatrix,
    whitener: &SymMatrix,
    h: usize,
    k: usize,
) -> Result<SdrFit> {
    let eig = sym_eig(target)?;
    let standardized = eig.eigenvectors.slice(s![.., ..k]).t().to_owned();
    let directions = standardized.dot(whitener.as_array());
    Ok(SdrFit {
        method,
        directions,
        standardized_directions: standardized,
        eigenvalues: eig.eigenvalues.slice(s![..k]).to_owned(),
        h_used: h,
        k,
    })
}

/// Elliptical sliced inverse regression.
pub fn esir_fit(d: &Dataset, h: usize, k: usize) -> Result<SdrFit> {
    check_sizes(d, h, k)?;
    let tau = kendall_tau(d.x.view(), ZeroDistancePolicy::Skip)?;
    let whitener = inv_sqrt_sym(tau.matrix(), DEFAULT_REL_FLOOR)?;
    let x_std = centered(d.x.view()).dot(whitener.as_array());
    let slices = slice_by_response(d.y.view(), h)?;
    let means = slice_means(x_std.view(), &slices)?;
    let m_hat = slice_kendall_tau(means.view())?;
    leading_directions(Method::Esir, m_hat.matrix(), &whitener, h, k)
}

/// Classic sliced inverse regression with equal slice weights.
pub fn sir_fit(d: &Dataset, h: usize, k: usize) -> Result<SdrFit> {
    check_sizes(d, h, k)?;
    let cov = sample_covariance(d.x.view())?;
    let whitener = inv_sqrt_sym(&cov, DEFAULT_REL_FLOOR)?;
    let x_std = centered(d.x.view()).dot(whitener.as_array());
    let slices = slice_by_response(d.y.view(), h)?;
    let means = slice_means(x_std.view(), &slices)?;
    let v_hat = means.t().dot(&means) / h as f64;
    leading_directions(Method::Sir, &SymMatrix::from_upper(v_hat)?, &whitener, h, k)
}

pub fn fit(method: Method, d: &Dataset, h: usize, k: usize) -> Result<SdrFit> {
    match method {
        Method::Sir => sir_fit(d, h, k),
        Method::Esir => esir_fit(d, h, k),
    }
}

/// The slice-mean Kendall's tau matrix that ESIR eigendecomposes, either on
/// whitened covariates or on the raw ones.
pub fn inverse_regression_tau(d: &Dataset, h: usize, mode: Standardization) -> Result<TauMatrix> {
    let slices = slice_by_response(d.y.view(), h)?;
    let means = match mode {
        Standardization::Raw => slice_means(d.x.view(), &slices)?,
        Standardization::Standardized => {
            let tau = kendall_tau(d.x.view(), ZeroDistancePolicy::Skip)?;
            let whitener = inv_sqrt_sym(tau.matrix(), DEFAULT_REL_FLOOR)?;
            let x_std = centered(d.x.view()).dot(whitener.as_array());
            slice_means(x_std.view(), &slices)?
        }
    };
    slice_kendall_tau(means.view())
}

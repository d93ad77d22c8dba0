//! Evaluation metrics: squared multiple correlation between a fitted
//! direction and the true central subspace, plus the regression and
//! normality diagnostics used on real data.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, orthonormal_rows, SymMatrix};
use crate::sdr::SdrFit;

/// Asymptotic 5% critical value of the Kolmogorov distribution.
pub const KS_CRITICAL_05: f64 = 1.358;

const DEGENERATE_DIRECTION: f64 = 1e-14;
const OLS_PIVOT_TOL: f64 = 1e-10;

/// True directions and the scatter matrix defining the inner product.
#[derive(Debug, Clone)]
pub struct TruthSpec {
    pub b_true: Array2<f64>,
    pub sigma: SymMatrix,
}

impl TruthSpec {
    pub fn new(b_true: Array2<f64>, sigma: SymMatrix) -> Result<Self> {
        if b_true.ncols() != sigma.dim() {
            return Err(Error::InvalidInput(format!(
                "true directions live in R^{} but scatter is {}x{}",
                b_true.ncols(),
                sigma.dim(),
                sigma.dim()
            )));
        }
        orthonormal_rows(b_true.view())?;
        cholesky(&sigma)?;
        Ok(Self { b_true, sigma })
    }

    pub fn k(&self) -> usize {
        self.b_true.nrows()
    }
}

/// `max over beta in span(B)` of `(b S beta')^2 / (b S b' . beta S beta')`,
/// computed as `b S B' (B S B')^-1 B S b' / (b S b')`.
pub fn r_squared(b: ArrayView1<'_, f64>, truth: &TruthSpec) -> Result<f64> {
    let sigma = truth.sigma.as_array();
    if b.len() != sigma.nrows() {
        return Err(Error::InvalidInput(format!(
            "direction has length {} but truth lives in R^{}",
            b.len(),
            sigma.nrows()
        )));
    }
    let sb = sigma.dot(&b);
    let bsb = b.dot(&sb);
    if !(bsb > DEGENERATE_DIRECTION) {
        return Err(Error::DegenerateDirection);
    }
    let cross = truth.b_true.dot(&sb);
    let gram = truth.b_true.dot(sigma).dot(&truth.b_true.t());
    let l = cholesky(&SymMatrix::from_upper(gram)?)?;
    let solved = cholesky_solve(&l, &cross);
    Ok((cross.dot(&solved) / bsb).clamp(0.0, 1.0))
}

/// `R^2` of each fitted direction.
pub fn r_squared_per_direction(fit: &SdrFit, truth: &TruthSpec) -> Result<Vec<f64>> {
    if fit.k != truth.k() {
        return Err(Error::InvalidInput(format!(
            "fit has {} directions but truth has {}",
            fit.k,
            truth.k()
        )));
    }
    fit.directions
        .rows()
        .into_iter()
        .map(|row| r_squared(row, truth))
        .collect()
}

pub fn avg_r_squared(fit: &SdrFit, truth: &TruthSpec) -> Result<f64> {
    let r2 = r_squared_per_direction(fit, truth)?;
    Ok(r2.iter().sum::<f64>() / r2.len() as f64)
}

/// Least-squares fit with intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsReport {
    /// Intercept first, then one slope per design column.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub adjusted_r2: f64,
    pub f_statistic: f64,
    /// `(q, n - q - 1)`.
    pub dof: (usize, usize),
    pub n_used: usize,
}

pub fn ols_fit(design: ArrayView2<'_, f64>, response: ArrayView1<'_, f64>) -> Result<OlsReport> {
    let (n, q) = design.dim();
    if response.len() != n {
        return Err(Error::InvalidInput(format!(
            "design has {n} rows but response has {}",
            response.len()
        )));
    }
    if q == 0 || n <= q + 1 {
        return Err(Error::InvalidInput(format!(
            "need n > q + 1 for OLS, got n = {n}, q = {q}"
        )));
    }
    let x_mean = design.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = response.mean().expect("n > 0");
    let xc = &design - &x_mean.view().insert_axis(Axis(0));
    let yc = response.mapv(|v| v - y_mean);

    // thin QR by modified Gram-Schmidt on the centred columns
    let mut qmat = xc.clone();
    let mut r = Array2::<f64>::zeros((q, q));
    for j in 0..q {
        let original = qmat.column(j).dot(&qmat.column(j)).sqrt();
        for i in 0..j {
            let proj = qmat.column(i).dot(&qmat.column(j));
            r[[i, j]] = proj;
            let qi = qmat.column(i).to_owned();
            qmat.column_mut(j).scaled_add(-proj, &qi);
        }
        let norm = qmat.column(j).dot(&qmat.column(j)).sqrt();
        if !(norm > OLS_PIVOT_TOL * original) || original == 0.0 {
            return Err(Error::RankDeficientDesign { column: j });
        }
        r[[j, j]] = norm;
        qmat.column_mut(j).mapv_inplace(|v| v / norm);
    }
    let qty = qmat.t().dot(&yc);
    let mut slopes = Array1::<f64>::zeros(q);
    for i in (0..q).rev() {
        let mut s = qty[i];
        for k in (i + 1)..q {
            s -= r[[i, k]] * slopes[k];
        }
        slopes[i] = s / r[[i, i]];
    }

    let fitted = xc.dot(&slopes);
    let sse: f64 = (&yc - &fitted).mapv(|v| v * v).sum();
    let sst: f64 = yc.mapv(|v| v * v).sum();
    if !(sst > 0.0) {
        return Err(Error::DegenerateSample);
    }
    let r2 = (1.0 - sse / sst).clamp(0.0, 1.0);
    let df_resid = n - q - 1;
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df_resid as f64;
    let f_statistic = if r2 >= 1.0 {
        f64::INFINITY
    } else {
        (r2 / q as f64) / ((1.0 - r2) / df_resid as f64)
    };

    let mut coefficients = vec![y_mean - x_mean.dot(&slopes)];
    coefficients.extend(slopes.iter().copied());
    Ok(OlsReport {
        coefficients,
        r2,
        adjusted_r2,
        f_statistic,
        dof: (q, df_resid),
        n_used: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub reject_at_05: bool,
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn mean_sd(sample: ArrayView1<'_, f64>) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.sum() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One-sample Kolmogorov-Smirnov test of the standardized sample against
/// the standard normal, with the asymptotic 5% threshold `1.358 / sqrt(n)`.
pub fn ks_normality(sample: ArrayView1<'_, f64>) -> Result<KsResult> {
    let n = sample.len();
    if n < 20 {
        return Err(Error::InvalidInput(format!(
            "KS test needs n >= 20, got {n}"
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "sample contains non-finite values".into(),
        ));
    }
    let (mean, sd) = mean_sd(sample);
    if !(sd >= 1e-14) {
        return Err(Error::DegenerateSample);
    }
    let mut z: Vec<f64> = sample.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let f = standard_normal_cdf(zi);
            (((i + 1) as f64 / nf) - f).max(f - i as f64 / nf)
        })
        .fold(0.0_f64, f64::max);
    Ok(KsResult {
        statistic,
        reject_at_05: statistic > KS_CRITICAL_05 / nf.sqrt(),
    })
}

/// Sample excess kurtosis `m4 / m2^2 - 3` from central moments.
pub fn excess_kurtosis(sample: ArrayView1<'_, f64>) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "kurtosis needs at least 2 values".into(),
        ));
    }
    let mean = sample.sum() / n as f64;
    let (m2, m4) = sample.iter().fold((0.0, 0.0), |(a, b), v| {
        let d2 = (v - mean).powi(2);
        (a + d2, b + d2 * d2)
    });
    let m2 = m2 / n as f64;
    let m4 = m4 / n as f64;
    if !(m2 > 0.0) {
        return Err(Error::DegenerateSample);
    }
    Ok(m4 / (m2 * m2) - 3.0)
}

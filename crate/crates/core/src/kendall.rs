//! Multivariate Kendall's tau matrix: the average over all unordered pairs of
//! the outer product of the normalized pairwise difference.
//!
//! The pair loop is split into fixed blocks of outer rows. Each block is
//! summed in lexicographic pair order and the block partials are combined by
//! a fixed pairwise tree, so the result does not depend on thread count.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, SymMatrix};
use crate::par::{map_indexed, tree_reduce, Execution};

const ROW_BLOCK: usize = 32;
const ZERO_DISTANCE_REL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroDistancePolicy {
    /// Drop coincident pairs and average over the rest.
    #[default]
    Skip,
    Error,
}

/// Trace-one positive semidefinite Kendall's tau matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMatrix {
    m: SymMatrix,
    pairs_used: usize,
}

impl TauMatrix {
    pub fn matrix(&self) -> &SymMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Number of pairs that entered the average.
    pub fn pairs_used(&self) -> usize {
        self.pairs_used
    }

    /// Checks trace one and positive semidefiniteness at round-off tolerance.
    pub fn check_invariants(&self) -> Result<()> {
        let tr = self.m.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidInput(format!("tau matrix trace {tr} != 1")));
        }
        let eig = sym_eig(&self.m)?;
        let min = eig.eigenvalues[self.dim() - 1];
        if min < PSD_TOL {
            return Err(Error::InvalidInput(format!(
                "tau matrix eigenvalue {min} < 0"
            )));
        }
        Ok(())
    }
}

struct Partial {
    upper: Vec<f64>,
    pairs: usize,
    duplicate: Option<(usize, usize)>,
}

fn combine(mut a: Partial, b: Partial) -> Partial {
    for (x, y) in a.upper.iter_mut().zip(&b.upper) {
        *x += *y;
    }
    a.pairs += b.pairs;
    a.duplicate = match (a.duplicate, b.duplicate) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    a
}

fn block_partial(x: ArrayView2<'_, f64>, rows: std::ops::Range<usize>, norms: &[f64]) -> Partial {
    let p = x.ncols();
    let mut upper = vec![0.0; p * (p + 1) / 2];
    let mut diff = vec![0.0; p];
    let mut pairs = 0;
    let mut duplicate = None;
    for i in rows {
        let xi = x.row(i);
        for j in 0..i {
            let xj = x.row(j);
            let mut sq = 0.0;
            for (d, (a, b)) in diff.iter_mut().zip(xi.iter().zip(xj.iter())) {
                *d = a - b;
                sq += *d * *d;
            }
            if sq.sqrt() < ZERO_DISTANCE_REL * (1.0 + norms[i]) {
                if duplicate.is_none() {
                    duplicate = Some((j, i));
                }
                continue;
            }
            let inv = 1.0 / sq;
            let mut k = 0;
            for r in 0..p {
                let dr = diff[r] * inv;
                for dc in &diff[r..p] {
                    upper[k] += dr * dc;
                    k += 1;
                }
            }
            pairs += 1;
        }
    }
    Partial {
        upper,
        pairs,
        duplicate,
    }
}

/// Sample multivariate Kendall's tau of the rows of `x`.
pub fn kendall_tau(x: ArrayView2<'_, f64>, policy: ZeroDistancePolicy) -> Result<TauMatrix> {
    kendall_tau_with(x, policy, Execution::default())
}

/// [`kendall_tau`] with an explicit execution strategy.
pub fn kendall_tau_with(
    x: ArrayView2<'_, f64>,
    policy: ZeroDistancePolicy,
    exec: Execution,
) -> Result<TauMatrix> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "Kendall's tau needs n >= 2, got {n}"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidInput("Kendall's tau needs p >= 1".into()));
    }
    let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let blocks = n.div_ceil(ROW_BLOCK);
    let partials = map_indexed(blocks, exec, |b| {
        let start = b * ROW_BLOCK;
        block_partial(x, start..(start + ROW_BLOCK).min(n), &norms)
    });
    let total = tree_reduce(partials, combine).expect("at least one block");

    if let (ZeroDistancePolicy::Error, Some((first, second))) = (policy, total.duplicate) {
        return Err(Error::DuplicatePoints { first, second });
    }
    if total.pairs == 0 {
        return Err(Error::AllPairsDegenerate);
    }
    let scale = total.pairs as f64;
    let mut m = Array2::<f64>::zeros((p, p));
    let mut k = 0;
    for r in 0..p {
        for c in r..p {
            m[[r, c]] = total.upper[k] / scale;
            k += 1;
        }
    }
    Ok(TauMatrix {
        m: SymMatrix::from_upper(m)?,
        pairs_used: total.pairs,
    })
}

/// Monte Carlo eigenvalues of the population tau matrix of an elliptical law
/// whose scatter has eigenvalues `sigma_eigenvalues`:
/// `lambda_j(M) = E[ l_j Q_j^2 / sum_k l_k Q_k^2 ]` with `Q` standard normal.
pub fn population_tau_eigenvalues_mc<R: Rng + ?Sized>(
    sigma_eigenvalues: &[f64],
    mc_draws: usize,
    rng: &mut R,
) -> Result<Array1<f64>> {
    let p = sigma_eigenvalues.len();
    if p == 0 || sigma_eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput(
            "scatter eigenvalues must be positive".into(),
        ));
    }
    if mc_draws == 0 {
        return Err(Error::InvalidInput("mc_draws must be positive".into()));
    }
    if p == 1 {
        return Ok(Array1::ones(1));
    }
    let mut acc = Array1::<f64>::zeros(p);
    let mut w = vec![0.0; p];
    for _ in 0..mc_draws {
        let mut total = 0.0;
        for (wj, &l) in w.iter_mut().zip(sigma_eigenvalues) {
            let q: f64 = StandardNormal.sample(rng);
            *wj = l * q * q;
            total += *wj;
        }
        for (a, wj) in acc.iter_mut().zip(&w) {
            *a += wj / total;
        }
    }
    Ok(acc / mc_draws as f64)
}

/// Worst misalignment `1 - |<v_j(M_hat), v_j(Sigma)>|` over eigenpairs of
/// `sigma` separated from both neighbours by more than `0.05 * lambda_max`.
/// Returns 0 when no eigenvalue is separated.
pub fn tau_vs_covariance_alignment(x: ArrayView2<'_, f64>, sigma: &SymMatrix) -> Result<f64> {
    let (n, p) = x.dim();
    if p != sigma.dim() {
        return Err(Error::InvalidInput(format!(
            "data has {p} columns but scatter is {}x{}",
            sigma.dim(),
            sigma.dim()
        )));
    }
    if n < p + 1 {
        return Err(Error::InvalidInput(format!(
            "need n >= p + 1, got n = {n}, p = {p}"
        )));
    }
    if p == 1 {
        return Ok(0.0);
    }
    let tau = kendall_tau(x, ZeroDistancePolicy::Skip)?;
    let est = sym_eig(tau.matrix())?;
    let pop = sym_eig(sigma)?;
    let lam = &pop.eigenvalues;
    let gap = 0.05 * lam[0].abs();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        let below = j + 1 >= p || lam[j] - lam[j + 1] > gap;
        let above = j == 0 || lam[j - 1] - lam[j] > gap;
        if below && above {
            let cos = est
                .eigenvectors
                .column(j)
                .dot(&pop.eigenvectors.column(j))
                .abs();
            worst = worst.max(1.0 - cos);
        }
    }
    Ok(worst)
}

/// Column means, used to centre data before whitening.
pub(crate) fn column_means(x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).expect("non-empty")
}

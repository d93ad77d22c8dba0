//! Simulation models, the Monte Carlo replicate runner, table rendering and
//! the slice-tau convergence experiment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::elliptical::{replicate_rng, sample_elliptical, Dataset, EllipticalSpec, GeneratorKind};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, SymMatrix};
use crate::metrics::{r_squared_per_direction, TruthSpec};
use crate::par::{map_indexed, Execution};
use crate::sdr::{fit, inverse_regression_tau, Method, Standardization};

/// Noise scale shared by every model.
pub const SIGMA_NOISE: f64 = 0.5;

/// Variance of `|X2 + X3| + zeta` when `(X2, X3)` is bivariate normal with
/// unit variances and correlation 0.5 and `zeta ~ N(0, 1)`.
const B4_FIRST_VARIANCE: f64 = 1.0 + 3.0 * (1.0 - 2.0 / std::f64::consts::PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    B4,
}

impl ModelId {
    pub const ALL: [ModelId; 7] = [
        ModelId::A1,
        ModelId::A2,
        ModelId::A3,
        ModelId::B1,
        ModelId::B2,
        ModelId::B3,
        ModelId::B4,
    ];

    /// Number of true directions.
    pub fn k(self) -> usize {
        match self {
            ModelId::A1 | ModelId::A2 | ModelId::A3 => 1,
            _ => 2,
        }
    }

    /// Dimension used in the reference grids.
    pub fn default_p(self) -> usize {
        match self {
            ModelId::B2 | ModelId::B3 => 5,
            _ => 10,
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown model `{s}`")))
    }
}

/// Covariate distributions used in the simulation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistName {
    Normal,
    Laplace,
    Logistic,
    T3,
    T2,
    Cauchy,
    /// Generating variable `F(p, 1)`.
    Ec1,
}

impl DistName {
    pub const ALL: [DistName; 7] = [
        DistName::Normal,
        DistName::Laplace,
        DistName::Logistic,
        DistName::T3,
        DistName::T2,
        DistName::Cauchy,
        DistName::Ec1,
    ];

    pub fn generator(self, p: usize) -> GeneratorKind {
        match self {
            DistName::Normal => GeneratorKind::Normal,
            DistName::Laplace => GeneratorKind::Laplace,
            DistName::Logistic => GeneratorKind::Logistic,
            DistName::T3 => GeneratorKind::StudentT { nu: 3.0 },
            DistName::T2 => GeneratorKind::StudentT { nu: 2.0 },
            DistName::Cauchy => GeneratorKind::Cauchy,
            DistName::Ec1 => GeneratorKind::FRatio {
                d1: p as f64,
                d2: 1.0,
            },
        }
    }

    fn label(self) -> &'static str {
        match self {
            DistName::Normal => "normal",
            DistName::Laplace => "Laplace",
            DistName::Logistic => "logistic",
            DistName::T3 => "t(3)",
            DistName::T2 => "t(2)",
            DistName::Cauchy => "Cauchy",
            DistName::Ec1 => "EC1",
        }
    }
}

impl fmt::Display for DistName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistName::Normal => "normal",
            DistName::Laplace => "laplace",
            DistName::Logistic => "logistic",
            DistName::T3 => "t3",
            DistName::T2 => "t2",
            DistName::Cauchy => "cauchy",
            DistName::Ec1 => "ec1",
        })
    }
}

impl FromStr for DistName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['(', ')'], "");
        match key.as_str() {
            "t1" => return Ok(DistName::Cauchy),
            "gaussian" => return Ok(DistName::Normal),
            _ => {}
        }
        DistName::ALL
            .into_iter()
            .find(|d| d.to_string() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown distribution `{s}`")))
    }
}

/// A fully specified simulation model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub id: ModelId,
    pub p: usize,
    pub dist: DistName,
    pub generator: GeneratorKind,
    /// Scatter of the covariates, also used as the `R^2` inner product.
    pub sigma: SymMatrix,
    pub b_true: Array2<f64>,
    pub sigma_noise: f64,
    /// Elliptical law of the covariates; for B4 this is the law of
    /// `(X2, ..., Xp)`.
    law: EllipticalSpec,
}

impl ModelSpec {
    /// B2 and B3 always use `p = 5` regardless of the requested dimension.
    pub fn new(id: ModelId, p: usize, dist: DistName) -> Result<Self> {
        let p = match id {
            ModelId::B2 | ModelId::B3 => 5,
            _ => p,
        };
        let min_p = match id {
            ModelId::A1 | ModelId::A2 | ModelId::A3 => 1,
            ModelId::B1 => 2,
            _ => 4,
        };
        if p < min_p {
            return Err(Error::InvalidInput(format!(
                "model {id} needs p >= {min_p}, got {p}"
            )));
        }
        let unit = |j: usize| {
            let mut v = Array1::<f64>::zeros(p);
            v[j] = 1.0;
            v
        };
        let stack = |rows: &[Array1<f64>]| {
            let mut b = Array2::<f64>::zeros((rows.len(), p));
            for (i, r) in rows.iter().enumerate() {
                b.row_mut(i).assign(r);
            }
            b
        };
        let (sigma, b_true, law_sigma) = match id {
            ModelId::A1 | ModelId::A2 | ModelId::A3 => (
                SymMatrix::identity(p),
                stack(&[unit(0)]),
                SymMatrix::identity(p),
            ),
            ModelId::B1 => (
                SymMatrix::identity(p),
                stack(&[unit(0), unit(1)]),
                SymMatrix::identity(p),
            ),
            ModelId::B2 | ModelId::B3 => {
                let sigma = SymMatrix::diag(&[2.0, 2.0, 2.0, 4.0, 2.0]);
                let b2 = &unit(1) + &unit(2);
                (sigma.clone(), stack(&[unit(0), b2]), sigma)
            }
            ModelId::B4 => {
                let mut b1 = Array1::<f64>::zeros(p);
                let mut b2 = Array1::<f64>::zeros(p);
                b1.slice_mut(s![..4]).fill(0.5);
                b2.slice_mut(s![..4])
                    .assign(&ndarray::array![0.5, -0.5, 0.5, -0.5]);
                let ar = SymMatrix::ar1(p - 1, 0.5);
                let mut full = Array2::<f64>::zeros((p, p));
                full[[0, 0]] = B4_FIRST_VARIANCE;
                full.slice_mut(s![1.., 1..]).assign(ar.as_array());
                (SymMatrix::new(full)?, stack(&[b1, b2]), ar)
            }
        };
        let generator = dist.generator(law_sigma.dim());
        let law = EllipticalSpec::centered(law_sigma, generator)?;
        Ok(Self {
            id,
            p,
            dist,
            generator,
            sigma,
            b_true,
            sigma_noise: SIGMA_NOISE,
            law,
        })
    }

    pub fn k(&self) -> usize {
        self.id.k()
    }

    pub fn truth(&self) -> TruthSpec {
        TruthSpec {
            b_true: self.b_true.clone(),
            sigma: self.sigma.clone(),
        }
    }

    /// Response for one covariate row and one standard normal noise draw.
    pub fn response(&self, x: ArrayView1<'_, f64>, eps: f64) -> f64 {
        let s = self.sigma_noise;
        let u1 = self.b_true.row(0).dot(&x);
        match self.id {
            ModelId::A1 => 1.0 / (0.5 + (u1 + 1.5).powi(2)) + s * eps,
            ModelId::A2 => 0.5 + (u1 + 1.5).powi(2) + s * eps,
            ModelId::A3 => (u1 + 2.0) * s * eps,
            _ => {
                let u2 = self.b_true.row(1).dot(&x);
                match self.id {
                    ModelId::B1 => u1 / (0.5 + (u2 + 1.5).powi(2)) + s * eps,
                    ModelId::B2 => 4.0 + u1 + (u2 + 2.0) * s * eps,
                    ModelId::B3 => (4.0 + u1) * (u2 + 2.0) + s * eps,
                    ModelId::B4 => u1 * u1 + u2.abs() + s * eps,
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Draws `n` observations from `model`.
pub fn gen_dataset<R: Rng + ?Sized>(model: &ModelSpec, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let x = match model.id {
        ModelId::B4 => {
            let tail = sample_elliptical(&model.law, n, rng)?;
            let mut x = Array2::<f64>::zeros((n, model.p));
            x.slice_mut(s![.., 1..]).assign(&tail);
            for i in 0..n {
                let zeta: f64 = StandardNormal.sample(rng);
                x[[i, 0]] = (tail[[i, 0]] + tail[[i, 1]]).abs() + zeta;
            }
            x
        }
        _ => sample_elliptical(&model.law, n, rng)?,
    };
    let y = Array1::from_iter(x.rows().into_iter().map(|row| {
        let eps: f64 = StandardNormal.sample(rng);
        model.response(row, eps)
    }));
    if n == 1 {
        // single observations are allowed here even though fitting needs more
        return Ok(Dataset { x, y });
    }
    Dataset::new(x, y)
}

/// One cell of a simulation table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellConfig {
    pub model: ModelId,
    pub dist: DistName,
    pub n: usize,
    pub p: usize,
    pub h: usize,
    pub reps: usize,
    pub method: Method,
    pub base_seed: u64,
}

/// Mean and spread of `R^2` across replicates for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub model: ModelId,
    pub dist: DistName,
    pub n: usize,
    pub p: usize,
    pub h: usize,
    pub k: usize,
    pub method: Method,
    pub seed: u64,
    pub rep_count: usize,
    pub excluded: usize,
    pub r2_mean: Vec<f64>,
    pub r2_sd: Vec<f64>,
    pub avg_r2: f64,
}

impl ReplicateSummary {
    /// Monte Carlo standard error of the mean `R^2` of direction `j`.
    pub fn standard_error(&self, j: usize) -> f64 {
        let used = self.rep_count - self.excluded;
        self.r2_sd[j] / (used as f64).sqrt()
    }
}

/// The machine-readable form of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub model: ModelId,
    pub dist: DistName,
    pub n: usize,
    pub p: usize,
    pub h: usize,
    pub k: usize,
    pub method: Method,
    pub rep_count: usize,
    pub excluded: usize,
    pub r2_mean: Vec<f64>,
    pub r2_sd: Vec<f64>,
    pub avg_r2: f64,
}

impl From<&ReplicateSummary> for CellRecord {
    fn from(s: &ReplicateSummary) -> Self {
        Self {
            model: s.model,
            dist: s.dist,
            n: s.n,
            p: s.p,
            h: s.h,
            k: s.k,
            method: s.method,
            rep_count: s.rep_count,
            excluded: s.excluded,
            r2_mean: s.r2_mean.clone(),
            r2_sd: s.r2_sd.clone(),
            avg_r2: s.avg_r2,
        }
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_cell(cfg: &CellConfig) -> Result<ReplicateSummary> {
    run_cell_with(cfg, Execution::default())
}

/// Runs `cfg.reps` independent replicates; replicate `r` draws from the
/// stream seeded with `base_seed + r`. Replicates whose fit fails are
/// excluded and counted; more than 10% failures is an error.
pub fn run_cell_with(cfg: &CellConfig, exec: Execution) -> Result<ReplicateSummary> {
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let model = ModelSpec::new(cfg.model, cfg.p, cfg.dist)?;
    let k = model.k();
    let truth = model.truth();
    if cfg.n < 2 * cfg.h {
        return Err(Error::TooFewPoints { n: cfg.n, h: cfg.h });
    }
    if k > model.p.min(cfg.h.saturating_sub(1)) {
        return Err(Error::KTooLarge {
            k,
            max: model.p.min(cfg.h.saturating_sub(1)),
        });
    }

    let outcomes: Vec<Option<Vec<f64>>> = map_indexed(cfg.reps, exec, |r| {
        let mut rng = replicate_rng(cfg.base_seed, r as u64);
        let data = gen_dataset(&model, cfg.n, &mut rng).ok()?;
        let f = fit(cfg.method, &data, cfg.h, k).ok()?;
        r_squared_per_direction(&f, &truth).ok()
    });

    let kept: Vec<&Vec<f64>> = outcomes.iter().flatten().collect();
    let excluded = cfg.reps - kept.len();
    if kept.is_empty() || excluded * 10 > cfg.reps {
        return Err(Error::TooManyFailures {
            failed: excluded,
            total: cfg.reps,
        });
    }
    let mut r2_mean = Vec::with_capacity(k);
    let mut r2_sd = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<f64> = kept.iter().map(|v| v[j]).collect();
        let (m, sd) = mean_and_sd(&col);
        r2_mean.push(m);
        r2_sd.push(sd);
    }
    let avg_r2 = r2_mean.iter().sum::<f64>() / k as f64;
    Ok(ReplicateSummary {
        model: cfg.model,
        dist: cfg.dist,
        n: cfg.n,
        p: model.p,
        h: cfg.h,
        k,
        method: cfg.method,
        seed: cfg.base_seed,
        rep_count: cfg.reps,
        excluded,
        r2_mean,
        r2_sd,
        avg_r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableLayout {
    /// Single-index models: rows model x method, columns distributions.
    Table1,
    /// One model and distribution: blocks by n, columns H x p.
    Table2,
    /// Two-direction models: rows model x method, columns distribution x
    /// (R^2(b1), R^2(b2), average).
    Table3_4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableOutput {
    pub text: String,
    pub records: Vec<CellRecord>,
}

impl TableOutput {
    /// One JSON object per line.
    pub fn json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

fn sorted<T: Ord + Copy>(it: impl Iterator<Item = T>) -> Vec<T> {
    it.collect::<BTreeSet<_>>().into_iter().collect()
}

fn fmt_mean(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_sd(v: f64) -> String {
    format!("({v:.2})")
}

fn render_rows(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(|r| r.as_slice())) {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header, &mut out);
    let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        line(r, &mut out);
    }
    out
}

/// Renders the cells as a text table and JSON records. The grid is the
/// product of the distinct values present along each axis of the layout;
/// every combination must be present exactly once.
pub fn emit_table(cells: &[ReplicateSummary], layout: TableLayout) -> Result<TableOutput> {
    if cells.is_empty() {
        return Err(Error::MissingCell("no cells supplied".into()));
    }
    let records = cells.iter().map(CellRecord::from).collect();
    let text = match layout {
        TableLayout::Table1 => table_by_model(cells, false)?,
        TableLayout::Table3_4 => table_by_model(cells, true)?,
        TableLayout::Table2 => table_by_size(cells)?,
    };
    Ok(TableOutput { text, records })
}

fn table_by_model(cells: &[ReplicateSummary], two_dirs: bool) -> Result<String> {
    let mut index: BTreeMap<(ModelId, Method, DistName), &ReplicateSummary> = BTreeMap::new();
    for c in cells {
        index.insert((c.model, c.method, c.dist), c);
    }
    let models = sorted(cells.iter().map(|c| c.model));
    let methods = sorted(cells.iter().map(|c| c.method));
    let dists = sorted(cells.iter().map(|c| c.dist));

    let mut header = vec!["Distr of X".to_string()];
    for d in &dists {
        if two_dirs {
            header.push(format!("{} R2(b1)", d.label()));
            header.push(format!("{} R2(b2)", d.label()));
            header.push(format!("{} R2", d.label()));
        } else {
            header.push(d.label().to_string());
        }
    }
    let mut out = String::new();
    for m in &models {
        let mut rows = Vec::new();
        for method in &methods {
            let mut means = vec![method.to_string()];
            let mut sds = vec![String::new()];
            for d in &dists {
                let c = index.get(&(*m, *method, *d)).ok_or_else(|| {
                    Error::MissingCell(format!("model {m}, method {method}, distribution {d}"))
                })?;
                if two_dirs {
                    if c.k < 2 {
                        return Err(Error::MissingCell(format!(
                            "model {m} has a single direction"
                        )));
                    }
                    means.extend([
                        fmt_mean(c.r2_mean[0]),
                        fmt_mean(c.r2_mean[1]),
                        fmt_mean(c.avg_r2),
                    ]);
                    sds.extend([fmt_sd(c.r2_sd[0]), fmt_sd(c.r2_sd[1]), String::new()]);
                } else {
                    means.push(fmt_mean(c.r2_mean[0]));
                    sds.push(fmt_sd(c.r2_sd[0]));
                }
            }
            rows.push(means);
            rows.push(sds);
        }
        let _ = writeln!(out, "Model ({m})");
        out.push_str(&render_rows(&header, &rows));
        out.push('\n');
    }
    Ok(out)
}

fn table_by_size(cells: &[ReplicateSummary]) -> Result<String> {
    let mut index: BTreeMap<(usize, Method, usize, usize), &ReplicateSummary> = BTreeMap::new();
    for c in cells {
        index.insert((c.n, c.method, c.h, c.p), c);
    }
    let ns = sorted(cells.iter().map(|c| c.n));
    let methods = sorted(cells.iter().map(|c| c.method));
    let hs = sorted(cells.iter().map(|c| c.h));
    let ps = sorted(cells.iter().map(|c| c.p));
    let k = cells.iter().map(|c| c.k).min().unwrap_or(1);

    let mut header = vec!["H / p".to_string(), String::new()];
    for h in &hs {
        for p in &ps {
            header.push(format!("{h}/{p}"));
        }
    }
    let mut out = String::new();
    for n in &ns {
        let mut rows = Vec::new();
        for method in &methods {
            for j in 0..k {
                let mut row = vec![
                    if j == 0 {
                        method.to_string()
                    } else {
                        String::new()
                    },
                    format!("R2(b{})", j + 1),
                ];
                for h in &hs {
                    for p in &ps {
                        let c = index.get(&(*n, *method, *h, *p)).ok_or_else(|| {
                            Error::MissingCell(format!("n {n}, method {method}, H {h}, p {p}"))
                        })?;
                        row.push(fmt_mean(c.r2_mean[j]));
                    }
                }
                rows.push(row);
            }
        }
        let _ = writeln!(out, "n = {n}");
        out.push_str(&render_rows(&header, &rows));
        out.push('\n');
    }
    Ok(out)
}

/// The four reference simulation grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceTable {
    Table1,
    Table2,
    Table3,
    Table4,
}

impl ReferenceTable {
    pub const ALL: [ReferenceTable; 4] = [
        ReferenceTable::Table1,
        ReferenceTable::Table2,
        ReferenceTable::Table3,
        ReferenceTable::Table4,
    ];

    pub fn layout(self) -> TableLayout {
        match self {
            ReferenceTable::Table1 => TableLayout::Table1,
            ReferenceTable::Table2 => TableLayout::Table2,
            ReferenceTable::Table3 | ReferenceTable::Table4 => TableLayout::Table3_4,
        }
    }

    /// Every cell of the table, both methods.
    pub fn grid(self, reps: usize, base_seed: u64) -> Vec<CellConfig> {
        let methods = [Method::Sir, Method::Esir];
        let cell = |model: ModelId, dist, n, p, h, method| CellConfig {
            model,
            dist,
            n,
            p,
            h,
            reps,
            method,
            base_seed,
        };
        let mut out = Vec::new();
        let by_model = |models: &[ModelId], dists: &[DistName], out: &mut Vec<CellConfig>| {
            for &m in models {
                for &d in dists {
                    for method in methods {
                        out.push(cell(m, d, 400, m.default_p(), 10, method));
                    }
                }
            }
        };
        match self {
            ReferenceTable::Table1 => by_model(
                &[ModelId::A1, ModelId::A2, ModelId::A3],
                &[
                    DistName::Normal,
                    DistName::Laplace,
                    DistName::Logistic,
                    DistName::T3,
                    DistName::T2,
                    DistName::Cauchy,
                ],
                &mut out,
            ),
            ReferenceTable::Table3 => by_model(
                &[ModelId::B1, ModelId::B2, ModelId::B3, ModelId::B4],
                &[DistName::Normal, DistName::Logistic, DistName::Ec1],
                &mut out,
            ),
            ReferenceTable::Table4 => by_model(
                &[ModelId::B1, ModelId::B2, ModelId::B3, ModelId::B4],
                &[DistName::T3, DistName::T2, DistName::Cauchy],
                &mut out,
            ),
            ReferenceTable::Table2 => {
                for n in [120, 200, 400] {
                    for h in [5, 10, 20, 40] {
                        for p in [5, 10, 30] {
                            for method in methods {
                                out.push(cell(ModelId::B1, DistName::Cauchy, n, p, h, method));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for ReferenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Number of slices as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceRule {
    Fixed(usize),
    /// `floor(sqrt(n))`.
    Sqrt,
}

impl SliceRule {
    pub fn slices(self, n: usize) -> usize {
        match self {
            SliceRule::Fixed(h) => h,
            SliceRule::Sqrt => (n as f64).sqrt().floor() as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub model: ModelId,
    pub dist: DistName,
    pub p: usize,
    pub n_grid: Vec<usize>,
    pub slice_rule: SliceRule,
    pub oracle_n: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub mode: Standardization,
    pub oracle: OracleRule,
}

/// How the target `M_{E(X|Y)}` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OracleRule {
    /// Slice-mean tau at `oracle_n` draws with `floor(sqrt(oracle_n))` slices.
    #[default]
    Sliced,
    /// Closed form for single-index models with isotropic scatter: every
    /// inverse-regression difference is parallel to one vector `v`, so the
    /// target is `v v^T / |v|^2` at any slice count.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub h: usize,
    pub mean_error: f64,
    pub standard_error: f64,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub oracle: OracleRule,
    /// Zero for the exact oracle.
    pub oracle_n: usize,
    pub oracle_h: usize,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceResult {
    /// Each step may rise by at most one standard error of the later point.
    pub fn is_non_increasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].mean_error <= w[0].mean_error + w[1].standard_error)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[1].mean_error < w[0].mean_error)
    }
}

/// Mean spectral distance between the slice-mean tau matrix at each sample
/// size and a large-sample oracle built with `floor(sqrt(oracle_n))` slices.
pub fn convergence_experiment(cfg: &ConvergenceConfig) -> Result<ConvergenceResult> {
    convergence_experiment_with(cfg, Execution::default())
}

pub fn convergence_experiment_with(
    cfg: &ConvergenceConfig,
    exec: Execution,
) -> Result<ConvergenceResult> {
    let max_n = cfg
        .n_grid
        .iter()
        .copied()
        .max()
        .ok_or_else(|| Error::InvalidInput("convergence grid is empty".into()))?;
    if cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "n grid must be strictly ascending".into(),
        ));
    }
    if cfg.oracle == OracleRule::Sliced && cfg.oracle_n < 10 * max_n {
        return Err(Error::InvalidInput(format!(
            "oracle sample size {} must be at least 10 x {max_n}",
            cfg.oracle_n
        )));
    }
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let model = ModelSpec::new(cfg.model, cfg.p, cfg.dist)?;

    let (oracle, oracle_n, oracle_h) = match cfg.oracle {
        OracleRule::Sliced => {
            // the oracle stream sits past every replicate index
            let oracle_index = (cfg.n_grid.len() * cfg.reps) as u64;
            let oracle_h = SliceRule::Sqrt.slices(cfg.oracle_n);
            let data = gen_dataset(
                &model,
                cfg.oracle_n,
                &mut replicate_rng(cfg.base_seed, oracle_index),
            )?;
            let m = inverse_regression_tau(&data, oracle_h, cfg.mode)?.into_matrix();
            (m, cfg.oracle_n, oracle_h)
        }
        OracleRule::Exact => (single_index_target(&model)?, 0, 0),
    };
    let mut points = Vec::with_capacity(cfg.n_grid.len());
    for (g, &n) in cfg.n_grid.iter().enumerate() {
        let h = cfg.slice_rule.slices(n);
        let errors: Vec<Option<f64>> = map_indexed(cfg.reps, exec, |r| {
            let idx = (g * cfg.reps + r) as u64;
            let data = gen_dataset(&model, n, &mut replicate_rng(cfg.base_seed, idx)).ok()?;
            let m_hat = inverse_regression_tau(&data, h, cfg.mode).ok()?;
            spectral_norm(&m_hat.matrix().sub(&oracle).ok()?).ok()
        });
        let kept: Vec<f64> = errors.iter().flatten().copied().collect();
        let excluded = cfg.reps - kept.len();
        if kept.is_empty() || excluded * 10 > cfg.reps {
            return Err(Error::TooManyFailures {
                failed: excluded,
                total: cfg.reps,
            });
        }
        let (mean_error, sd) = mean_and_sd(&kept);
        points.push(ConvergencePoint {
            n,
            h,
            mean_error,
            standard_error: sd / (kept.len() as f64).sqrt(),
            excluded,
        });
    }
    Ok(ConvergenceResult {
        oracle: cfg.oracle,
        oracle_n,
        oracle_h,
        points,
    })
}

/// `v v^T / |v|^2` with `v = Sigma beta^T`. Whitening by any multiple of
/// the identity leaves `v` unchanged up to scale, so one target serves both
/// modes.
fn single_index_target(model: &ModelSpec) -> Result<SymMatrix> {
    if model.k() != 1 {
        return Err(Error::InvalidInput(format!(
            "exact oracle needs a single-index model, {} has {} directions",
            model.id,
            model.k()
        )));
    }
    let sigma = model.sigma.as_array();
    let p = model.p;
    let s0 = sigma[[0, 0]];
    let isotropic = (0..p).all(|i| (0..p).all(|j| sigma[[i, j]] == if i == j { s0 } else { 0.0 }));
    if !isotropic {
        return Err(Error::InvalidInput(format!(
            "exact oracle needs isotropic scatter, model {} has none",
            model.id
        )));
    }
    let v = sigma.dot(&model.b_true.row(0));
    let norm2 = v.dot(&v);
    let outer = Array2::from_shape_fn((p, p), |(i, j)| v[i] * v[j] / norm2);
    Ok(SymMatrix::new(outer)?)
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::elliptical::Dataset;
use crate::error::Error;
use crate::metrics::{excess_kurtosis, ks_normality, ols_fit, OlsReport};
use crate::sdr::{fit, Method, Standardization};
use crate::sim::{
    convergence_experiment, emit_table, run_cell, CellConfig, ConvergenceConfig, ConvergenceResult,
    DistName, ModelId, OracleRule, ReferenceTable, ReplicateSummary, SliceRule, TableLayout,
};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "esir",
    version,
    about = "Elliptical and classic sliced inverse regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit SIR or ESIR directions to a CSV file.
    Fit(FitArgs),
    /// Run one simulation cell for one or both methods.
    Simulate(SimulateArgs),
    /// Reproduce the simulation tables.
    Tables(TablesArgs),
    /// Slice-tau convergence experiment over a grid of sample sizes.
    Converge(ConvergeArgs),
    /// Normality and tail diagnostics for each numeric CSV column.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Sir,
    Esir,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Sir => vec![Method::Sir],
            MethodArg::Esir => vec![Method::Esir],
            MethodArg::Both => vec![Method::Sir, Method::Esir],
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Response column, by header name or 0-based index.
    #[arg(long)]
    pub response: String,
    /// Comma-separated covariate columns; defaults to every other numeric column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "esir")]
    pub method: MethodArg,
    /// Number of slices.
    #[arg(long = "H", alias = "slices", default_value_t = 10)]
    pub h: usize,
    /// Number of directions.
    #[arg(long = "K", alias = "directions", default_value_t = 1)]
    pub k: usize,
    /// Regress the response on the projections, their squares and their
    /// pairwise products.
    #[arg(long)]
    pub ols_quad: bool,
    /// Use only the first N data rows.
    #[arg(long)]
    pub head: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub dist: String,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of slices.
    #[arg(long = "H", alias = "slices", default_value_t = 10)]
    pub h: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Run all four reference grids.
    #[arg(long)]
    pub paper: bool,
    /// Run selected tables (1-4).
    #[arg(long, value_delimiter = ',')]
    pub table: Vec<u8>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[arg(long, default_value = "A2")]
    pub model: String,
    #[arg(long, default_value = "normal")]
    pub dist: String,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "200,800,3200")]
    pub n_grid: Vec<usize>,
    /// Fixed slice count; omit to use floor(sqrt(n)).
    #[arg(long = "H", alias = "slices")]
    pub h: Option<usize>,
    /// Oracle sample size for the sliced oracle; defaults to 10 x the largest n.
    #[arg(long)]
    pub oracle_n: Option<usize>,
    /// Target matrix: `exact` (single-index models only) or `sliced`.
    /// Defaults to `exact` when the model has one direction.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleArg>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Slice the covariates without whitening.
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleArg {
    Exact,
    Sliced,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Column to leave out of the report.
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    #[arg(long)]
    pub head: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// A parsed CSV with header names and raw cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    /// `(file line, cells)` per data row.
    pub rows: Vec<(u64, Vec<String>)>,
}

impl CsvTable {
    pub fn read(path: &Path, head: Option<usize>) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            if head.is_some_and(|h| rows.len() >= h) {
                break;
            }
            let rec = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { headers, rows })
    }

    /// Resolves a header name, falling back to a 0-based index.
    pub fn column(&self, key: &str) -> CliResult<usize> {
        if let Some(i) = self.headers.iter().position(|h| h == key) {
            return Ok(i);
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.headers.len() => Ok(i),
            _ => Err(CliError::Input(format!("no column named `{key}`"))),
        }
    }

    fn is_numeric(&self, col: usize) -> bool {
        let mut seen = false;
        for (_, cells) in &self.rows {
            match cells.get(col).map(String::as_str) {
                None | Some("") => {}
                Some(v) => {
                    if v.parse::<f64>().is_err() {
                        return false;
                    }
                    seen = true;
                }
            }
        }
        seen
    }

    /// Every numeric column other than `exclude`.
    pub fn numeric_columns(&self, exclude: Option<usize>) -> Vec<usize> {
        (0..self.headers.len())
            .filter(|&c| Some(c) != exclude && self.is_numeric(c))
            .collect()
    }

    /// Parses the chosen columns, rejecting empty, malformed and
    /// non-finite cells with the offending line and column.
    pub fn matrix(&self, cols: &[usize]) -> CliResult<Array2<f64>> {
        let mut out = Array2::<f64>::zeros((self.rows.len(), cols.len()));
        for (r, (line, cells)) in self.rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                let name = &self.headers[c];
                let raw = cells.get(c).map(String::as_str).unwrap_or("");
                if raw.is_empty() {
                    return Err(CliError::Input(format!(
                        "line {line}: missing value in column `{name}`"
                    )));
                }
                let v: f64 = raw.parse().map_err(|_| {
                    CliError::Input(format!(
                        "line {line}: column `{name}` has non-numeric value `{raw}`"
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Input(format!(
                        "line {line}: column `{name}` has non-finite value `{raw}`"
                    )));
                }
                out[[r, j]] = v;
            }
        }
        Ok(out)
    }

    fn select(&self, keys: &Option<Vec<String>>, exclude: Option<usize>) -> CliResult<Vec<usize>> {
        let cols = match keys {
            Some(keys) => keys
                .iter()
                .map(|k| self.column(k))
                .collect::<CliResult<Vec<_>>>()?,
            None => self.numeric_columns(exclude),
        };
        if cols.is_empty() {
            return Err(CliError::Input("no numeric covariate columns".into()));
        }
        if let Some(e) = exclude {
            if cols.contains(&e) {
                return Err(CliError::Input(format!(
                    "column `{}` is both response and covariate",
                    self.headers[e]
                )));
            }
        }
        Ok(cols)
    }
}

/// Result of `esir fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub h: usize,
    pub k: usize,
    pub n: usize,
    pub response: String,
    pub covariates: Vec<String>,
    /// `K x p`, rows are directions.
    pub directions: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// `n x K` projections of each observation on each direction.
    pub projections: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ols: Option<OlsReport>,
}

fn rows_of(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Projections, their squares and, for `K >= 2`, pairwise products.
pub fn quadratic_design(proj: &Array2<f64>) -> Array2<f64> {
    let (n, k) = proj.dim();
    let mut cols: Vec<Array1<f64>> = proj.columns().into_iter().map(|c| c.to_owned()).collect();
    for j in 0..k {
        cols.push(proj.column(j).mapv(|v| v * v));
    }
    for a in 0..k {
        for b in (a + 1)..k {
            cols.push(&proj.column(a) * &proj.column(b));
        }
    }
    let mut out = Array2::<f64>::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<FitReport> {
    let method = match args.method {
        MethodArg::Sir => Method::Sir,
        MethodArg::Esir => Method::Esir,
        MethodArg::Both => {
            return Err(CliError::Input(
                "fit takes --method sir or --method esir".into(),
            ))
        }
    };
    if args.h < 2 {
        return Err(CliError::Input("--H must be at least 2".into()));
    }
    let table = CsvTable::read(&args.input, args.head)?;
    let resp = table.column(&args.response)?;
    let cols = table.select(&args.covariates, Some(resp))?;
    let x = table.matrix(&cols)?;
    let y = table.matrix(&[resp])?.index_axis_move(Axis(1), 0);
    if x.nrows() < 2 * args.h {
        return Err(CliError::Input(format!(
            "{} rows cannot fill {} slices of at least 2",
            x.nrows(),
            args.h
        )));
    }
    let data = Dataset::new(x, y)?;
    let f = fit(method, &data, args.h, args.k)?;
    let proj = f.project(data.x.view());
    let ols = if args.ols_quad {
        Some(ols_fit(quadratic_design(&proj).view(), data.y.view())?)
    } else {
        None
    };
    Ok(FitReport {
        method,
        h: f.h_used,
        k: f.k,
        n: data.n(),
        response: table.headers[resp].clone(),
        covariates: cols.iter().map(|&c| table.headers[c].clone()).collect(),
        directions: rows_of(&f.directions),
        eigenvalues: f.eigenvalues.to_vec(),
        projections: rows_of(&proj),
        ols,
    })
}

fn render_fit(report: &FitReport, format: OutputFormat) -> CliResult<String> {
    Ok(match format {
        OutputFormat::Json => to_json(report)? + "\n",
        OutputFormat::Csv => {
            let mut s = String::new();
            let header: Vec<String> = (1..=report.k).map(|j| format!("f{j}")).collect();
            s.push_str(&header.join(","));
            s.push('\n');
            for row in &report.projections {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        OutputFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{} fit: n = {}, p = {}, H = {}, K = {}, response `{}`",
                report.method,
                report.n,
                report.covariates.len(),
                report.h,
                report.k,
                report.response
            );
            for (j, (dir, ev)) in report
                .directions
                .iter()
                .zip(&report.eigenvalues)
                .enumerate()
            {
                let _ = writeln!(s, "direction {} (eigenvalue {ev:.6}):", j + 1);
                for (name, v) in report.covariates.iter().zip(dir) {
                    let _ = writeln!(s, "  {name:<16} {v:>14.6}");
                }
            }
            if let Some(o) = &report.ols {
                let _ = writeln!(
                    s,
                    "quadratic OLS: R2 = {:.4}, adjusted R2 = {:.4}, F({}, {}) = {:.2}",
                    o.r2, o.adjusted_r2, o.dof.0, o.dof.1, o.f_statistic
                );
            }
            s
        }
    })
}

fn parse_model(s: &str) -> CliResult<ModelId> {
    s.parse().map_err(CliError::from)
}

fn parse_dist(s: &str) -> CliResult<DistName> {
    s.parse().map_err(CliError::from)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<Vec<ReplicateSummary>> {
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    let model = parse_model(&args.model)?;
    let dist = parse_dist(&args.dist)?;
    let p = args.p.unwrap_or_else(|| model.default_p());
    args.method
        .methods()
        .into_iter()
        .map(|method| {
            run_cell(&CellConfig {
                model,
                dist,
                n: args.n,
                p,
                h: args.h,
                reps: args.reps,
                method,
                base_seed: args.seed,
            })
            .map_err(CliError::from)
        })
        .collect()
}

fn summaries_csv(cells: &[ReplicateSummary]) -> String {
    let mut s = String::from(
        "model,dist,n,p,h,k,method,rep_count,excluded,direction,r2_mean,r2_sd,avg_r2\n",
    );
    for c in cells {
        for j in 0..c.k {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.model,
                c.dist,
                c.n,
                c.p,
                c.h,
                c.k,
                c.method,
                c.rep_count,
                c.excluded,
                j + 1,
                c.r2_mean[j],
                c.r2_sd[j],
                c.avg_r2
            );
        }
    }
    s
}

fn render_cells(
    cells: &[ReplicateSummary],
    layout: TableLayout,
    format: OutputFormat,
) -> CliResult<String> {
    let table = emit_table(cells, layout)?;
    Ok(match format {
        OutputFormat::Json => table.json_lines(),
        OutputFormat::Csv => summaries_csv(cells),
        OutputFormat::Text => table.text,
    })
}

pub fn cmd_tables(args: &TablesArgs) -> CliResult<Vec<(ReferenceTable, Vec<ReplicateSummary>)>> {
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    let tables: Vec<ReferenceTable> = if args.paper {
        ReferenceTable::ALL.to_vec()
    } else {
        if args.table.is_empty() {
            return Err(CliError::Input("choose --paper or --table 1,2,3,4".into()));
        }
        args.table
            .iter()
            .map(|t| match t {
                1..=4 => Ok(ReferenceTable::ALL[*t as usize - 1]),
                _ => Err(CliError::Input(format!("no table {t}; choose 1-4"))),
            })
            .collect::<CliResult<_>>()?
    };
    tables
        .into_iter()
        .map(|t| {
            let cells = t
                .grid(args.reps, args.seed)
                .iter()
                .map(|c| run_cell(c).map_err(CliError::from))
                .collect::<CliResult<Vec<_>>>()?;
            Ok((t, cells))
        })
        .collect()
}

pub fn cmd_converge(args: &ConvergeArgs) -> CliResult<ConvergenceResult> {
    let model = parse_model(&args.model)?;
    let max_n = args.n_grid.iter().copied().max().unwrap_or(0);
    let cfg = ConvergenceConfig {
        model,
        dist: parse_dist(&args.dist)?,
        p: args.p.unwrap_or_else(|| model.default_p()),
        n_grid: args.n_grid.clone(),
        slice_rule: args.h.map_or(SliceRule::Sqrt, SliceRule::Fixed),
        oracle_n: args.oracle_n.unwrap_or(10 * max_n),
        reps: args.reps,
        base_seed: args.seed,
        mode: if args.raw {
            Standardization::Raw
        } else {
            Standardization::Standardized
        },
        oracle: match args.oracle {
            Some(OracleArg::Exact) => OracleRule::Exact,
            Some(OracleArg::Sliced) => OracleRule::Sliced,
            None if model.k() == 1 => OracleRule::Exact,
            None => OracleRule::Sliced,
        },
    };
    Ok(convergence_experiment(&cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDiagnostic {
    pub column: String,
    pub n: usize,
    pub ks_statistic: f64,
    pub reject_normal_at_05: bool,
    pub excess_kurtosis: f64,
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> CliResult<Vec<ColumnDiagnostic>> {
    let table = CsvTable::read(&args.input, args.head)?;
    let resp = args
        .response
        .as_deref()
        .map(|r| table.column(r))
        .transpose()?;
    let cols = table.select(&args.covariates, resp)?;
    let x = table.matrix(&cols)?;
    if x.nrows() < 20 {
        return Err(CliError::Input(format!(
            "diagnostics need at least 20 rows, got {}",
            x.nrows()
        )));
    }
    cols.iter()
        .zip(x.columns())
        .map(|(&c, col)| {
            let ks = ks_normality(col)?;
            Ok(ColumnDiagnostic {
                column: table.headers[c].clone(),
                n: col.len(),
                ks_statistic: ks.statistic,
                reject_normal_at_05: ks.reject_at_05,
                excess_kurtosis: excess_kurtosis(col)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(CliError::from)
}

fn render_diagnostics(rows: &[ColumnDiagnostic], format: OutputFormat) -> CliResult<String> {
    Ok(match format {
        OutputFormat::Json => to_json(&rows)? + "\n",
        OutputFormat::Csv => {
            let mut s = String::from("column,n,ks_statistic,reject_normal_at_05,excess_kurtosis\n");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.column, r.n, r.ks_statistic, r.reject_normal_at_05, r.excess_kurtosis
                );
            }
            s
        }
        OutputFormat::Text => {
            let mut s = format!(
                "{:<16} {:>6} {:>10} {:>8} {:>12}\n",
                "column", "n", "KS", "normal?", "ex.kurtosis"
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<16} {:>6} {:>10.4} {:>8} {:>12.3}",
                    r.column,
                    r.n,
                    r.ks_statistic,
                    if r.reject_normal_at_05 {
                        "reject"
                    } else {
                        "ok"
                    },
                    r.excess_kurtosis
                );
            }
            s
        }
    })
}

fn render_convergence(r: &ConvergenceResult, format: OutputFormat) -> CliResult<String> {
    Ok(match format {
        OutputFormat::Json => to_json(r)? + "\n",
        OutputFormat::Csv => {
            let mut s = String::from("n,h,mean_error,standard_error,excluded\n");
            for p in &r.points {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    p.n, p.h, p.mean_error, p.standard_error, p.excluded
                );
            }
            s
        }
        OutputFormat::Text => {
            let mut s = match r.oracle {
                OracleRule::Exact => "oracle: exact single-index target\n".to_string(),
                OracleRule::Sliced => format!("oracle: n = {}, H = {}\n", r.oracle_n, r.oracle_h),
            };
            let _ = writeln!(
                s,
                "{:>8} {:>5} {:>12} {:>10}",
                "n", "H", "mean error", "s.e."
            );
            for p in &r.points {
                let _ = writeln!(
                    s,
                    "{:>8} {:>5} {:>12.5} {:>10.5}",
                    p.n, p.h, p.mean_error, p.standard_error
                );
            }
            s
        }
    })
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map_err(|e| CliError::Numerical(format!("cannot encode JSON: {e}")))
}

fn write_output(out: &OutputArgs, body: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => {
            fs::write(path, body).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

/// Caps the worker pool from `ESIR_THREADS` (0 or unset means automatic).
pub fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("ESIR_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    configure_threads();
    match cli.command {
        Command::Fit(args) => {
            let report = cmd_fit(&args)?;
            write_output(&args.out, &render_fit(&report, args.out.format)?)
        }
        Command::Simulate(args) => {
            let cells = cmd_simulate(&args)?;
            let layout = if cells[0].k == 1 {
                TableLayout::Table1
            } else {
                TableLayout::Table3_4
            };
            write_output(&args.out, &render_cells(&cells, layout, args.out.format)?)
        }
        Command::Tables(args) => {
            let mut body = String::new();
            for (t, cells) in cmd_tables(&args)? {
                if args.out.format == OutputFormat::Text {
                    let _ = writeln!(body, "== {t} ({} replicates) ==", args.reps);
                }
                body.push_str(&render_cells(&cells, t.layout(), args.out.format)?);
            }
            write_output(&args.out, &body)
        }
        Command::Converge(args) => {
            let r = cmd_converge(&args)?;
            write_output(&args.out, &render_convergence(&r, args.out.format)?)
        }
        Command::Diagnose(args) => {
            let rows = cmd_diagnose(&args)?;
            write_output(&args.out, &render_diagnostics(&rows, args.out.format)?)
        }
    }
}

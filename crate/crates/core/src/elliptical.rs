//! Samplers for elliptical laws `X = mu + xi * A * U`, where `A A^T = Sigma`,
//! `U` is uniform on the unit sphere and `xi` is a nonnegative generating
//! variable independent of `U`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, FisherF, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, SymMatrix};

/// Random stream for replicate `index` of a run seeded with `base_seed`.
pub fn replicate_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index))
}

/// Law of the generating variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Normal,
    StudentT { nu: f64 },
    Cauchy,
    Laplace,
    Logistic,
    FRatio { d1: f64, d2: f64 },
}

impl GeneratorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GeneratorKind::StudentT { nu } if !(nu > 0.0 && nu.is_finite()) => {
                Err(Error::InvalidInput(format!(
                    "Student t degrees of freedom must be > 0, got {nu}"
                )))
            }
            GeneratorKind::FRatio { d1, d2 } if !(d1 > 0.0 && d2 > 0.0) => {
                Err(Error::InvalidInput(format!(
                    "F degrees of freedom must be > 0, got ({d1}, {d2})"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::Normal => write!(f, "normal"),
            GeneratorKind::StudentT { nu } => write!(f, "t({nu})"),
            GeneratorKind::Cauchy => write!(f, "cauchy"),
            GeneratorKind::Laplace => write!(f, "laplace"),
            GeneratorKind::Logistic => write!(f, "logistic"),
            GeneratorKind::FRatio { d1, d2 } => write!(f, "F({d1},{d2})"),
        }
    }
}

/// Draws of `xi` for a fixed `(kind, p)`.
#[derive(Debug, Clone)]
pub struct GeneratingVariable {
    kind: GeneratorKind,
    p: usize,
    chi_nu: Option<ChiSquared<f64>>,
    t_scale: f64,
    gamma_half_p: Option<Gamma<f64>>,
    logistic_scale: f64,
    fisher: Option<FisherF<f64>>,
}

impl GeneratingVariable {
    pub fn new(kind: GeneratorKind, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        kind.validate()?;
        let mut out = Self {
            kind,
            p,
            chi_nu: None,
            t_scale: 1.0,
            gamma_half_p: None,
            logistic_scale: 1.0,
            fisher: None,
        };
        match kind {
            GeneratorKind::StudentT { nu } => {
                out.chi_nu = Some(ChiSquared::new(nu).expect("nu validated"));
                if nu > 2.0 {
                    out.t_scale = ((nu - 2.0) / nu).sqrt();
                }
            }
            GeneratorKind::Cauchy => {
                out.chi_nu = Some(ChiSquared::new(1.0).expect("valid"));
            }
            GeneratorKind::Logistic => {
                out.gamma_half_p = Some(Gamma::new(p as f64 / 2.0, 1.0).expect("valid"));
                out.logistic_scale = (p as f64 / logistic_radial_mean(p)).sqrt();
            }
            GeneratorKind::FRatio { d1, d2 } => {
                out.fisher = Some(FisherF::new(d1, d2).expect("validated"));
            }
            GeneratorKind::Normal | GeneratorKind::Laplace => {}
        }
        Ok(out)
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    fn normal_norm<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (0..self.p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * z
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            GeneratorKind::Normal => self.normal_norm(rng),
            GeneratorKind::StudentT { nu } => {
                let w = self.chi_nu.as_ref().unwrap().sample(rng);
                self.normal_norm(rng) * (nu / w).sqrt() * self.t_scale
            }
            GeneratorKind::Cauchy => {
                let w = self.chi_nu.as_ref().unwrap().sample(rng);
                self.normal_norm(rng) / w.sqrt()
            }
            GeneratorKind::Laplace => {
                let w: f64 = Exp1.sample(rng);
                w.sqrt() * self.normal_norm(rng)
            }
            GeneratorKind::Logistic => {
                let envelope = self.gamma_half_p.as_ref().unwrap();
                loop {
                    let t = envelope.sample(rng);
                    let accept = 1.0 / (1.0 + (-t).exp()).powi(2);
                    if rng.random::<f64>() < accept {
                        break t.sqrt() * self.logistic_scale;
                    }
                }
            }
            GeneratorKind::FRatio { .. } => self.fisher.as_ref().unwrap().sample(rng),
        }
    }
}

/// Mean of `t = |X|^2` when `X` has density proportional to
/// `exp(-t) / (1 + exp(-t))^2` in `R^p`.
///
/// Composite Simpson in `u = sqrt(t)`, where both integrands are smooth.
fn logistic_radial_mean(p: usize) -> f64 {
    const UPPER: f64 = 12.0;
    const STEPS: usize = 6000;
    let g = |u: f64| {
        let e = (-u * u).exp();
        e / ((1.0 + e) * (1.0 + e))
    };
    let h = UPPER / STEPS as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=STEPS {
        let u = i as f64 * h;
        let w = if i == 0 || i == STEPS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let base = u.powi(p as i32 - 1) * g(u);
        den += w * base;
        num += w * base * u * u;
    }
    num / den
}

/// Uniform draw from the unit sphere in `R^p`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let z: Array1<f64> = Array1::from_iter((0..p).map(|_| StandardNormal.sample(rng)));
        let norm = z.dot(&z).sqrt();
        if norm > 0.0 {
            return z / norm;
        }
    }
}

/// A single draw of the generating variable.
pub fn sample_generating_variable<R: Rng + ?Sized>(
    kind: GeneratorKind,
    p: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(GeneratingVariable::new(kind, p)?.sample(rng))
}

/// Parameters of an elliptical law.
#[derive(Debug, Clone)]
pub struct EllipticalSpec {
    mu: Array1<f64>,
    sigma: SymMatrix,
    generator: GeneratorKind,
    factor: Array2<f64>,
}

impl EllipticalSpec {
    pub fn new(mu: Array1<f64>, sigma: SymMatrix, generator: GeneratorKind) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::InvalidInput(format!(
                "location has length {} but scatter is {}x{}",
                mu.len(),
                sigma.dim(),
                sigma.dim()
            )));
        }
        generator.validate()?;
        let factor = cholesky(&sigma)?;
        Ok(Self {
            mu,
            sigma,
            generator,
            factor,
        })
    }

    /// Centered law with the given scatter.
    pub fn centered(sigma: SymMatrix, generator: GeneratorKind) -> Result<Self> {
        let p = sigma.dim();
        Self::new(Array1::zeros(p), sigma, generator)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn generator(&self) -> GeneratorKind {
        self.generator
    }
}

/// `n` i.i.d. rows from the law described by `spec`.
pub fn sample_elliptical<R: Rng + ?Sized>(
    spec: &EllipticalSpec,
    n: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let p = spec.dim();
    let xi = GeneratingVariable::new(spec.generator, p)?;
    let mut out = Array2::<f64>::zeros((n, p));
    for mut row in out.rows_mut() {
        let u = sample_unit_sphere(p, rng);
        let r = xi.sample(rng);
        let au = spec.factor.dot(&u);
        row.assign(&(&spec.mu + &(au * r)));
    }
    Ok(out)
}

/// Covariates paired with a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "covariates have {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidInput("no covariate columns".into()));
        }
        if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite covariate at row {i}, column {j}"
            )));
        }
        if let Some((i, _)) = y.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite response at row {i}"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    /// Accepts `normal`, `laplace`, `logistic`, `cauchy`, `t3`, `t(2.5)`,
    /// `F(10,1)`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidInput(format!("unknown generating variable `{s}`"));
        match lower.as_str() {
            "normal" | "gaussian" => return Ok(GeneratorKind::Normal),
            "cauchy" | "t1" | "t(1)" => return Ok(GeneratorKind::Cauchy),
            "laplace" => return Ok(GeneratorKind::Laplace),
            "logistic" => return Ok(GeneratorKind::Logistic),
            _ => {}
        }
        let strip_parens = |r: &str| r.trim_start_matches('(').trim_end_matches(')').to_string();
        if let Some(rest) = lower.strip_prefix('t') {
            let nu: f64 = strip_parens(rest).parse().map_err(|_| bad())?;
            let kind = GeneratorKind::StudentT { nu };
            kind.validate()?;
            return Ok(kind);
        }
        if let Some(rest) = lower.strip_prefix('f') {
            let inner = strip_parens(rest);
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            let kind = GeneratorKind::FRatio {
                d1: a.trim().parse().map_err(|_| bad())?,
                d2: b.trim().parse().map_err(|_| bad())?,
            };
            kind.validate()?;
            return Ok(kind);
        }
        Err(bad())
    }
}

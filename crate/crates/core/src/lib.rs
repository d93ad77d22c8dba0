//! Elliptical sliced inverse regression (ESIR) and classic sliced inverse
//! regression (SIR) for sufficient dimension reduction with heavy-tailed
//! elliptical covariates.
//!
//! ESIR replaces the covariance matrix used by SIR, both for whitening the
//! covariates and for summarizing the slice means, by the multivariate
//! Kendall's tau matrix, which exists for every elliptical law regardless of
//! moments.
//!
//! ```
//! use esir::elliptical::replicate_rng;
//! use esir::metrics::r_squared_per_direction;
//! use esir::sdr::{fit, Method};
//! use esir::sim::{gen_dataset, DistName, ModelId, ModelSpec};
//!
//! let model = ModelSpec::new(ModelId::B1, 10, DistName::Cauchy)?;
//! let data = gen_dataset(&model, 400, &mut replicate_rng(7, 0))?;
//! let f = fit(Method::Esir, &data, 10, 2)?;
//! let r2 = r_squared_per_direction(&f, &model.truth())?;
//! assert_eq!(r2.len(), 2);
//! # Ok::<(), esir::Error>(())
//! ```

// NaN must fail the guards, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod elliptical;
pub mod error;
pub mod kendall;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod sdr;
pub mod sim;

pub use error::{Error, Result};

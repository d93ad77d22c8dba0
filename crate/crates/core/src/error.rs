use thiserror::Error;

use crate::linalg::LinalgError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("observations {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },
    #[error("every pair of points has zero distance")]
    AllPairsDegenerate,
    #[error("{n} observations cannot fill {h} slices with at least 2 points each")]
    TooFewPoints { n: usize, h: usize },
    #[error("requested {k} directions but at most {max} are available")]
    KTooLarge { k: usize, max: usize },
    #[error("direction has zero length under the scatter metric")]
    DegenerateDirection,
    #[error("design matrix column {column} is linearly dependent on earlier columns")]
    RankDeficientDesign { column: usize },
    #[error("sample has zero spread")]
    DegenerateSample,
    #[error("{failed} of {total} replicates failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("table is missing a cell: {0}")]
    MissingCell(String),
}

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Linalg(_)
                | Error::AllPairsDegenerate
                | Error::DegenerateDirection
                | Error::RankDeficientDesign { .. }
                | Error::TooManyFailures { .. }
        )
    }
}

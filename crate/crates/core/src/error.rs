use thiserror::Error;

use crate::instance::{Level, SchoolId, UnitId};

/// Failures while ingesting or validating district data.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error("{file}, row {row}, field `{field}`: {message}")]
    Field {
        file: String,
        row: usize,
        field: String,
        message: String,
    },
    #[error("inconsistent instance: {0}")]
    Consistency(String),
}

/// Failures while evaluating an objective term on a zoning.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("zoning does not assign unit {0}")]
    Unassigned(UnitId),
    #[error("unit {unit} assigned to school {school} of another level")]
    WrongLevel { unit: UnitId, school: SchoolId },
    #[error("unknown unit {0}")]
    UnknownUnit(UnitId),
    #[error("unknown school {0}")]
    UnknownSchool(SchoolId),
    #[error("school {0} has no zoned students")]
    EmptySchool(SchoolId),
    #[error("school {0}: status-quo distance total of its zoned students is zero")]
    ZeroDenominator(SchoolId),
    #[error("school {0} has a nonpositive desired capacity")]
    NonpositiveDesired(SchoolId),
    #[error("student {student} has no distance to school {school}")]
    MissingDistance { student: u64, school: SchoolId },
    #[error("student {student} has no residence unit at level {level}")]
    MissingResidence { student: u64, level: Level },
    #[error("unknown level {0}")]
    UnknownLevel(Level),
}

/// Failures of the optimization entry points.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("status-quo zoning is infeasible: {0}")]
    InfeasibleWarmStart(String),
    #[error("search space of about {estimate:.3e} assignments exceeds the limit {limit:.0e}")]
    SpaceTooLarge { estimate: f64, limit: f64 },
    #[error("no feasible zoning exists within the candidate sets")]
    NoFeasibleZoning,
    #[error("invalid solver input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Weights(#[from] crate::weights::WeightsError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

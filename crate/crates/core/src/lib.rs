//! In-situ SQL over raw delimited files: catalog, SQL frontend, planner,
//! task-graph executor, learned index joins and parallel aggregation.

pub mod agg;
pub mod bench;
pub mod datagen;
pub mod engine;
pub mod executor;
pub mod index;
pub mod ops;
pub mod planner;
pub mod reference;
pub mod sql;
pub mod storage;
pub mod udf;
pub mod value;

pub use engine::{Engine, QueryResult, QueryStats};
pub use executor::ExecConfig;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Sql(#[from] sql::SqlError),
    #[error(transparent)]
    Plan(#[from] planner::PlanError),
    #[error(transparent)]
    Executor(#[from] executor::ExecutorError),
    #[error(transparent)]
    Storage(#[from] storage::StorageError),
    #[error(transparent)]
    Udf(#[from] udf::UdfError),
    #[error(transparent)]
    Datagen(#[from] datagen::DatagenError),
    #[error(transparent)]
    Aggregation(#[from] agg::AggError),
    #[error(transparent)]
    Index(#[from] index::IndexError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl Error {
    pub fn is_syntax(&self) -> bool {
        matches!(self, Error::Sql(sql::SqlError::Syntax { .. }))
    }
}

//! Conditional-independence tests.
//!
//! Every test implements [`CiTest`] over variable indices and returns a
//! [`CiTestResult`] with a p-value in `[0, 1]`; small p-values indicate
//! dependence. Tests are immutable once built and safe to share across
//! threads.

mod fisher_z;
mod kci;
mod oracle;

pub use fisher_z::{partial_correlation, FisherZ};
pub use kci::{Kci, KciConfig};
pub use oracle::DSepOracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    FisherZ,
    Kci,
    DSepOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub x: String,
    pub y: String,
    pub cond_set: Vec<String>,
    pub test_kind: TestKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CiError {
    #[error("invalid query: {0}")]
    BadQuery(String),
    #[error("need more than {needed} samples, have {have}")]
    TooFewSamples { have: usize, needed: usize },
    #[error("degenerate data: column `{0}` is constant")]
    ConstantColumn(String),
    #[error("correlation submatrix over {0:?} is singular")]
    Singular(Vec<String>),
    #[error("kernel bandwidth is degenerate for {0:?} (all pairwise distances zero)")]
    DegenerateBandwidth(Vec<String>),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub trait CiTest: Sync {
    fn kind(&self) -> TestKind;

    /// Variable names, indexed as in [`CiTest::test`].
    fn variables(&self) -> &[String];

    fn test(&self, x: usize, y: usize, cond: &[usize]) -> Result<CiTestResult, CiError>;
}

/// Validates a query and returns the conditioning set sorted ascending.
pub(crate) fn check_query(
    n_vars: usize,
    x: usize,
    y: usize,
    cond: &[usize],
) -> Result<Vec<usize>, CiError> {
    if x >= n_vars || y >= n_vars || cond.iter().any(|&c| c >= n_vars) {
        return Err(CiError::BadQuery(format!(
            "variable index out of range (have {n_vars} variables)"
        )));
    }
    if x == y {
        return Err(CiError::BadQuery("x and y must differ".into()));
    }
    if cond.contains(&x) || cond.contains(&y) {
        return Err(CiError::BadQuery(
            "conditioning set must exclude x and y".into(),
        ));
    }
    let mut s = cond.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

pub(crate) fn make_result(
    names: &[String],
    x: usize,
    y: usize,
    cond: &[usize],
    statistic: f64,
    p_value: f64,
    kind: TestKind,
) -> CiTestResult {
    CiTestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        x: names[x].clone(),
        y: names[y].clone(),
        cond_set: cond.iter().map(|&c| names[c].clone()).collect(),
        test_kind: kind,
    }
}

use super::{check_query, make_result, CiError, CiTest, CiTestResult, TestKind};
use crate::graph::{d_separated, CausalGraph, GraphError};

/// Exact CI answers read off a known DAG: p = 1 when d-separated, else 0.
#[derive(Debug, Clone)]
pub struct DSepOracle {
    graph: CausalGraph,
    names: Vec<String>,
}

impl DSepOracle {
    pub fn new(graph: CausalGraph) -> Result<Self, CiError> {
        if !graph.is_dag()? {
            let cycle = graph.find_cycle().unwrap_or_default();
            return Err(GraphError::Cycle(
                cycle.iter().map(|&i| graph.name(i).to_string()).collect(),
            )
            .into());
        }
        let names = graph.names();
        Ok(Self { graph, names })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn test_by_name(&self, x: &str, y: &str, cond: &[&str]) -> Result<CiTestResult, CiError> {
        let xi = self.graph.node_index(x)?;
        let yi = self.graph.node_index(y)?;
        let s = cond
            .iter()
            .map(|c| self.graph.node_index(c))
            .collect::<Result<Vec<_>, _>>()?;
        self.test(xi, yi, &s)
    }
}

impl CiTest for DSepOracle {
    fn kind(&self) -> TestKind {
        TestKind::DSepOracle
    }

    fn variables(&self) -> &[String] {
        &self.names
    }

    fn test(&self, x: usize, y: usize, cond: &[usize]) -> Result<CiTestResult, CiError> {
        let s = check_query(self.names.len(), x, y, cond)?;
        let sep = d_separated(&self.graph, x, y, &s)?;
        let p = if sep { 1.0 } else { 0.0 };
        Ok(make_result(&self.names, x, y, &s, 0.0, p, TestKind::DSepOracle))
    }
}

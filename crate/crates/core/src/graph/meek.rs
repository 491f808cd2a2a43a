//! Meek orientation rules and the CPDAG of a DAG.

use super::{CausalGraph, GraphError, Result};

/// Dense edge marks for fast rule matching.
pub(crate) struct Marks {
    n: usize,
    arrow: Vec<bool>,
    line: Vec<bool>,
}

impl Marks {
    pub(crate) fn from_graph(g: &CausalGraph) -> Self {
        let n = g.n_nodes();
        let mut m = Self {
            n,
            arrow: vec![false; n * n],
            line: vec![false; n * n],
        };
        for (u, v) in g.directed_edges() {
            m.arrow[u * n + v] = true;
        }
        for (u, v) in g.undirected_edges() {
            m.line[u * n + v] = true;
            m.line[v * n + u] = true;
        }
        m
    }

    fn arrow(&self, u: usize, v: usize) -> bool {
        self.arrow[u * self.n + v]
    }

    fn line(&self, u: usize, v: usize) -> bool {
        self.line[u * self.n + v]
    }

    fn adj(&self, u: usize, v: usize) -> bool {
        self.arrow(u, v) || self.arrow(v, u) || self.line(u, v)
    }

    fn orient(&mut self, u: usize, v: usize) {
        let n = self.n;
        self.line[u * n + v] = false;
        self.line[v * n + u] = false;
        self.arrow[u * n + v] = true;
    }

    /// Whether some rule forces the undirected edge `a -- b` to become `a -> b`.
    fn forced(&self, a: usize, b: usize) -> bool {
        let n = self.n;
        // R1: c -> a -- b, c and b non-adjacent
        if (0..n).any(|c| self.arrow(c, a) && !self.adj(c, b)) {
            return true;
        }
        // R2: a -> c -> b
        if (0..n).any(|c| self.arrow(a, c) && self.arrow(c, b)) {
            return true;
        }
        // R3: a -- c -> b, a -- d -> b, c and d non-adjacent
        let spouses: Vec<usize> = (0..n)
            .filter(|&c| self.line(a, c) && self.arrow(c, b))
            .collect();
        for (i, &c) in spouses.iter().enumerate() {
            if spouses[i + 1..].iter().any(|&d| !self.adj(c, d)) {
                return true;
            }
        }
        // R4: a -- d, d -> c -> b, a adjacent to c, d and b non-adjacent
        for c in (0..n).filter(|&c| self.arrow(c, b) && self.adj(a, c)) {
            if (0..n).any(|d| self.line(a, d) && self.arrow(d, c) && !self.adj(d, b)) {
                return true;
            }
        }
        false
    }

    /// Applies R1-R4 until no undirected edge changes. Returns the edges
    /// oriented, in application order.
    pub(crate) fn close(&mut self) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut oriented = Vec::new();
        loop {
            let mut changed = false;
            for a in 0..n {
                for b in (a + 1)..n {
                    if !self.line(a, b) {
                        continue;
                    }
                    if self.forced(a, b) {
                        self.orient(a, b);
                        oriented.push((a, b));
                        changed = true;
                    } else if self.forced(b, a) {
                        self.orient(b, a);
                        oriented.push((b, a));
                        changed = true;
                    }
                }
            }
            if !changed {
                return oriented;
            }
        }
    }

    pub(crate) fn write_back(&self, g: &CausalGraph) -> CausalGraph {
        let n = self.n;
        let mut out = g.empty_like();
        for u in 0..n {
            for v in 0..n {
                if self.arrow(u, v) {
                    out.directed.insert((u, v));
                } else if u < v && self.line(u, v) {
                    out.undirected.insert((u, v));
                }
            }
        }
        out
    }
}

/// Applies Meek's rules to closure on a mixed graph.
pub(crate) fn meek_closure(g: &CausalGraph) -> CausalGraph {
    let mut m = Marks::from_graph(g);
    m.close();
    m.write_back(g)
}

/// The CPDAG of a DAG: skeleton with v-structures oriented, then Meek closure.
pub fn cpdag_of(g: &CausalGraph) -> Result<CausalGraph> {
    if !g.is_dag()? {
        let cycle = g.find_cycle().unwrap_or_default();
        return Err(GraphError::Cycle(
            cycle.iter().map(|&i| g.name(i).to_string()).collect(),
        ));
    }
    let mut pattern = g.empty_like();
    for (u, v) in g.skeleton() {
        pattern.undirected.insert((u, v));
    }
    for (a, b, c) in g.v_structures() {
        pattern.set_directed(a, b)?;
        pattern.set_directed(c, b)?;
    }
    Ok(meek_closure(&pattern))
}

//! d-separation queries and minimal separating sets on DAGs.

use std::collections::VecDeque;

use super::{CausalGraph, GraphError, Result};

/// Ancestors of `seeds`, seeds included, as a membership mask.
pub fn ancestors_of(g: &CausalGraph, seeds: &[usize]) -> Vec<bool> {
    let (pa, _) = g.directed_adjacency();
    let mut mark = vec![false; g.n_nodes()];
    let mut stack: Vec<usize> = Vec::new();
    for &s in seeds {
        if !mark[s] {
            mark[s] = true;
            stack.push(s);
        }
    }
    while let Some(u) = stack.pop() {
        for &p in &pa[u] {
            if !mark[p] {
                mark[p] = true;
                stack.push(p);
            }
        }
    }
    mark
}

fn check_query(g: &CausalGraph, x: usize, y: usize, s: &[usize]) -> Result<()> {
    for &i in s.iter().chain([x, y].iter()) {
        if i >= g.n_nodes() {
            return Err(GraphError::BadIndex(i));
        }
    }
    if !g.is_dag()? {
        let cycle = g.find_cycle().unwrap_or_default();
        return Err(GraphError::Cycle(
            cycle.iter().map(|&i| g.name(i).to_string()).collect(),
        ));
    }
    Ok(())
}

/// Whether `s` d-separates `x` and `y` in the DAG `g`.
///
/// Reachability over (node, arrival direction) states: a trail may pass a
/// non-conditioned node freely except into a collider, and may bounce
/// through a collider only when the collider has a descendant in `s`.
pub fn d_separated(g: &CausalGraph, x: usize, y: usize, s: &[usize]) -> Result<bool> {
    check_query(g, x, y, s)?;
    if x == y || s.contains(&x) || s.contains(&y) {
        return Err(GraphError::Parse(
            "d-separation query needs x != y and x, y outside the conditioning set".into(),
        ));
    }
    Ok(!d_connected_unchecked(g, x, y, s))
}

pub(crate) fn d_connected_unchecked(g: &CausalGraph, x: usize, y: usize, s: &[usize]) -> bool {
    let n = g.n_nodes();
    let (pa, ch) = g.directed_adjacency();
    let mut cond = vec![false; n];
    for &v in s {
        cond[v] = true;
    }
    let anc = ancestors_of(g, s);

    // visited[v][0]: arrived from a child (moving up), [1]: from a parent (moving down)
    let mut visited = vec![[false; 2]; n];
    let mut queue = VecDeque::new();
    queue.push_back((x, 0usize));
    while let Some((v, dir)) = queue.pop_front() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if v == y {
            return true;
        }
        if dir == 0 {
            if !cond[v] {
                queue.extend(pa[v].iter().map(|&p| (p, 0)));
                queue.extend(ch[v].iter().map(|&c| (c, 1)));
            }
        } else {
            if !cond[v] {
                queue.extend(ch[v].iter().map(|&c| (c, 1)));
            }
            if anc[v] {
                queue.extend(pa[v].iter().map(|&p| (p, 0)));
            }
        }
    }
    false
}

/// An inclusion-minimal set d-separating `x` and `y`, or `None` when the two
/// are adjacent.
///
/// Works in the moral graph of the ancestral set of `{x, y}`: start from all
/// of it, keep the part touching `x`, then the part of that reachable from
/// `y`. The result lives inside `An({x, y})`, so it never contains a node
/// that only acts as a collider between `x` and `y`.
pub fn minimal_separator(g: &CausalGraph, x: usize, y: usize) -> Result<Option<Vec<usize>>> {
    check_query(g, x, y, &[])?;
    if x == y {
        return Err(GraphError::Parse("separator query needs x != y".into()));
    }
    if g.is_adjacent(x, y) {
        return Ok(None);
    }
    let n = g.n_nodes();
    let anc = ancestors_of(g, &[x, y]);
    let (pa, _) = g.directed_adjacency();

    let mut moral = vec![Vec::new(); n];
    for v in (0..n).filter(|&v| anc[v]) {
        for (i, &p) in pa[v].iter().enumerate() {
            moral[v].push(p);
            moral[p].push(v);
            for &q in &pa[v][i + 1..] {
                moral[p].push(q);
                moral[q].push(p);
            }
        }
    }

    let initial: Vec<bool> = (0..n).map(|v| anc[v] && v != x && v != y).collect();
    let near_x = boundary_reached(&moral, &anc, x, &initial);
    let near_both = boundary_reached(&moral, &anc, y, &near_x);
    Ok(Some((0..n).filter(|&v| near_both[v]).collect()))
}

/// Members of `blocker` reachable from `start` along moral-graph paths whose
/// interior avoids `blocker`.
fn boundary_reached(moral: &[Vec<usize>], within: &[bool], start: usize, blocker: &[bool]) -> Vec<bool> {
    let n = moral.len();
    let mut hit = vec![false; n];
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &v in &moral[u] {
            if !within[v] || seen[v] {
                continue;
            }
            seen[v] = true;
            if blocker[v] {
                hit[v] = true;
            } else {
                stack.push(v);
            }
        }
    }
    hit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dag(n: usize, edges: &[(usize, usize)]) -> CausalGraph {
        let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
        let mut g = CausalGraph::with_nodes(&names).unwrap();
        for &(u, v) in edges {
            g.add_directed(u, v).unwrap();
        }
        g
    }

    #[test]
    fn chain_blocked_by_middle() {
        let g = dag(3, &[(0, 1), (1, 2)]);
        assert!(d_separated(&g, 0, 2, &[1]).unwrap());
        assert!(!d_separated(&g, 0, 2, &[]).unwrap());
        assert_eq!(minimal_separator(&g, 0, 2).unwrap(), Some(vec![1]));
    }

    #[test]
    fn collider_opens_on_conditioning() {
        let g = dag(3, &[(0, 2), (1, 2)]);
        assert!(d_separated(&g, 0, 1, &[]).unwrap());
        assert!(!d_separated(&g, 0, 1, &[2]).unwrap());
        assert_eq!(minimal_separator(&g, 0, 1).unwrap(), Some(vec![]));
    }

    #[test]
    fn descendant_of_collider_opens() {
        // 0 -> 2 <- 1, 2 -> 3
        let g = dag(4, &[(0, 2), (1, 2), (2, 3)]);
        assert!(!d_separated(&g, 0, 1, &[3]).unwrap());
    }

    #[test]
    fn adjacent_pair_has_no_separator() {
        let g = dag(2, &[(0, 1)]);
        assert_eq!(minimal_separator(&g, 0, 1).unwrap(), None);
    }

    #[test]
    fn rejects_bad_queries() {
        let g = dag(3, &[(0, 1)]);
        assert!(d_separated(&g, 0, 0, &[]).is_err());
        assert!(d_separated(&g, 0, 1, &[1]).is_err());
        assert!(d_separated(&g, 0, 7, &[]).is_err());
    }
}

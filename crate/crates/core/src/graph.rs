//! Causal (directed) and lateral (undirected) unit graphs.
//!
//! Units are indexed densely from 0. Both graphs are immutable once built and
//! keep their derived neighbourhoods precomputed.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed graph of causal connections `(j, i)`: `j`'s past drives `i`.
/// Self-loops are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    n_units: usize,
    edges: Vec<(usize, usize)>,
    /// For each unit `i`, the `(edge index, parent j)` pairs with edge `(j, i)`.
    incoming: Vec<Vec<(usize, usize)>>,
}

impl CausalGraph {
    /// Build from a list of `(from, to)` pairs. Duplicates are merged and the
    /// stored edge order is sorted by `(to, from)` so that edge indices do not
    /// depend on insertion order.
    pub fn new(n_units: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            check_unit(j, n_units)?;
            check_unit(i, n_units)?;
            set.insert((i, j));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().map(|(i, j)| (j, i)).collect();
        let mut incoming = vec![Vec::new(); n_units];
        for (e, &(j, i)) in edges.iter().enumerate() {
            incoming[i].push((e, j));
        }
        Ok(Self {
            n_units,
            edges,
            incoming,
        })
    }

    pub fn empty(n_units: usize) -> Self {
        Self {
            n_units,
            edges: Vec::new(),
            incoming: vec![Vec::new(); n_units],
        }
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// Edges as `(from, to)`, in storage order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Parent set `P_i`.
    pub fn parents(&self, i: usize) -> Result<BTreeSet<usize>> {
        check_unit(i, self.n_units)?;
        Ok(self.incoming[i].iter().map(|&(_, j)| j).collect())
    }

    /// `(edge index, parent)` pairs feeding unit `i`.
    pub fn incoming(&self, i: usize) -> &[(usize, usize)] {
        &self.incoming[i]
    }

    pub fn edge_index(&self, from: usize, to: usize) -> Option<usize> {
        self.incoming
            .get(to)?
            .iter()
            .find(|&&(_, j)| j == from)
            .map(|&(e, _)| e)
    }
}

/// Undirected graph of lateral (same-timestep) connections.
///
/// Edges are stored canonically as `(min, max)` and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LateralGraph {
    n_units: usize,
    edges: Vec<(usize, usize)>,
    /// For each unit, `(edge index, neighbour)` pairs.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl LateralGraph {
    pub fn new(n_units: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            check_unit(a, n_units)?;
            check_unit(b, n_units)?;
            if a == b {
                return Err(Error::LateralSelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n_units];
        for (e, &(a, b)) in edges.iter().enumerate() {
            adjacency[a].push((e, b));
            adjacency[b].push((e, a));
        }
        Ok(Self {
            n_units,
            edges,
            adjacency,
        })
    }

    pub fn empty(n_units: usize) -> Self {
        Self {
            n_units,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n_units],
        }
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// Canonical `(min, max)` edges.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Lateral neighbours `L_i`.
    pub fn neighbors(&self, i: usize) -> Result<BTreeSet<usize>> {
        check_unit(i, self.n_units)?;
        Ok(self.adjacency[i].iter().map(|&(_, j)| j).collect())
    }

    /// `(edge index, neighbour)` pairs of unit `i`.
    pub fn adjacency(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Index of the edge `{a, b}` in either orientation.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).ok()
    }
}

/// Reachable sets `C_i` and the lateral connected components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachableSets {
    /// Components, each sorted ascending; ordered by smallest member.
    components: Vec<Vec<usize>>,
    /// Lateral edge indices inside each component.
    component_edges: Vec<Vec<usize>>,
    component_of: Vec<usize>,
}

impl ReachableSets {
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_edges(&self, c: usize) -> &[usize] {
        &self.component_edges[c]
    }

    pub fn component_of(&self, i: usize) -> usize {
        self.component_of[i]
    }

    /// `C_i`: every unit laterally reachable from `i`, excluding `i`.
    pub fn reachable(&self, i: usize) -> Vec<usize> {
        self.components[self.component_of[i]]
            .iter()
            .copied()
            .filter(|&u| u != i)
            .collect()
    }
}

/// Breadth-first search over the lateral graph.
pub fn reachable_sets(g: &LateralGraph) -> ReachableSets {
    let n = g.n_units();
    let mut component_of = vec![usize::MAX; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component_of[start] = id;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &(_, v) in g.adjacency(u) {
                if component_of[v] == usize::MAX {
                    component_of[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    let mut component_edges = vec![Vec::new(); components.len()];
    for (e, &(a, _)) in g.edges().iter().enumerate() {
        component_edges[component_of[a]].push(e);
    }
    ReachableSets {
        components,
        component_edges,
        component_of,
    }
}

fn check_unit(i: usize, n_units: usize) -> Result<()> {
    if i < n_units {
        Ok(())
    } else {
        Err(Error::UnitOutOfRange { unit: i, n_units })
    }
}

/// Edge lists as they appear in configuration and checkpoint files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n_units: usize,
    #[serde(default)]
    pub causal: Vec<[usize; 2]>,
    #[serde(default)]
    pub lateral: Vec<[usize; 2]>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<(CausalGraph, LateralGraph)> {
        let causal = CausalGraph::new(self.n_units, self.causal.iter().map(|e| (e[0], e[1])))?;
        let lateral = LateralGraph::new(self.n_units, self.lateral.iter().map(|e| (e[0], e[1])))?;
        Ok((causal, lateral))
    }

    pub fn from_graphs(causal: &CausalGraph, lateral: &LateralGraph) -> Self {
        Self {
            n_units: causal.n_units(),
            causal: causal.edges().iter().map(|&(j, i)| [j, i]).collect(),
            lateral: lateral.edges().iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

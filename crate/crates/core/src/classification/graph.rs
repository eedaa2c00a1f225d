use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Corpus, PubId};

/// Undirected, weighted direct-citation graph.
///
/// Nodes are kept in ascending id order; adjacency lists are sorted by
/// neighbor index and never contain self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationGraph {
    nodes: Vec<PubId>,
    adjacency: Vec<Vec<(usize, f64)>>,
    strength: Vec<f64>,
}

impl CitationGraph {
    /// Builds a graph from unweighted links and applies the degree
    /// normalization `w_ij = (1/k_i + 1/k_j) / 2`, where `k` counts a node's
    /// distinct neighbors. Direction, duplicates and self-links are ignored.
    pub fn from_links(nodes: impl IntoIterator<Item = PubId>, links: &[(PubId, PubId)]) -> Self {
        let nodes: Vec<PubId> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index: BTreeMap<PubId, usize> = nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut neighbors: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
        for &(a, b) in links {
            let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) else {
                continue;
            };
            if i != j {
                neighbors[i].insert(j);
                neighbors[j].insert(i);
            }
        }
        let degree: Vec<f64> = neighbors.iter().map(|s| s.len() as f64).collect();
        let adjacency: Vec<Vec<(usize, f64)>> = neighbors
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.iter()
                    .map(|&j| (j, 0.5 * (1.0 / degree[i] + 1.0 / degree[j])))
                    .collect()
            })
            .collect();
        Self::assemble(nodes, adjacency)
    }

    /// Builds a graph from explicitly weighted edges. Repeated pairs sum,
    /// non-positive weights and self-loops are dropped.
    pub fn from_weighted_edges(
        nodes: impl IntoIterator<Item = PubId>,
        edges: &[(PubId, PubId, f64)],
    ) -> Self {
        let nodes: Vec<PubId> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index: BTreeMap<PubId, usize> = nodes.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); nodes.len()];
        for &(a, b, w) in edges {
            let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) else {
                continue;
            };
            if i == j || !(w > 0.0) {
                continue;
            }
            *acc[i].entry(j).or_insert(0.0) += w;
            *acc[j].entry(i).or_insert(0.0) += w;
        }
        let adjacency = acc.into_iter().map(|m| m.into_iter().collect()).collect();
        Self::assemble(nodes, adjacency)
    }

    fn assemble(nodes: Vec<PubId>, adjacency: Vec<Vec<(usize, f64)>>) -> Self {
        let strength = adjacency
            .iter()
            .map(|a| a.iter().map(|&(_, w)| w).sum())
            .collect();
        CitationGraph {
            nodes,
            adjacency,
            strength,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[PubId] {
        &self.nodes
    }

    pub fn node_index(&self, id: PubId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn strength(&self, i: usize) -> f64 {
        self.strength[i]
    }

    /// Weight of the edge between node indices `i` and `j`, zero if absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .map(|k| self.adjacency[i][k].1)
            .unwrap_or(0.0)
    }

    /// Subgraph on `keep`, with edge weights carried over unchanged.
    pub fn induced(&self, keep: &BTreeSet<PubId>) -> CitationGraph {
        let old_to_new: Vec<Option<usize>> = {
            let mut next = 0;
            self.nodes
                .iter()
                .map(|id| {
                    keep.contains(id).then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        let nodes: Vec<PubId> = self.nodes.iter().copied().filter(|id| keep.contains(id)).collect();
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .filter(|(i, _)| old_to_new[*i].is_some())
            .map(|(_, adj)| {
                adj.iter()
                    .filter_map(|&(j, w)| old_to_new[j].map(|nj| (nj, w)))
                    .collect()
            })
            .collect();
        Self::assemble(nodes, adjacency)
    }
}

/// One undirected link per citing-cited pair with both ends in `pubs`.
pub fn build_graph(c: &Corpus, pubs: &BTreeSet<PubId>) -> CitationGraph {
    let mut links = Vec::new();
    for &id in pubs {
        let Some(pos) = c.position(id) else { continue };
        for &t in c.cited(pos) {
            let target = c.publications()[t].id;
            if pubs.contains(&target) {
                links.push((id, target));
            }
        }
    }
    let nodes = pubs.iter().copied().filter(|&id| c.position(id).is_some());
    CitationGraph::from_links(nodes, &links)
}

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Nodes of the largest connected component. Equal-sized components are
/// ranked by their smallest node id.
pub fn largest_component(g: &CitationGraph) -> BTreeSet<PubId> {
    let n = g.node_count();
    if n == 0 {
        return BTreeSet::new();
    }
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for &(j, _) in g.neighbors(i) {
            if i < j {
                uf.union(i, j);
            }
        }
    }
    // Nodes are in ascending id order, so the first node seen for a root is
    // the component's smallest id.
    let mut best_root = uf.find(0);
    let mut best_size = uf.component_size(0);
    for i in 1..n {
        let r = uf.find(i);
        let s = uf.component_size(i);
        if s > best_size {
            best_root = r;
            best_size = s;
        }
    }
    (0..n)
        .filter(|&i| uf.find(i) == best_root)
        .map(|i| g.nodes()[i])
        .collect()
}

//! Resolution-parameterized clustering of the citation graph.
//!
//! The quality of a partition is `Σ_{i<j, same cluster} (w_ij − γ)`, i.e.
//! every pair of publications placed together costs the resolution `γ` and
//! earns their edge weight. It is maximized with a multilevel local-moving
//! heuristic: single nodes move to the neighboring cluster with the largest
//! gain, clusters are collapsed into nodes and moved again, and the result
//! is refined at the publication level until nothing improves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::graph::CitationGraph;
use super::system::{ClassificationSystem, FieldId};
use crate::error::{Error, Result};

/// Smallest quality gain accepted as an improvement.
const MIN_GAIN: f64 = 1e-12;
const MAX_REFINEMENT_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    A,
    B,
    C,
}

impl Preset {
    pub fn resolution(self) -> f64 {
        match self {
            Preset::A => 1e-7,
            Preset::B => 5e-7,
            Preset::C => 5e-6,
        }
    }

    pub fn min_cluster_size(self) -> usize {
        match self {
            Preset::A => 100_000,
            Preset::B => 10_000,
            Preset::C => 2_000,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Preset::A),
            "B" => Ok(Preset::B),
            "C" => Ok(Preset::C),
            other => Err(Error::Config(format!("unknown preset {other:?}, expected A, B or C"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Preset::A => "A",
            Preset::B => "B",
            Preset::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringParams {
    pub resolution: f64,
    pub min_cluster_size: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl ClusteringParams {
    pub fn new(resolution: f64, min_cluster_size: usize) -> Self {
        ClusteringParams {
            resolution,
            min_cluster_size,
            seed: 0,
            restarts: 10,
        }
    }

    pub fn from_preset(p: Preset) -> Self {
        Self::new(p.resolution(), p.min_cluster_size())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(Error::Config(format!("resolution must be positive, got {}", self.resolution)));
        }
        if self.min_cluster_size < 1 {
            return Err(Error::Config("min_cluster_size must be at least 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Quality of a labeling of `g`'s nodes: intra-cluster edge weight minus
/// `resolution` per intra-cluster node pair.
pub fn quality(g: &CitationGraph, labels: &[usize], resolution: f64) -> f64 {
    let mut internal = 0.0;
    for i in 0..g.node_count() {
        for &(j, w) in g.neighbors(i) {
            if i < j && labels[i] == labels[j] {
                internal += w;
            }
        }
    }
    let mut sizes: BTreeMap<usize, f64> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_insert(0.0) += 1.0;
    }
    let pairs: f64 = sizes.values().map(|&n| n * (n - 1.0) / 2.0).sum();
    internal - resolution * pairs
}

/// Relabels clusters in order of first appearance; returns the cluster count.
pub fn canonicalize(labels: &mut [usize]) -> usize {
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for l in labels.iter_mut() {
        let next = remap.len();
        *l = *remap.entry(*l).or_insert(next);
    }
    remap.len()
}

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    size: Vec<f64>,
}

impl Level {
    fn from_graph(g: &CitationGraph) -> Self {
        Level {
            adj: (0..g.node_count()).map(|i| g.neighbors(i).to_vec()).collect(),
            size: vec![1.0; g.node_count()],
        }
    }

    fn len(&self) -> usize {
        self.size.len()
    }

    /// Collapses every cluster into one node; also returns the node map.
    fn aggregate(&self, labels: &[usize]) -> (Level, Vec<usize>) {
        let mut dense = labels.to_vec();
        let k = canonicalize(&mut dense);
        let mut size = vec![0.0; k];
        let mut acc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        for v in 0..self.len() {
            let cv = dense[v];
            size[cv] += self.size[v];
            for &(u, w) in &self.adj[v] {
                let cu = dense[u];
                if cu != cv {
                    acc[cv].push((cu, w));
                }
            }
        }
        let adj = acc
            .into_iter()
            .map(|mut edges| {
                edges.sort_by_key(|&(u, _)| u);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(edges.len());
                for (u, w) in edges {
                    match merged.last_mut() {
                        Some((lu, lw)) if *lu == u => *lw += w,
                        _ => merged.push((u, w)),
                    }
                }
                merged
            })
            .collect();
        (Level { adj, size }, dense)
    }
}

/// Moves single nodes to the best neighboring (or an empty) cluster until a
/// full sweep changes nothing. Returns whether any node moved.
fn local_moving(g: &Level, labels: &mut [usize], resolution: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = g.len();
    let mut cluster_size = vec![0.0; n];
    for v in 0..n {
        cluster_size[labels[v]] += g.size[v];
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| cluster_size[c] == 0.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let current = labels[v];
            for &(u, w) in &g.adj[v] {
                let c = labels[u];
                if link[c] == 0.0 {
                    touched.push(c);
                }
                link[c] += w;
            }
            cluster_size[current] -= g.size[v];
            let sv = g.size[v];

            let mut best = current;
            let mut best_gain = link[current] - resolution * sv * cluster_size[current];
            for &c in &touched {
                if c == current {
                    continue;
                }
                let gain = link[c] - resolution * sv * cluster_size[c];
                let tie = best != current && (gain - best_gain).abs() <= MIN_GAIN && c < best;
                if gain > best_gain + MIN_GAIN || tie {
                    best = c;
                    best_gain = gain;
                }
            }
            if cluster_size[current] > 0.0 && 0.0 > best_gain + MIN_GAIN {
                while let Some(c) = empty.pop() {
                    if cluster_size[c] == 0.0 && c != current {
                        best = c;
                        break;
                    }
                }
            }

            cluster_size[best] += sv;
            if best != current {
                labels[v] = best;
                moved = true;
                if cluster_size[current] == 0.0 {
                    empty.push(current);
                }
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    moved_any
}

fn multilevel(base: &Level, resolution: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..base.len()).collect();
    for _ in 0..MAX_REFINEMENT_ROUNDS {
        let (mut level, mut map) = base.aggregate(&labels);
        loop {
            let mut lv: Vec<usize> = (0..level.len()).collect();
            if !local_moving(&level, &mut lv, resolution, rng) {
                break;
            }
            let (next, remap) = level.aggregate(&lv);
            for m in map.iter_mut() {
                *m = remap[*m];
            }
            level = next;
        }
        labels = map;
        if !local_moving(base, &mut labels, resolution, rng) {
            break;
        }
    }
    canonicalize(&mut labels);
    labels
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn better(q: f64, labels: &[usize], best_q: f64, best_labels: &[usize]) -> bool {
    let tol = 1e-12 * (1.0 + best_q.abs());
    if q > best_q + tol {
        return true;
    }
    q >= best_q - tol && labels < best_labels
}

/// Best partition over `params.restarts` seeded runs, before any size
/// constraint. Labels are canonical.
pub fn optimize(g: &CitationGraph, params: &ClusteringParams) -> (Vec<usize>, f64) {
    let base = Level::from_graph(g);
    let runs: Vec<(Vec<usize>, f64)> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(params.seed, r));
            let labels = multilevel(&base, params.resolution, &mut rng);
            let q = quality(g, &labels, params.resolution);
            (labels, q)
        })
        .collect();
    let mut iter = runs.into_iter();
    let (mut best_labels, mut best_q) = iter.next().expect("at least one restart");
    for (labels, q) in iter {
        if better(q, &labels, best_q, &best_labels) {
            best_labels = labels;
            best_q = q;
        }
    }
    (best_labels, best_q)
}

/// Merges every cluster smaller than `min_size` into the neighboring cluster
/// it is most strongly connected to; clusters without neighbors go to the
/// smallest cluster that already meets the size. Returns the cluster count.
pub fn enforce_min_size(g: &CitationGraph, labels: &mut [usize], min_size: usize) -> usize {
    let k = canonicalize(labels);
    let mut size = vec![0usize; k];
    for &l in labels.iter() {
        size[l] += 1;
    }
    let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    for i in 0..g.node_count() {
        for &(j, w) in g.neighbors(i) {
            let (a, b) = (labels[i], labels[j]);
            if i < j && a != b {
                *links[a].entry(b).or_insert(0.0) += w;
                *links[b].entry(a).or_insert(0.0) += w;
            }
        }
    }
    let mut by_size: BTreeSet<(usize, usize)> = (0..k).map(|c| (size[c], c)).collect();
    let mut merged_into: Vec<usize> = (0..k).collect();

    while by_size.len() > 1 {
        let &(small_size, small) = by_size.iter().next().expect("non-empty");
        if small_size >= min_size {
            break;
        }
        let neighbor = links[small]
            .iter()
            .filter(|(_, &w)| w > 0.0)
            .fold(None, |best: Option<(usize, f64)>, (&c, &w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((c, w)),
            })
            .map(|(c, _)| c);
        let target = neighbor
            .or_else(|| by_size.range((min_size, 0)..).next().map(|&(_, c)| c))
            .or_else(|| by_size.iter().find(|&&(_, c)| c != small).map(|&(_, c)| c))
            .expect("another cluster exists");

        by_size.remove(&(size[small], small));
        by_size.remove(&(size[target], target));
        size[target] += size[small];
        by_size.insert((size[target], target));
        merged_into[small] = target;

        let moved = std::mem::take(&mut links[small]);
        for (c, w) in moved {
            links[c].remove(&small);
            if c != target {
                *links[target].entry(c).or_insert(0.0) += w;
                *links[c].entry(target).or_insert(0.0) += w;
            }
        }
        links[target].remove(&small);
    }

    for l in labels.iter_mut() {
        let mut c = *l;
        while merged_into[c] != c {
            c = merged_into[c];
        }
        *l = c;
    }
    canonicalize(labels)
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    /// Canonical labels per graph node index.
    pub labels: Vec<usize>,
    pub quality: f64,
    pub clusters_before_enforcement: usize,
    pub system: ClassificationSystem,
}

/// Clusters the graph and enforces the minimum cluster size.
pub fn cluster_with_report(g: &CitationGraph, params: &ClusteringParams) -> Result<ClusterOutcome> {
    params.validate()?;
    if g.is_empty() {
        return Err(Error::Config("cannot cluster an empty graph".into()));
    }
    let (mut labels, clusters_before_enforcement) = if g.node_count() < params.min_cluster_size {
        log::warn!(
            "graph has {} nodes, fewer than the minimum cluster size {}; returning one cluster",
            g.node_count(),
            params.min_cluster_size
        );
        (vec![0; g.node_count()], 1)
    } else {
        let (labels, _) = optimize(g, params);
        let before = labels.iter().max().map_or(0, |m| m + 1);
        (labels, before)
    };
    let k = enforce_min_size(g, &mut labels, params.min_cluster_size);
    let q = quality(g, &labels, params.resolution);
    let assignment: BTreeMap<_, FieldId> = g
        .nodes()
        .iter()
        .zip(&labels)
        .map(|(&id, &l)| (id, l as FieldId))
        .collect();
    Ok(ClusterOutcome {
        system: ClassificationSystem::from_labels("clusters", assignment, k),
        labels,
        quality: q,
        clusters_before_enforcement,
    })
}

pub fn cluster(g: &CitationGraph, params: &ClusteringParams) -> Result<ClassificationSystem> {
    Ok(cluster_with_report(g, params)?.system)
}

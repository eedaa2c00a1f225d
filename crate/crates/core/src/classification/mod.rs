//! Publication-level field classification systems.
//!
//! Algorithmic systems are built from the direct-citation network: the
//! largest connected component is clustered, then publications outside it
//! are attached to the field they are most strongly bibliographically
//! coupled with. Externally supplied (possibly multi-assignment) systems are
//! read from `pub_id,field_id` CSV files.

mod clustering;
mod graph;
mod system;

use std::collections::{BTreeMap, BTreeSet};

pub use clustering::{
    canonicalize, cluster, cluster_with_report, enforce_min_size, optimize, quality, ClusterOutcome,
    ClusteringParams, Preset,
};
pub use graph::{build_graph, largest_component, CitationGraph, UnionFind};
pub use system::{load_external_classification, read_classification, ClassificationSystem, FieldId};

use crate::corpus::{Corpus, PubId};
use crate::error::{Error, Result};

/// Attaches each publication in `unassigned` to the field of `system` it
/// shares the most cited references with.
///
/// Coupling strength with a field is the number of (member, shared cited
/// publication) pairs. Ties go to the field with more members, then to the
/// lower field id. Publications without any coupling stay unassigned, and
/// existing assignments are never changed.
pub fn attach_remainder(
    c: &Corpus,
    system: &ClassificationSystem,
    unassigned: &BTreeSet<PubId>,
) -> Result<ClassificationSystem> {
    if system.field_count() == 0 {
        return Err(Error::Config("cannot attach publications to a system without fields".into()));
    }
    let sizes = system.field_sizes();
    let pubs = c.publications();
    let mut additions = Vec::new();
    for &id in unassigned {
        if system.contains(id) {
            continue;
        }
        let Some(pos) = c.position(id) else { continue };
        let mut strength: BTreeMap<FieldId, usize> = BTreeMap::new();
        for &cited in c.cited(pos) {
            for &other in c.citing(cited) {
                if other == pos {
                    continue;
                }
                for &f in system.fields_of(pubs[other].id) {
                    *strength.entry(f).or_insert(0) += 1;
                }
            }
        }
        let best = strength
            .into_iter()
            .max_by(|(fa, sa), (fb, sb)| {
                sa.cmp(sb)
                    .then(sizes[*fa as usize].cmp(&sizes[*fb as usize]))
                    .then(fb.cmp(fa))
            })
            .map(|(f, _)| f);
        if let Some(f) = best {
            additions.push((id, f));
        }
    }
    let mut out = system.clone();
    out.extend_unassigned(additions);
    Ok(out)
}

/// Counts recorded at each stage of [`build_classification`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub input_publications: usize,
    pub citation_links: usize,
    pub largest_component: usize,
    pub clusters_before_enforcement: usize,
    pub fields: usize,
    pub attached_by_coupling: usize,
    pub unassigned: usize,
}

#[derive(Debug, Clone)]
pub struct ClassificationBuild {
    pub system: ClassificationSystem,
    pub report: BuildReport,
    pub quality: f64,
}

/// Graph construction, largest component, clustering, then coupling-based
/// attachment of the remaining publications.
pub fn build_classification(
    c: &Corpus,
    pubs: &BTreeSet<PubId>,
    params: &ClusteringParams,
    name: &str,
) -> Result<ClassificationBuild> {
    params.validate()?;
    let g = build_graph(c, pubs);
    let lcc = largest_component(&g);
    if lcc.is_empty() {
        return Err(Error::Config("no publications to classify".into()));
    }
    let core = g.induced(&lcc);
    let outcome = cluster_with_report(&core, params)?;
    let rest: BTreeSet<PubId> = g.nodes().iter().copied().filter(|id| !lcc.contains(id)).collect();
    let system = attach_remainder(c, &outcome.system, &rest)?.with_name(name);
    let attached = system.assigned_count() - outcome.system.assigned_count();
    let report = BuildReport {
        input_publications: g.node_count(),
        citation_links: g.edge_count(),
        largest_component: lcc.len(),
        clusters_before_enforcement: outcome.clusters_before_enforcement,
        fields: system.field_count(),
        attached_by_coupling: attached,
        unassigned: g.node_count() - system.assigned_count(),
    };
    Ok(ClassificationBuild {
        system,
        report,
        quality: outcome.quality,
    })
}

//! Clusters the citation network of a synthetic corpus and compares the
//! fields found with the generating ones.
//!
//!     cargo run --release --example classify

use std::collections::{BTreeMap, BTreeSet};

use citenorm::classification::{build_classification, ClusteringParams};
use citenorm::synthgen::{generate, SynthConfig};

fn main() -> citenorm::Result<()> {
    let synth = generate(&SynthConfig::default())?;
    let pubs: BTreeSet<_> = synth
        .corpus
        .publications()
        .iter()
        .filter(|p| p.year >= 2008)
        .map(|p| p.id)
        .collect();
    let params = ClusteringParams::new(1e-4, 50).with_seed(7);
    let build = build_classification(&synth.corpus, &pubs, &params, "clusters")?;
    println!("{:#?}", build.report);
    println!("quality {:.3}", build.quality);

    // Cross-tabulate found fields against the generating fields.
    let mut table: BTreeMap<(String, &str), usize> = BTreeMap::new();
    for (id, fields) in build.system.iter() {
        let truth = synth.truth.field_name(synth.truth.fields_of(id)[0]);
        *table.entry((build.system.field_name(fields[0]).to_string(), truth)).or_default() += 1;
    }
    for ((found, truth), n) in table.iter().filter(|(_, &n)| n >= 20) {
        println!("cluster {found:>3} / {truth:<12} {n}");
    }
    Ok(())
}

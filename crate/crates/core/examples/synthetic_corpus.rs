//! Generates a synthetic corpus from a TOML configuration and writes it to
//! a directory.
//!
//!     cargo run --example synthetic_corpus -- [config.toml] [out-dir]

use std::path::PathBuf;

use citenorm::synthgen::{generate, SynthConfig};

fn main() -> citenorm::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/synth.toml")));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("citenorm-synth"));

    let cfg = SynthConfig::load(&config)?;
    let synth = generate(&cfg)?;
    let paths = synth.write(&out)?;
    for spec in &cfg.fields {
        let members: Vec<_> = synth
            .corpus
            .publications()
            .iter()
            .filter(|p| synth.truth.field_name(synth.truth.fields_of(p.id)[0]) == spec.name)
            .collect();
        let refs: usize = members.iter().map(|p| p.references.len() + p.external_references.len()).sum();
        println!(
            "{:<12} {:>6} publications, mean reference list {:.2} (configured {})",
            spec.name,
            members.len(),
            refs as f64 / members.len().max(1) as f64,
            spec.mean_refs
        );
    }
    println!("wrote {}, {} and {}", paths.corpus.display(), paths.journals.display(), paths.truth.display());
    Ok(())
}

//! Runs the whole pipeline on a freshly generated corpus and lists the run
//! directory.
//!
//!     cargo run --release --example pipeline

use citenorm::pipeline::{run_pipeline, PipelineConfig};
use citenorm::synthgen::{generate, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("citenorm-pipeline");
    let paths = generate(&SynthConfig::default())?.write(&dir.join("input"))?;

    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/pipeline.toml"))?;
    let mut cfg = PipelineConfig::from_toml(&text, None)?;
    cfg.input.corpus = paths.corpus;
    cfg.input.journals = Some(paths.journals);
    cfg.input.systems = vec![paths.truth];

    let run = dir.join("run");
    let outcome = run_pipeline(&cfg, &run)?;
    for stage in &outcome.manifest.stages {
        println!("{:<12} {:?} {:.2}s", stage.name, stage.status, stage.seconds);
        for f in &stage.outputs {
            println!("    {} {}", &f.sha256[..12], f.path.display());
        }
    }
    print!("{}", std::fs::read_to_string(run.join("report.txt"))?);
    Ok(())
}

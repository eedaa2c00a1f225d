//! Computes CS, NCS and the three source-normalized scores for a synthetic
//! corpus and prints their yearly means.
//!
//!     cargo run --release --example scores

use citenorm::evaluation::yearly_means;
use citenorm::normalization::{score_all, ScoreKind, ScoringParams};
use citenorm::synthgen::{generate, SynthConfig};

fn main() -> citenorm::Result<()> {
    let cfg = SynthConfig {
        zero_active_ref_share: 0.3,
        ..SynthConfig::default()
    };
    let synth = generate(&cfg)?;
    let params = ScoringParams {
        census_year: 2011,
        period: (2008, 2011),
    };
    let table = score_all(&synth.corpus, Some(&synth.truth), &params, None)?;
    println!("scored {} publications", table.len());

    print!("{:<6}", "year");
    for k in ScoreKind::ALL {
        print!("{:>9}", k.name());
    }
    println!();
    for y in yearly_means(&table, None) {
        print!("{:<6}", y.year);
        for k in ScoreKind::ALL {
            print!("{:>9.3}", y.means[&k].unwrap_or(f64::NAN));
        }
        println!();
    }
    Ok(())
}

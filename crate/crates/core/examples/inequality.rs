//! Evaluates every score against the generating fields: the inequality
//! curve I(q) and the decomposition of total inequality.
//!
//!     cargo run --release --example inequality

use citenorm::evaluation::{assign_quantiles, decompose, inequality_curve, score_column};
use citenorm::normalization::{score_all, ScoreKind, ScoringParams};
use citenorm::synthgen::{generate, SynthConfig};

fn main() -> citenorm::Result<()> {
    let synth = generate(&SynthConfig::default())?;
    let params = ScoringParams {
        census_year: 2011,
        period: (2008, 2011),
    };
    let table = score_all(&synth.corpus, Some(&synth.truth), &params, None)?;

    println!("{:<6} {:>9} {:>9} {:>9} {:>9}   I(q) at q = 10, 50, 90", "score", "W", "S", "IDCP", "I");
    for kind in ScoreKind::ALL {
        let cells = assign_quantiles(&score_column(&table, kind), &synth.truth, None, 100)?;
        let d = decompose(&cells)?;
        let curve = inequality_curve(&cells);
        let at = |q| {
            curve
                .get(q)
                .and_then(|p| p.inequality)
                .map_or("-".to_string(), |v| format!("{v:.4}"))
        };
        println!(
            "{:<6} {:>9.5} {:>9.5} {:>9.5} {:>9.5}   {} {} {}",
            kind.name(),
            d.within,
            d.between_intervals,
            d.idcp,
            d.total,
            at(10),
            at(50),
            at(90)
        );
    }
    Ok(())
}

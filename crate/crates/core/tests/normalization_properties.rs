use std::collections::BTreeMap;

use citenorm::classification::ClassificationSystem;
use citenorm::corpus::{Corpus, DocType, Publication};
use citenorm::normalization::{score_all, ScoringContext, ScoringParams, WindowSpec};
use citenorm::synthgen::{generate, FieldSpec, SynthConfig};
use proptest::prelude::*;

fn publication(id: u64, year: i32, journal: &str, refs: &[u64]) -> Publication {
    Publication {
        id,
        year,
        journal: journal.into(),
        doc_type: DocType::Article,
        language: "en".into(),
        author_count: 1,
        countries: vec![],
        references: refs.to_vec(),
        external_references: vec![],
    }
}

fn small_config(seed: u64, zero: f64, within: f64) -> SynthConfig {
    SynthConfig {
        seed,
        first_year: 2006,
        last_year: 2011,
        zero_active_ref_share: zero,
        within_field: within,
        review_share: 0.0,
        fields: vec![
            FieldSpec::new("a", 60, 8.0),
            FieldSpec::new("b", 40, 3.0),
            FieldSpec::new("c", 30, 14.0),
        ],
        ..SynthConfig::default()
    }
}

const PARAMS: ScoringParams = ScoringParams {
    census_year: 2011,
    period: (2008, 2011),
};

/// Active references of citing position `k` for window `l`, counted from
/// the raw reference lists.
fn active_oracle(c: &Corpus, k: usize, l: usize) -> Vec<usize> {
    let pubs = c.publications();
    c.cited(k)
        .iter()
        .copied()
        .filter(|&t| {
            let gap = pubs[k].year - pubs[t].year;
            gap >= 0 && (gap as usize) < l
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sncs3_dominates_sncs2(seed in 0u64..1000, zero in 0.0f64..0.6) {
        let out = generate(&small_config(seed, zero, 0.8)).unwrap();
        let t = score_all(&out.corpus, Some(&out.truth), &PARAMS, None).unwrap();
        for r in &t.rows {
            prop_assert!(r.sncs3 >= r.sncs2 - 1e-12);
            prop_assert!(r.sncs1 >= 0.0 && r.sncs2 >= 0.0);
        }
    }

    #[test]
    fn ncs_cell_means_are_one(seed in 0u64..1000) {
        let out = generate(&small_config(seed, 0.1, 0.7)).unwrap();
        let t = score_all(&out.corpus, Some(&out.truth), &PARAMS, None).unwrap();
        let mut cells: BTreeMap<(u32, i32), (f64, usize)> = BTreeMap::new();
        for r in &t.rows {
            if let Some(v) = r.ncs {
                let e = cells.entry((out.truth.fields_of(r.pub_id)[0], r.year)).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        prop_assert!(!cells.is_empty());
        for (_, (sum, n)) in cells {
            prop_assert!((sum / n as f64 - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sncs2_credits_are_conserved(seed in 0u64..1000, zero in 0.0f64..0.5) {
        let out = generate(&small_config(seed, zero, 0.8)).unwrap();
        let c = &out.corpus;
        let ctx = ScoringContext::new(c, None, PARAMS.census_year);
        let t = score_all(c, None, &PARAMS, None).unwrap();
        let pubs = c.publications();
        for year in PARAMS.period.0..=PARAMS.period.1 {
            let l = WindowSpec { census_year: PARAMS.census_year, pub_year: year }.length();
            let received: f64 = t.rows.iter().filter(|r| r.year == year).map(|r| r.sncs2).sum();
            // Credit each citing publication hands to publications of `year`.
            let mut sent = 0.0;
            for k in 0..c.len() {
                if pubs[k].year < year || pubs[k].year > PARAMS.census_year {
                    continue;
                }
                let active = active_oracle(c, k, l);
                prop_assert_eq!(ctx.active_refs(pubs[k].id, l) as usize, active.len());
                let into_year = active.iter().filter(|&&a| pubs[a].year == year).count();
                if !active.is_empty() {
                    sent += into_year as f64 / active.len() as f64;
                }
            }
            prop_assert!((received - sent).abs() <= 1e-9 * (1.0 + sent));
        }
    }
}

#[test]
fn every_citing_publication_distributes_one_credit() {
    let out = generate(&SynthConfig {
        seed: 5,
        first_year: 2008,
        last_year: 2011,
        fields: vec![FieldSpec::new("a", 150, 10.0), FieldSpec::new("b", 100, 4.0)],
        ..SynthConfig::default()
    })
    .unwrap();
    let c = &out.corpus;
    let ctx = ScoringContext::new(c, None, 2011);
    let mut checked = 0;
    for (k, p) in c.publications().iter().enumerate() {
        for l in 1..=4 {
            let r = ctx.active_refs(p.id, l) as usize;
            assert_eq!(r, active_oracle(c, k, l).len());
            if r >= 1 {
                let total: f64 = (0..r).map(|_| 1.0 / r as f64).sum();
                assert!((total - 1.0).abs() <= 1e-12);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn identical_reference_counts_make_source_scores_agree() {
    // Every 2011 publication cites exactly two 2010 publications.
    let mut pubs: Vec<Publication> = (1..=6).map(|i| publication(i, 2010, "A", &[])).collect();
    for k in 0..9u64 {
        let a = 1 + k % 6;
        let b = 1 + (k + 1) % 6;
        let journal = if k % 2 == 0 { "B" } else { "C" };
        pubs.push(publication(100 + k, 2011, journal, &[a, b]));
    }
    let c = Corpus::new(pubs, None).unwrap();
    let t = score_all(
        &c,
        None,
        &ScoringParams {
            census_year: 2011,
            period: (2010, 2010),
        },
        None,
    )
    .unwrap();
    for r in &t.rows {
        assert!(r.cs > 0);
        assert_eq!(r.sncs1, r.sncs2);
        assert_eq!(r.sncs2, r.sncs3);
    }
}

#[test]
fn duplicating_citers_leaves_ncs_unchanged() {
    let cited: Vec<Publication> = (1..=5).map(|i| publication(i, 2010, "A", &[])).collect();
    let citers = [(100, vec![1, 2]), (101, vec![1]), (102, vec![3, 4, 1])];
    let build = |copies: u64| {
        let mut pubs = cited.clone();
        for copy in 0..copies {
            for (id, refs) in &citers {
                pubs.push(publication(id + 1000 * copy, 2011, "B", refs));
            }
        }
        let c = Corpus::new(pubs, None).unwrap();
        let sys = ClassificationSystem::single("s", c.publications().iter().map(|p| (p.id, p.journal.clone())));
        score_all(
            &c,
            Some(&sys),
            &ScoringParams {
                census_year: 2011,
                period: (2010, 2010),
            },
            None,
        )
        .unwrap()
    };
    let once = build(1);
    let thrice = build(3);
    for (a, b) in once.rows.iter().zip(&thrice.rows) {
        assert_eq!(a.pub_id, b.pub_id);
        assert_eq!(b.cs, 3 * a.cs);
        let (x, y) = (a.ncs.unwrap(), b.ncs.unwrap());
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn full_share_with_active_reduces_sncs3_to_sncs2() {
    let out = generate(&SynthConfig {
        seed: 11,
        first_year: 2006,
        last_year: 2011,
        non_core_ref_share: 0.0,
        age_weights: vec![1.0],
        fields: vec![FieldSpec::new("a", 200, 25.0)],
        ..SynthConfig::default()
    })
    .unwrap();
    let ctx = ScoringContext::new(&out.corpus, None, 2011);
    let t = score_all(&out.corpus, None, &PARAMS, None).unwrap();
    let mut checked = 0;
    for r in &t.rows {
        // Same-year references only and long lists: every citing
        // journal-year has p = 1 as long as no publication drew zero refs.
        let all_full = out.corpus.reverse_index(r.pub_id).iter().all(|&k| {
            let p = out.corpus.get(k).unwrap();
            let l = WindowSpec {
                census_year: 2011,
                pub_year: r.year,
            }
            .length();
            ctx.journal_year_profile(&p.journal, p.year, l)
                .is_some_and(|prof| prof.share_with_active == 1.0)
        });
        if all_full && r.cs > 0 {
            assert!((r.sncs3 - r.sncs2).abs() < 1e-12);
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} publications checked");
}

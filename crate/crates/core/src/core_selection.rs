//! Core-journal selection.
//!
//! Three steps: an eligibility filter on publications, an internationality
//! test comparing each journal's country distribution with the overall one
//! through the Kullback-Leibler divergence, and a fixpoint that repeatedly
//! drops journals whose publications do not sufficiently cite recent work in
//! the remaining journals.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::corpus::{Corpus, JournalId, PubId};
use crate::error::{Error, Result};

/// Highest threshold that still excludes every journal fully focused on a
/// single country.
pub const DEFAULT_KL_THRESHOLD: f64 = 1.3260;
pub const DEFAULT_RECENT_GAP: i32 = 4;
pub const DEFAULT_ACTIVE_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountryDistribution {
    weights: BTreeMap<String, f64>,
}

impl CountryDistribution {
    pub fn from_weights<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut weights = BTreeMap::new();
        for (c, w) in pairs {
            *weights.entry(c.into()).or_insert(0.0) += w;
        }
        CountryDistribution { weights }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, country: &str) -> f64 {
        self.weights.get(country).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(c, &w)| (c.as_str(), w))
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Unweighted mean of non-empty distributions; empty inputs are ignored.
    pub fn mean<'a, I>(dists: I) -> Self
    where
        I: IntoIterator<Item = &'a CountryDistribution>,
    {
        let mut sum: BTreeMap<String, f64> = BTreeMap::new();
        let mut count = 0usize;
        for d in dists {
            if d.is_empty() {
                continue;
            }
            count += 1;
            for (c, w) in &d.weights {
                *sum.entry(c.clone()).or_insert(0.0) += w;
            }
        }
        if count == 0 {
            return CountryDistribution::default();
        }
        let n = count as f64;
        CountryDistribution {
            weights: sum.into_iter().map(|(c, w)| (c, w / n)).collect(),
        }
    }
}

/// `Σ_j p_j ln(p_j / q_j)` with `0 ln 0 = 0`.
///
/// Fails with the offending country when `p_j > 0` and `q_j = 0`.
pub fn kl_divergence(p: &CountryDistribution, q: &CountryDistribution) -> std::result::Result<f64, String> {
    let mut d = 0.0;
    for (country, pw) in p.iter() {
        if pw <= 0.0 {
            continue;
        }
        let qw = q.weight(country);
        if qw <= 0.0 {
            return Err(country.to_string());
        }
        d += pw * (pw / qw).ln();
    }
    // Gibbs' inequality; clamp rounding noise.
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalProfile {
    pub journal_id: JournalId,
    pub distribution: CountryDistribution,
    pub kl: f64,
    pub publication_count: usize,
}

/// Step 1: articles and reviews in English with at least one author,
/// published in `[year_lo, year_hi]`.
pub fn step1_filter(c: &Corpus, year_lo: i32, year_hi: i32) -> BTreeSet<PubId> {
    c.publications()
        .iter()
        .filter(|p| {
            p.doc_type.is_research()
                && p.author_count >= 1
                && p.is_english()
                && (year_lo..=year_hi).contains(&p.year)
        })
        .map(|p| p.id)
        .collect()
}

fn eligibility_mask(c: &Corpus, eligible: &BTreeSet<PubId>) -> Vec<bool> {
    c.publications().iter().map(|p| eligible.contains(&p.id)).collect()
}

fn pooled_distribution(c: &Corpus, pos: usize, mask: &[bool]) -> CountryDistribution {
    let pubs = c.publications();
    let mut sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut contributors = 0usize;
    let own = std::iter::once(pos);
    let citers = c.citing(pos).iter().copied().filter(|&k| mask[k]);
    for k in own.chain(citers) {
        let countries = &pubs[k].countries;
        if countries.is_empty() {
            continue;
        }
        contributors += 1;
        for (country, w) in countries {
            *sum.entry(country.clone()).or_insert(0.0) += w;
        }
    }
    if contributors == 0 {
        return CountryDistribution::default();
    }
    let n = contributors as f64;
    CountryDistribution {
        weights: sum.into_iter().map(|(k, w)| (k, w / n)).collect(),
    }
}

/// Country distribution of one publication: its own country weights pooled
/// with those of every eligible citing publication, each source carrying
/// equal mass. Empty when no source has address data.
pub fn publication_country_distribution(
    c: &Corpus,
    pub_id: PubId,
    eligible: &BTreeSet<PubId>,
) -> CountryDistribution {
    let Some(pos) = c.position(pub_id) else {
        return CountryDistribution::default();
    };
    pooled_distribution(c, pos, &eligibility_mask(c, eligible))
}

fn distributions_by_position(c: &Corpus, mask: &[bool]) -> Vec<Option<CountryDistribution>> {
    (0..c.len())
        .into_par_iter()
        .map(|pos| mask[pos].then(|| pooled_distribution(c, pos, mask)))
        .collect()
}

/// Mean of the per-publication distributions over all eligible publications.
pub fn overall_distribution(c: &Corpus, eligible: &BTreeSet<PubId>) -> CountryDistribution {
    let mask = eligibility_mask(c, eligible);
    let dists = distributions_by_position(c, &mask);
    CountryDistribution::mean(dists.iter().flatten())
}

fn profile_from(
    journal: &str,
    dists: &[&CountryDistribution],
    overall: &CountryDistribution,
) -> Result<JournalProfile> {
    let distribution = CountryDistribution::mean(dists.iter().copied());
    let kl = kl_divergence(&distribution, overall).map_err(|country| Error::DivergenceUndefined {
        journal: journal.to_string(),
        country,
    })?;
    Ok(JournalProfile {
        journal_id: journal.to_string(),
        distribution,
        kl,
        publication_count: dists.len(),
    })
}

/// Profile of one journal over its eligible publications.
pub fn journal_profile(
    c: &Corpus,
    journal: &str,
    eligible: &BTreeSet<PubId>,
    overall: &CountryDistribution,
) -> Result<JournalProfile> {
    let mask = eligibility_mask(c, eligible);
    let jpos = c.journal_position(journal);
    let dists: Vec<CountryDistribution> = (0..c.len())
        .filter(|&pos| mask[pos] && Some(c.journal_of(pos)) == jpos)
        .map(|pos| pooled_distribution(c, pos, &mask))
        .filter(|d| !d.is_empty())
        .collect();
    let refs: Vec<&CountryDistribution> = dists.iter().collect();
    profile_from(journal, &refs, overall)
}

/// Journals whose divergence is strictly below `threshold`.
pub fn select_international(profiles: &[JournalProfile], threshold: f64) -> BTreeSet<JournalId> {
    profiles
        .iter()
        .filter(|p| p.kl < threshold)
        .map(|p| p.journal_id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixpointParams {
    /// Publications whose referencing is assessed.
    pub analysis_years: (i32, i32),
    /// A cited publication is recent if `0 <= citing - cited <= recent_gap`.
    pub recent_gap: i32,
    /// Minimum share of a journal's publications citing recent core work.
    pub ratio: f64,
}

impl FixpointParams {
    pub fn new(analysis_years: (i32, i32)) -> Self {
        FixpointParams {
            analysis_years,
            recent_gap: DEFAULT_RECENT_GAP,
            ratio: DEFAULT_ACTIVE_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JournalAudit {
    pub journal_id: JournalId,
    /// `None` when no publication of the journal has country data.
    pub kl: Option<f64>,
    pub kept_after_step2: bool,
    /// Active-citation share per fixpoint round the journal took part in.
    pub ratios: Vec<f64>,
    pub kept_after_step3: bool,
    /// 1-based fixpoint round in which the journal was removed.
    pub removal_round: Option<usize>,
}

impl JournalAudit {
    pub fn final_ratio(&self) -> Option<f64> {
        self.ratios.last().copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoreSelectionResult {
    pub eligible_pub_ids: BTreeSet<PubId>,
    pub international_journal_ids: BTreeSet<JournalId>,
    pub core_journal_ids: BTreeSet<JournalId>,
    pub iterations: usize,
    pub audit: Vec<JournalAudit>,
}

/// Iteratively removes journals whose share of publications citing recent
/// publications in the current core set falls below `params.ratio`.
///
/// All failing journals of a round are removed together, so the result does
/// not depend on iteration order. It is the greatest subset of the
/// candidates in which every journal meets the requirement.
pub fn core_fixpoint(
    c: &Corpus,
    candidates: &BTreeSet<JournalId>,
    eligible: &BTreeSet<PubId>,
    params: FixpointParams,
) -> CoreSelectionResult {
    let mask = eligibility_mask(c, eligible);
    let (lo, hi) = params.analysis_years;
    let pubs = c.publications();
    let njournals = c.journals().len();

    // For every assessed publication, the journals holding at least one of
    // its recent eligible cited publications.
    let mut assessed: Vec<Vec<usize>> = vec![Vec::new(); njournals];
    let mut recent_targets: Vec<Vec<usize>> = Vec::new();
    for pos in 0..c.len() {
        let p = &pubs[pos];
        if !mask[pos] || p.year < lo || p.year > hi {
            continue;
        }
        let mut js: Vec<usize> = c
            .cited(pos)
            .iter()
            .filter(|&&t| mask[t])
            .filter(|&&t| {
                let gap = p.year - pubs[t].year;
                (0..=params.recent_gap).contains(&gap)
            })
            .map(|&t| c.journal_of(t))
            .collect();
        js.sort_unstable();
        js.dedup();
        assessed[c.journal_of(pos)].push(recent_targets.len());
        recent_targets.push(js);
    }

    let mut in_core = vec![false; njournals];
    for j in candidates {
        if let Some(jp) = c.journal_position(j) {
            in_core[jp] = true;
        }
    }

    let mut audit: BTreeMap<usize, JournalAudit> = candidates
        .iter()
        .filter_map(|j| c.journal_position(j))
        .map(|jp| {
            (
                jp,
                JournalAudit {
                    journal_id: c.journals()[jp].id.clone(),
                    kl: None,
                    kept_after_step2: true,
                    ratios: Vec::new(),
                    kept_after_step3: false,
                    removal_round: None,
                },
            )
        })
        .collect();

    let mut iterations = 0;
    loop {
        let current: Vec<usize> = (0..njournals).filter(|&j| in_core[j]).collect();
        if current.is_empty() {
            break;
        }
        iterations += 1;
        let ratios: Vec<f64> = current
            .par_iter()
            .map(|&j| {
                let members = &assessed[j];
                if members.is_empty() {
                    return 0.0;
                }
                let hits = members
                    .iter()
                    .filter(|&&m| recent_targets[m].iter().any(|&t| in_core[t]))
                    .count();
                hits as f64 / members.len() as f64
            })
            .collect();
        let mut removed = false;
        for (&j, &r) in current.iter().zip(&ratios) {
            let a = audit.get_mut(&j).expect("every core journal is audited");
            a.ratios.push(r);
            if r < params.ratio {
                in_core[j] = false;
                a.removal_round = Some(iterations);
                removed = true;
            }
        }
        if !removed {
            break;
        }
    }

    let mut core_journal_ids = BTreeSet::new();
    for (jp, a) in audit.iter_mut() {
        a.kept_after_step3 = in_core[*jp];
        if in_core[*jp] {
            core_journal_ids.insert(a.journal_id.clone());
        }
    }

    CoreSelectionResult {
        eligible_pub_ids: eligible.clone(),
        international_journal_ids: candidates.clone(),
        core_journal_ids,
        iterations,
        audit: audit.into_values().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreSelectionParams {
    /// Step-1 publication years; should start `recent_gap` years before the
    /// analysis period so early publications have recent work to cite.
    pub eligible_years: (i32, i32),
    pub threshold: f64,
    pub fixpoint: FixpointParams,
}

impl CoreSelectionParams {
    pub fn new(eligible_years: (i32, i32), analysis_years: (i32, i32)) -> Self {
        CoreSelectionParams {
            eligible_years,
            threshold: DEFAULT_KL_THRESHOLD,
            fixpoint: FixpointParams::new(analysis_years),
        }
    }
}

/// Runs all three steps.
///
/// Journals none of whose eligible publications carry country data cannot
/// be assessed for internationality and pass step 2 unchanged.
pub fn select_core(c: &Corpus, params: &CoreSelectionParams) -> Result<CoreSelectionResult> {
    let (lo, hi) = params.eligible_years;
    if lo > hi {
        return Err(Error::Config(format!("empty eligible period {lo}..{hi}")));
    }
    let eligible = step1_filter(c, lo, hi);
    let mask = eligibility_mask(c, &eligible);
    let dists = distributions_by_position(c, &mask);
    let overall = CountryDistribution::mean(dists.iter().flatten());

    let mut by_journal: BTreeMap<usize, Vec<&CountryDistribution>> = BTreeMap::new();
    let mut with_eligible: BTreeSet<usize> = BTreeSet::new();
    for (pos, d) in dists.iter().enumerate() {
        if let Some(d) = d {
            with_eligible.insert(c.journal_of(pos));
            if !d.is_empty() {
                by_journal.entry(c.journal_of(pos)).or_default().push(d);
            }
        }
    }

    let profiles: Vec<JournalProfile> = by_journal
        .par_iter()
        .map(|(&jp, ds)| profile_from(&c.journals()[jp].id, ds, &overall))
        .collect::<Result<_>>()?;
    let mut candidates = select_international(&profiles, params.threshold);
    for &jp in &with_eligible {
        if !by_journal.contains_key(&jp) {
            candidates.insert(c.journals()[jp].id.clone());
        }
    }

    let mut result = core_fixpoint(c, &candidates, &eligible, params.fixpoint);

    let kl_of: BTreeMap<&str, f64> = profiles
        .iter()
        .map(|p| (p.journal_id.as_str(), p.kl))
        .collect();
    for a in result.audit.iter_mut() {
        a.kl = kl_of.get(a.journal_id.as_str()).copied();
    }
    for p in &profiles {
        if !candidates.contains(&p.journal_id) {
            result.audit.push(JournalAudit {
                journal_id: p.journal_id.clone(),
                kl: Some(p.kl),
                kept_after_step2: false,
                ratios: Vec::new(),
                kept_after_step3: false,
                removal_round: None,
            });
        }
    }
    result.audit.sort_by(|a, b| a.journal_id.cmp(&b.journal_id));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{equal_country_weights, DocType, Publication};

    fn publication(id: u64, year: i32, journal: &str, countries: &[&str], refs: &[u64]) -> Publication {
        Publication {
            id,
            year,
            journal: journal.into(),
            doc_type: DocType::Article,
            language: "en".into(),
            author_count: 1,
            countries: equal_country_weights(countries),
            references: refs.to_vec(),
            external_references: vec![],
        }
    }

    fn corpus(pubs: Vec<Publication>) -> Corpus {
        Corpus::new(pubs, None).unwrap()
    }

    #[test]
    fn step1_criteria() {
        let mut review = publication(1, 2005, "J", &[], &[]);
        review.doc_type = DocType::Review;
        review.author_count = 2;
        let mut anonymous = publication(2, 2005, "J", &[], &[]);
        anonymous.author_count = 0;
        let mut german = publication(3, 2005, "J", &[], &[]);
        german.language = "de".into();
        let mut letter = publication(4, 2005, "J", &[], &[]);
        letter.doc_type = DocType::Other("letter".into());
        let late = publication(5, 2012, "J", &[], &[]);
        let c = corpus(vec![review, anonymous, german, letter, late]);
        assert_eq!(step1_filter(&c, 1999, 2011), BTreeSet::from([1]));
    }

    #[test]
    fn pooled_country_distribution() {
        let c = corpus(vec![
            publication(1, 2005, "J", &["NL", "BE", "FR"], &[]),
            publication(2, 2006, "J", &["NL"], &[1]),
            publication(3, 2006, "J", &["NL", "BE", "DE"], &[1]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let d = publication_country_distribution(&c, 1, &eligible);
        assert!((d.weight("NL") - 5.0 / 9.0).abs() < 1e-15);
        assert!((d.weight("BE") - 2.0 / 9.0).abs() < 1e-15);
        assert!((d.weight("FR") - 1.0 / 9.0).abs() < 1e-15);
        assert!((d.weight("DE") - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn uncited_single_country_and_empty() {
        let c = corpus(vec![
            publication(1, 2005, "J", &["US"], &[]),
            publication(2, 2005, "J", &[], &[]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let d = publication_country_distribution(&c, 1, &eligible);
        assert_eq!(d.weight("US"), 1.0);
        assert!(publication_country_distribution(&c, 2, &eligible).is_empty());
    }

    #[test]
    fn ineligible_citers_are_ignored() {
        let mut citer = publication(2, 2006, "J", &["DE"], &[1]);
        citer.language = "de".into();
        let c = corpus(vec![publication(1, 2005, "J", &["US"], &[]), citer]);
        let eligible = step1_filter(&c, 1999, 2011);
        let d = publication_country_distribution(&c, 1, &eligible);
        assert_eq!(d.weight("US"), 1.0);
        assert_eq!(d.weight("DE"), 0.0);
    }

    #[test]
    fn kl_single_country_journal() {
        let p = CountryDistribution::from_weights([("US", 1.0)]);
        let q = CountryDistribution::from_weights([("US", 0.25), ("NL", 0.75)]);
        let d = kl_divergence(&p, &q).unwrap();
        assert!((d - 4f64.ln()).abs() < 1e-12);
        assert!(d > DEFAULT_KL_THRESHOLD);
    }

    #[test]
    fn kl_undefined_on_missing_support() {
        let p = CountryDistribution::from_weights([("US", 1.0)]);
        let q = CountryDistribution::from_weights([("NL", 1.0)]);
        assert_eq!(kl_divergence(&p, &q), Err("US".to_string()));
    }

    #[test]
    fn two_publication_journal_matches_overall() {
        let c = corpus(vec![
            publication(1, 2005, "J", &["NL"], &[]),
            publication(2, 2005, "J", &["US"], &[]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let overall = CountryDistribution::from_weights([("NL", 0.5), ("US", 0.5)]);
        let prof = journal_profile(&c, "J", &eligible, &overall).unwrap();
        assert_eq!(prof.distribution.weight("NL"), 0.5);
        assert_eq!(prof.kl, 0.0);
        assert_eq!(prof.publication_count, 2);
    }

    #[test]
    fn threshold_is_strict() {
        let prof = |id: &str, kl: f64| JournalProfile {
            journal_id: id.into(),
            distribution: CountryDistribution::default(),
            kl,
            publication_count: 1,
        };
        let kept = select_international(
            &[prof("a", 0.0), prof("b", 4f64.ln()), prof("c", 1.3260)],
            DEFAULT_KL_THRESHOLD,
        );
        assert_eq!(kept, BTreeSet::from(["a".to_string()]));
    }

    #[test]
    fn self_citing_journal_is_stable() {
        let c = corpus(vec![
            publication(1, 2005, "J", &[], &[2]),
            publication(2, 2006, "J", &[], &[1]),
            publication(3, 2007, "J", &[], &[1, 2]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let r = core_fixpoint(&c, &BTreeSet::from(["J".into()]), &eligible, FixpointParams::new((2003, 2011)));
        assert_eq!(r.core_journal_ids.len(), 1);
        assert_eq!(r.iterations, 1);
        // Publication 1 cites a later publication: not recent under 0 <= gap.
        assert!((r.audit[0].final_ratio().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cascade_empties_in_three_rounds() {
        let c = corpus(vec![
            publication(1, 2006, "A", &[], &[2]),
            publication(2, 2005, "B", &[], &[3]),
            publication(3, 2004, "C", &[], &[]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let cands: BTreeSet<JournalId> = ["A", "B", "C"].map(String::from).into();
        let r = core_fixpoint(&c, &cands, &eligible, FixpointParams::new((2003, 2011)));
        assert!(r.core_journal_ids.is_empty());
        assert_eq!(r.iterations, 3);
        let rounds: Vec<_> = r.audit.iter().map(|a| a.removal_round).collect();
        assert_eq!(rounds, vec![Some(3), Some(2), Some(1)]);
    }

    #[test]
    fn exactly_half_is_kept() {
        let c = corpus(vec![
            publication(1, 2005, "J", &[], &[]),
            publication(2, 2006, "J", &[], &[1]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let r = core_fixpoint(&c, &BTreeSet::from(["J".into()]), &eligible, FixpointParams::new((2003, 2011)));
        assert_eq!(r.audit[0].final_ratio(), Some(0.5));
        assert!(r.audit[0].kept_after_step3);
    }

    #[test]
    fn gap_beyond_four_years_is_not_recent() {
        let c = corpus(vec![
            publication(1, 2000, "J", &[], &[]),
            publication(2, 2005, "J", &[], &[1]),
            publication(3, 2005, "J", &[], &[1]),
        ]);
        let eligible = step1_filter(&c, 1999, 2011);
        let r = core_fixpoint(&c, &BTreeSet::from(["J".into()]), &eligible, FixpointParams::new((2003, 2011)));
        assert!(r.core_journal_ids.is_empty());
    }

    #[test]
    fn select_core_drops_national_journal() {
        let mut pubs = Vec::new();
        let mut id = 0;
        // Journal "INT" publishes with a spread of countries, "NAT" only US.
        let spread = ["NL", "DE", "FR", "GB", "JP", "CN", "BR", "IT", "ES", "KR"];
        for (k, country) in spread.iter().enumerate() {
            id += 1;
            pubs.push(publication(id, 2005 + (k as i32 % 2), "INT", &[country], &[]));
        }
        id += 1;
        pubs.push(publication(id, 2006, "NAT", &["US"], &[]));
        // Everyone cites the first INT publication so the fixpoint keeps INT.
        for p in pubs.iter_mut().skip(1) {
            p.references.push(1);
        }
        let c = corpus(pubs);
        let r = select_core(&c, &CoreSelectionParams::new((1999, 2011), (2003, 2011))).unwrap();
        assert_eq!(r.international_journal_ids, BTreeSet::from(["INT".to_string()]));
        let nat = r.audit.iter().find(|a| a.journal_id == "NAT").unwrap();
        assert!(!nat.kept_after_step2);
        assert!(nat.kl.unwrap() > DEFAULT_KL_THRESHOLD);
    }
}

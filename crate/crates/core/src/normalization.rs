//! Per-publication citation scores.
//!
//! Five scores are produced for every scored publication:
//!
//! - `cs`: citations received up to the census year;
//! - `ncs`: `cs / e`, with `e` the mean citations of the publication's
//!   field-year cell (harmonic mean over cells for multi-field publications);
//! - `sncs1`: each citation weighted by `1/a`, where `a` is the mean number
//!   of active references of the citing journal in the citing year;
//! - `sncs2`: each citation weighted by `1/r`, where `r` is the number of
//!   active references of the citing publication;
//! - `sncs3`: each citation weighted by `1/(p r)`, where `p` is the share of
//!   publications with at least one active reference in the citing
//!   journal-year.
//!
//! An active reference points to a selected publication (article or review
//! in a core journal) inside the reference window, whose length equals the
//! citation window of the publication being scored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classification::{ClassificationSystem, FieldId};
use crate::corpus::{Corpus, JournalId, Publication, PubId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub census_year: i32,
    pub pub_year: i32,
}

impl WindowSpec {
    /// Citation window length in years, the publication year included.
    pub fn length(&self) -> usize {
        (self.census_year - self.pub_year + 1).max(0) as usize
    }
}

/// Whether a publication takes part in citation and reference counting.
pub fn is_selected(p: &Publication, core: Option<&BTreeSet<JournalId>>) -> bool {
    p.doc_type.is_research() && core.is_none_or(|js| js.contains(&p.journal))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JournalYearProfile {
    /// `a`: mean active references over all selected publications of the
    /// journal-year, including those with none.
    pub mean_active_refs: f64,
    /// `p`: share of those publications with at least one active reference.
    pub share_with_active: f64,
    pub pub_count: usize,
}

#[derive(Debug, Clone, Default)]
struct JournalYearTotals {
    count: u32,
    /// Indexed by window length - 1.
    active_sum: Vec<u64>,
    with_active: Vec<u32>,
}

/// Precomputed active-reference counts for every selected publication and
/// window length, and their per journal-year aggregates.
#[derive(Debug, Clone)]
pub struct ScoringContext<'a> {
    corpus: &'a Corpus,
    census_year: i32,
    selected: Vec<bool>,
    max_window: usize,
    /// Cumulative active references, `max_window` entries per position.
    active: Vec<u32>,
    journal_year: HashMap<(usize, i32), JournalYearTotals>,
}

impl<'a> ScoringContext<'a> {
    /// `core = None` treats every journal as a core journal.
    pub fn new(corpus: &'a Corpus, core: Option<&BTreeSet<JournalId>>, census_year: i32) -> Self {
        let pubs = corpus.publications();
        let selected: Vec<bool> = pubs.iter().map(|p| is_selected(p, core)).collect();
        let first_year = corpus.year_range().map_or(census_year, |(lo, _)| lo);
        let max_window = (census_year - first_year + 1).max(1) as usize;

        let active: Vec<u32> = (0..pubs.len())
            .into_par_iter()
            .flat_map_iter(|pos| {
                let mut counts = vec![0u32; max_window];
                if selected[pos] {
                    let y = pubs[pos].year;
                    for &t in corpus.cited(pos) {
                        if !selected[t] {
                            continue;
                        }
                        let gap = y - pubs[t].year;
                        if gap >= 0 && (gap as usize) < max_window {
                            counts[gap as usize] += 1;
                        }
                    }
                    for l in 1..max_window {
                        counts[l] += counts[l - 1];
                    }
                }
                counts
            })
            .collect();

        let mut journal_year: HashMap<(usize, i32), JournalYearTotals> = HashMap::new();
        for pos in 0..pubs.len() {
            if !selected[pos] {
                continue;
            }
            let e = journal_year
                .entry((corpus.journal_of(pos), pubs[pos].year))
                .or_insert_with(|| JournalYearTotals {
                    count: 0,
                    active_sum: vec![0; max_window],
                    with_active: vec![0; max_window],
                });
            e.count += 1;
            let row = &active[pos * max_window..(pos + 1) * max_window];
            for (l, &r) in row.iter().enumerate() {
                e.active_sum[l] += r as u64;
                e.with_active[l] += (r > 0) as u32;
            }
        }

        ScoringContext {
            corpus,
            census_year,
            selected,
            max_window,
            active,
            journal_year,
        }
    }

    pub fn census_year(&self) -> i32 {
        self.census_year
    }

    pub fn is_selected_position(&self, pos: usize) -> bool {
        self.selected[pos]
    }

    fn active_at(&self, pos: usize, window: usize) -> u32 {
        if window == 0 {
            return 0;
        }
        let l = window.min(self.max_window);
        self.active[pos * self.max_window + l - 1]
    }

    /// `r`: active references of a publication for a window length.
    pub fn active_refs(&self, id: PubId, window: usize) -> u32 {
        self.corpus
            .position(id)
            .map_or(0, |pos| self.active_at(pos, window))
    }

    fn profile_at(&self, journal: usize, year: i32, window: usize) -> Option<JournalYearProfile> {
        let t = self.journal_year.get(&(journal, year))?;
        if window == 0 || t.count == 0 {
            return None;
        }
        let l = window.min(self.max_window) - 1;
        let n = t.count as f64;
        Some(JournalYearProfile {
            mean_active_refs: t.active_sum[l] as f64 / n,
            share_with_active: t.with_active[l] as f64 / n,
            pub_count: t.count as usize,
        })
    }

    pub fn journal_year_profile(&self, journal: &str, year: i32, window: usize) -> Option<JournalYearProfile> {
        self.profile_at(self.corpus.journal_position(journal)?, year, window)
    }

    fn score_position(&self, pos: usize) -> SourceScores {
        let pubs = self.corpus.publications();
        let year = pubs[pos].year;
        let window = WindowSpec {
            census_year: self.census_year,
            pub_year: year,
        }
        .length();
        let mut s = SourceScores::default();
        for &k in self.corpus.citing(pos) {
            if !self.selected[k] {
                continue;
            }
            let ky = pubs[k].year;
            if ky > self.census_year {
                continue;
            }
            if ky < year {
                s.dropped += 1;
                continue;
            }
            s.cs += 1;
            let r = self.active_at(k, window);
            let prof = self.profile_at(self.corpus.journal_of(k), ky, window);
            if let Some(prof) = prof {
                if prof.mean_active_refs > 0.0 {
                    s.sncs1 += 1.0 / prof.mean_active_refs;
                } else {
                    s.zero_a += 1;
                }
                if r > 0 {
                    s.sncs2 += 1.0 / r as f64;
                    s.sncs3 += 1.0 / (prof.share_with_active * r as f64);
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct SourceScores {
    cs: u32,
    sncs1: f64,
    sncs2: f64,
    sncs3: f64,
    dropped: u32,
    zero_a: u32,
}

/// Selected citing publications from the publication's year up to the
/// census year.
pub fn citations(c: &Corpus, id: PubId, census_year: i32) -> u32 {
    let Some(pos) = c.position(id) else { return 0 };
    let pubs = c.publications();
    let year = pubs[pos].year;
    c.citing(pos)
        .iter()
        .filter(|&&k| is_selected(&pubs[k], None))
        .filter(|&&k| (year..=census_year).contains(&pubs[k].year))
        .count() as u32
}

/// References of `id` to selected publications in core journals published
/// within the `window_length` years ending in `id`'s own year.
pub fn active_refs(c: &Corpus, id: PubId, window_length: usize, core: &BTreeSet<JournalId>) -> u32 {
    let Some(pos) = c.position(id) else { return 0 };
    let pubs = c.publications();
    let year = pubs[pos].year;
    c.cited(pos)
        .iter()
        .filter(|&&t| is_selected(&pubs[t], Some(core)))
        .filter(|&&t| {
            let gap = year - pubs[t].year;
            gap >= 0 && (gap as usize) < window_length
        })
        .count() as u32
}

pub fn sncs1(c: &Corpus, id: PubId, census_year: i32, core: &BTreeSet<JournalId>) -> f64 {
    let ctx = ScoringContext::new(c, Some(core), census_year);
    c.position(id).map_or(0.0, |pos| ctx.score_position(pos).sncs1)
}

pub fn sncs2(c: &Corpus, id: PubId, census_year: i32, core: &BTreeSet<JournalId>) -> f64 {
    let ctx = ScoringContext::new(c, Some(core), census_year);
    c.position(id).map_or(0.0, |pos| ctx.score_position(pos).sncs2)
}

pub fn sncs3(c: &Corpus, id: PubId, census_year: i32, core: &BTreeSet<JournalId>) -> f64 {
    let ctx = ScoringContext::new(c, Some(core), census_year);
    c.position(id).map_or(0.0, |pos| ctx.score_position(pos).sncs3)
}

/// Mean citations per (field, year) cell, with full counting for
/// publications in several fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpectedCitations {
    cells: BTreeMap<(FieldId, i32), (f64, usize)>,
}

impl ExpectedCitations {
    pub fn from_counts<'s>(
        system: &ClassificationSystem,
        counts: impl IntoIterator<Item = (PubId, i32, u32)>,
    ) -> Self {
        let mut cells: BTreeMap<(FieldId, i32), (f64, usize)> = BTreeMap::new();
        for (id, year, cs) in counts {
            for &f in system.fields_of(id) {
                let e = cells.entry((f, year)).or_insert((0.0, 0));
                e.0 += cs as f64;
                e.1 += 1;
            }
        }
        ExpectedCitations { cells }
    }

    pub fn cell_mean(&self, field: FieldId, year: i32) -> Option<f64> {
        self.cells
            .get(&(field, year))
            .filter(|(_, n)| *n > 0)
            .map(|&(sum, n)| sum / n as f64)
    }

    /// Harmonic mean of the publication's cell means. `None` when the
    /// publication is unassigned or any of its cells has mean zero.
    pub fn harmonized(&self, fields: &[FieldId], year: i32) -> Option<f64> {
        if fields.is_empty() {
            return None;
        }
        let mut inv = 0.0;
        for &f in fields {
            let e = self.cell_mean(f, year)?;
            if e <= 0.0 {
                return None;
            }
            inv += 1.0 / e;
        }
        Some(fields.len() as f64 / inv)
    }
}

/// `c / e`; `None` when the publication is unassigned or `e = 0`.
pub fn ncs(c: &Corpus, system: &ClassificationSystem, id: PubId, census_year: i32) -> Option<f64> {
    let year = c.get(id)?.year;
    let counts = system.iter().filter_map(|(p, _)| {
        let pb = c.get(p)?;
        (pb.year == year && is_selected(pb, None)).then(|| (p, year, citations(c, p, census_year)))
    });
    let expected = ExpectedCitations::from_counts(system, counts);
    let e = expected.harmonized(system.fields_of(id), year)?;
    Some(citations(c, id, census_year) as f64 / e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreKind {
    Cs,
    Ncs,
    Sncs1,
    Sncs2,
    Sncs3,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 5] = [
        ScoreKind::Cs,
        ScoreKind::Ncs,
        ScoreKind::Sncs1,
        ScoreKind::Sncs2,
        ScoreKind::Sncs3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Cs => "cs",
            ScoreKind::Ncs => "ncs",
            ScoreKind::Sncs1 => "sncs1",
            ScoreKind::Sncs2 => "sncs2",
            ScoreKind::Sncs3 => "sncs3",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown score column {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub pub_id: PubId,
    pub year: i32,
    pub cs: u32,
    /// Undefined when the publication is unassigned in the normalizing
    /// system or its expected citation count is zero.
    pub ncs: Option<f64>,
    pub sncs1: f64,
    pub sncs2: f64,
    pub sncs3: f64,
}

impl ScoreRow {
    pub fn value(&self, kind: ScoreKind) -> Option<f64> {
        match kind {
            ScoreKind::Cs => Some(self.cs as f64),
            ScoreKind::Ncs => self.ncs,
            ScoreKind::Sncs1 => Some(self.sncs1),
            ScoreKind::Sncs2 => Some(self.sncs2),
            ScoreKind::Sncs3 => Some(self.sncs3),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    /// Name of the system NCS was normalized with, if any.
    pub ncs_system: Option<String>,
    /// Sorted by publication id.
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: PubId) -> Option<&ScoreRow> {
        self.rows
            .binary_search_by_key(&id, |r| r.pub_id)
            .ok()
            .map(|i| &self.rows[i])
    }

    /// `pub_id,year,cs,ncs,sncs1,sncs2,sncs3`; undefined NCS is an empty field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pub_id", "year", "cs", "ncs", "sncs1", "sncs2", "sncs3"])?;
        for r in &self.rows {
            w.write_record([
                r.pub_id.to_string(),
                r.year.to_string(),
                r.cs.to_string(),
                r.ncs.map(|v| v.to_string()).unwrap_or_default(),
                r.sncs1.to_string(),
                r.sncs2.to_string(),
                r.sncs3.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<score output>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<ScoreTable> {
        #[derive(Deserialize)]
        struct Raw {
            pub_id: PubId,
            year: i32,
            cs: u32,
            ncs: Option<f64>,
            sncs1: f64,
            sncs2: f64,
            sncs3: f64,
        }
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.deserialize() {
            let r: Raw = rec?;
            rows.push(ScoreRow {
                pub_id: r.pub_id,
                year: r.year,
                cs: r.cs,
                ncs: r.ncs,
                sncs1: r.sncs1,
                sncs2: r.sncs2,
                sncs3: r.sncs3,
            });
        }
        rows.sort_by_key(|r| r.pub_id);
        Ok(ScoreTable { ncs_system: None, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }

    pub fn load(path: &Path) -> Result<ScoreTable> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringParams {
    pub census_year: i32,
    /// Publication years that are scored.
    pub period: (i32, i32),
}

/// Scores every selected publication of the scoring period.
pub fn score_all(
    c: &Corpus,
    ncs_system: Option<&ClassificationSystem>,
    params: &ScoringParams,
    core: Option<&BTreeSet<JournalId>>,
) -> Result<ScoreTable> {
    let (lo, hi) = params.period;
    if lo > hi {
        return Err(Error::Config(format!("empty scoring period {lo}..{hi}")));
    }
    if hi > params.census_year {
        return Err(Error::Config(format!(
            "scoring period ends in {hi}, after census year {}",
            params.census_year
        )));
    }
    let ctx = ScoringContext::new(c, core, params.census_year);
    let pubs = c.publications();
    let scored: Vec<usize> = (0..c.len())
        .filter(|&pos| ctx.selected[pos] && (lo..=hi).contains(&pubs[pos].year))
        .collect();
    let source: Vec<SourceScores> = scored.par_iter().map(|&pos| ctx.score_position(pos)).collect();

    let dropped: u32 = source.iter().map(|s| s.dropped).sum();
    if dropped > 0 {
        log::warn!("ignored {dropped} citations from publications older than the cited publication");
    }
    let zero_a: u32 = source.iter().map(|s| s.zero_a).sum();
    if zero_a > 0 {
        log::warn!("{zero_a} citations came from journal-years without active references");
    }

    let expected = ncs_system.map(|sys| {
        ExpectedCitations::from_counts(
            sys,
            scored
                .iter()
                .zip(&source)
                .map(|(&pos, s)| (pubs[pos].id, pubs[pos].year, s.cs)),
        )
    });

    let rows = scored
        .iter()
        .zip(&source)
        .map(|(&pos, s)| {
            let p = &pubs[pos];
            let ncs = match (&expected, ncs_system) {
                (Some(exp), Some(sys)) => exp
                    .harmonized(sys.fields_of(p.id), p.year)
                    .map(|e| s.cs as f64 / e),
                _ => None,
            };
            ScoreRow {
                pub_id: p.id,
                year: p.year,
                cs: s.cs,
                ncs,
                sncs1: s.sncs1,
                sncs2: s.sncs2,
                sncs3: s.sncs3,
            }
        })
        .collect();

    Ok(ScoreTable {
        ncs_system: ncs_system.map(|s| s.name().to_string()),
        rows,
    })
}

//! In-memory publication corpus with forward and reverse citation indices.
//!
//! A [`Corpus`] is immutable once built. References are stored citing to
//! cited; references whose target is not part of the corpus are kept apart
//! as external references so that later stages can tell "has references"
//! from "has references that count".

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PubId = u64;
pub type JournalId = String;

/// Tolerance on the sum of a publication's country weights.
pub const COUNTRY_WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DocType {
    Article,
    Review,
    Other(String),
}

impl DocType {
    pub fn parse(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "article" => DocType::Article,
            "review" => DocType::Review,
            _ => DocType::Other(raw.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            DocType::Article => "article",
            DocType::Review => "review",
            DocType::Other(s) => s,
        }
    }

    /// Articles and reviews; the document types every indicator is built on.
    pub fn is_research(&self) -> bool {
        matches!(self, DocType::Article | DocType::Review)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Publication {
    pub id: PubId,
    pub year: i32,
    pub journal: JournalId,
    pub doc_type: DocType,
    pub language: String,
    pub author_count: u32,
    /// `(country code, weight)`, sorted by code. Empty when no address is known.
    pub countries: Vec<(String, f64)>,
    /// Resolved, deduplicated, sorted outgoing references.
    pub references: Vec<PubId>,
    /// Reference targets that are not part of the corpus.
    pub external_references: Vec<PubId>,
}

impl Publication {
    pub fn external_reference_count(&self) -> usize {
        self.external_references.len()
    }

    pub fn is_english(&self) -> bool {
        matches!(
            self.language.trim().to_ascii_lowercase().as_str(),
            "en" | "eng" | "english"
        )
    }
}

/// Splits one unit of weight equally over the distinct country codes.
///
/// A country listed several times (several addresses in the same country,
/// or the reprint address repeating a main address) counts once.
pub fn equal_country_weights<I, S>(codes: I) -> Vec<(String, f64)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let distinct: BTreeSet<String> = codes
        .into_iter()
        .map(|c| c.as_ref().trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    if distinct.is_empty() {
        return Vec::new();
    }
    let w = 1.0 / distinct.len() as f64;
    distinct.into_iter().map(|c| (c, w)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Journal {
    pub id: JournalId,
    pub name: String,
}

/// One line of the corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicationRecord {
    pub id: PubId,
    pub year: i32,
    pub journal: String,
    #[serde(rename = "type")]
    pub doc_type: String,
    pub lang: String,
    pub authors: u32,
    #[serde(default)]
    pub countries: Vec<String>,
    #[serde(default)]
    pub refs: Vec<PubId>,
}

impl From<PublicationRecord> for Publication {
    fn from(r: PublicationRecord) -> Self {
        Publication {
            id: r.id,
            year: r.year,
            journal: r.journal,
            doc_type: DocType::parse(&r.doc_type),
            language: r.lang,
            author_count: r.authors,
            countries: equal_country_weights(&r.countries),
            references: r.refs,
            external_references: Vec::new(),
        }
    }
}

impl From<&Publication> for PublicationRecord {
    fn from(p: &Publication) -> Self {
        let mut refs: Vec<PubId> = p
            .references
            .iter()
            .chain(p.external_references.iter())
            .copied()
            .collect();
        refs.sort_unstable();
        refs.dedup();
        PublicationRecord {
            id: p.id,
            year: p.year,
            journal: p.journal.clone(),
            doc_type: p.doc_type.as_str().to_string(),
            lang: p.language.clone(),
            authors: p.author_count,
            countries: p.countries.iter().map(|(c, _)| c.clone()).collect(),
            refs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    publications: Vec<Publication>,
    positions: HashMap<PubId, usize>,
    journals: Vec<Journal>,
    journal_positions: HashMap<JournalId, usize>,
    pub_journal: Vec<usize>,
    year_range: Option<(i32, i32)>,
    forward: Vec<Vec<usize>>,
    reverse: Vec<Vec<usize>>,
}

impl Corpus {
    /// Builds and indexes a corpus.
    ///
    /// References are resolved against the publication ids: unknown targets
    /// move to `external_references`, self-references are dropped and
    /// duplicates collapse. When `journals` is `None` the journal table is
    /// derived from the publications, with the key doubling as the name.
    pub fn new(mut publications: Vec<Publication>, journals: Option<Vec<Journal>>) -> Result<Self> {
        publications.sort_by_key(|p| p.id);
        for pair in publications.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Integrity(format!(
                    "duplicate publication id {}",
                    pair[0].id
                )));
            }
        }
        let positions: HashMap<PubId, usize> = publications
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id, i))
            .collect();

        let mut journals = match journals {
            Some(js) => js,
            None => publications
                .iter()
                .map(|p| p.journal.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(|id| Journal {
                    name: id.clone(),
                    id,
                })
                .collect(),
        };
        journals.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in journals.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Integrity(format!(
                    "duplicate journal id {}",
                    pair[0].id
                )));
            }
        }
        let journal_positions: HashMap<JournalId, usize> = journals
            .iter()
            .enumerate()
            .map(|(i, j)| (j.id.clone(), i))
            .collect();

        let mut pub_journal = Vec::with_capacity(publications.len());
        let mut self_refs = 0usize;
        for p in publications.iter_mut() {
            let Some(&jp) = journal_positions.get(&p.journal) else {
                return Err(Error::Integrity(format!(
                    "publication {} references unknown journal {}",
                    p.id, p.journal
                )));
            };
            pub_journal.push(jp);

            let mut resolved = Vec::with_capacity(p.references.len());
            let mut external: Vec<PubId> = std::mem::take(&mut p.external_references);
            for &r in &p.references {
                if r == p.id {
                    self_refs += 1;
                } else if positions.contains_key(&r) {
                    resolved.push(r);
                } else {
                    external.push(r);
                }
            }
            resolved.sort_unstable();
            resolved.dedup();
            external.sort_unstable();
            external.dedup();
            p.references = resolved;
            p.external_references = external;
        }
        if self_refs > 0 {
            log::warn!("dropped {self_refs} self-references");
        }

        let mut forward = Vec::with_capacity(publications.len());
        let mut reverse = vec![Vec::new(); publications.len()];
        for (i, p) in publications.iter().enumerate() {
            let targets: Vec<usize> = p.references.iter().map(|r| positions[r]).collect();
            for &t in &targets {
                reverse[t].push(i);
            }
            forward.push(targets);
        }

        let year_range = publications
            .iter()
            .map(|p| p.year)
            .fold(None, |acc: Option<(i32, i32)>, y| match acc {
                None => Some((y, y)),
                Some((lo, hi)) => Some((lo.min(y), hi.max(y))),
            });

        Ok(Corpus {
            publications,
            positions,
            journals,
            journal_positions,
            pub_journal,
            year_range,
            forward,
            reverse,
        })
    }

    /// Declares the corpus year range explicitly; publications outside it are
    /// reported by [`validate_corpus`].
    pub fn with_year_range(mut self, lo: i32, hi: i32) -> Self {
        self.year_range = Some((lo, hi));
        self
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }

    /// `None` for an empty corpus.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        self.year_range
    }

    /// Publications in ascending id order. Positions index into this slice.
    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn journals(&self) -> &[Journal] {
        &self.journals
    }

    pub fn get(&self, id: PubId) -> Option<&Publication> {
        self.positions.get(&id).map(|&i| &self.publications[i])
    }

    pub fn position(&self, id: PubId) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    pub fn journal_position(&self, id: &str) -> Option<usize> {
        self.journal_positions.get(id).copied()
    }

    /// Journal position of the publication at `pos`.
    pub fn journal_of(&self, pos: usize) -> usize {
        self.pub_journal[pos]
    }

    /// Positions of publications cited by the publication at `pos`.
    pub fn cited(&self, pos: usize) -> &[usize] {
        &self.forward[pos]
    }

    /// Positions of publications citing the publication at `pos`.
    pub fn citing(&self, pos: usize) -> &[usize] {
        &self.reverse[pos]
    }

    pub fn forward_index(&self, id: PubId) -> Vec<PubId> {
        self.position(id)
            .map(|p| self.forward[p].iter().map(|&t| self.publications[t].id).collect())
            .unwrap_or_default()
    }

    pub fn reverse_index(&self, id: PubId) -> Vec<PubId> {
        self.position(id)
            .map(|p| self.reverse[p].iter().map(|&t| self.publications[t].id).collect())
            .unwrap_or_default()
    }

    /// Number of resolved citation links.
    pub fn edge_count(&self) -> usize {
        self.forward.iter().map(Vec::len).sum()
    }

    /// Restricts the corpus to the given publications. References to dropped
    /// publications become external references.
    pub fn restrict(&self, keep: &BTreeSet<PubId>) -> Result<Corpus> {
        let pubs = self
            .publications
            .iter()
            .filter(|p| keep.contains(&p.id))
            .cloned()
            .collect();
        Corpus::new(pubs, Some(self.journals.clone()))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.publications {
            let line = serde_json::to_string(&PublicationRecord::from(p))
                .expect("publication records always serialize");
            writeln!(out, "{line}").map_err(|e| Error::io("<corpus output>", e))?;
        }
        Ok(())
    }

    pub fn write_journals_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for j in &self.journals {
            let line = serde_json::to_string(j).expect("journals always serialize");
            writeln!(out, "{line}").map_err(|e| Error::io("<journal output>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, corpus_path: &Path, journals_path: Option<&Path>) -> Result<()> {
        let f = File::create(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
        let mut w = BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(corpus_path, e))?;
        if let Some(jp) = journals_path {
            let f = File::create(jp).map_err(|e| Error::io(jp, e))?;
            let mut w = BufWriter::new(f);
            self.write_journals_jsonl(&mut w)?;
            w.flush().map_err(|e| Error::io(jp, e))?;
        }
        Ok(())
    }
}

fn read_jsonl<T, R>(reader: R) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Parses corpus JSON Lines from a reader.
pub fn read_corpus<R: BufRead>(corpus: R, journals: Option<Vec<Journal>>) -> Result<Corpus> {
    let records: Vec<PublicationRecord> = read_jsonl(corpus)?;
    Corpus::new(records.into_iter().map(Publication::from).collect(), journals)
}

pub fn read_journals<R: BufRead>(reader: R) -> Result<Vec<Journal>> {
    read_jsonl(reader)
}

/// Loads a corpus file and, optionally, a journal file.
pub fn load_corpus(path: &Path, journals_path: Option<&Path>) -> Result<Corpus> {
    let journals = match journals_path {
        Some(jp) => {
            let f = File::open(jp).map_err(|e| Error::io(jp, e))?;
            Some(read_journals(BufReader::new(f))?)
        }
        None => None,
    };
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(f), journals)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveCountryWeight { pub_id: PubId, country: String },
    CountryWeightSum { pub_id: PubId, sum: f64 },
    SelfReference { pub_id: PubId },
    DuplicateReference { pub_id: PubId, target: PubId },
    DanglingReference { pub_id: PubId, target: PubId },
    YearOutOfRange { pub_id: PubId, year: i32 },
    UnknownJournal { pub_id: PubId, journal: JournalId },
    ForwardIndexMismatch { pub_id: PubId },
    MissingReverseEdge { citing: PubId, cited: PubId },
    MissingForwardEdge { citing: PubId, cited: PubId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveCountryWeight { pub_id, country } => {
                write!(f, "publication {pub_id}: non-positive weight for country {country}")
            }
            Violation::CountryWeightSum { pub_id, sum } => {
                write!(f, "publication {pub_id}: country weights sum to {sum}")
            }
            Violation::SelfReference { pub_id } => write!(f, "publication {pub_id} cites itself"),
            Violation::DuplicateReference { pub_id, target } => {
                write!(f, "publication {pub_id} cites {target} more than once")
            }
            Violation::DanglingReference { pub_id, target } => {
                write!(f, "publication {pub_id} has unresolved reference {target}")
            }
            Violation::YearOutOfRange { pub_id, year } => {
                write!(f, "publication {pub_id}: year {year} outside corpus range")
            }
            Violation::UnknownJournal { pub_id, journal } => {
                write!(f, "publication {pub_id}: unknown journal {journal}")
            }
            Violation::ForwardIndexMismatch { pub_id } => {
                write!(f, "publication {pub_id}: forward index disagrees with reference list")
            }
            Violation::MissingReverseEdge { citing, cited } => {
                write!(f, "edge {citing} -> {cited} missing from reverse index")
            }
            Violation::MissingForwardEdge { citing, cited } => {
                write!(f, "reverse entry {citing} -> {cited} missing from forward index")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every publication and index invariant. Never fails; an empty
/// report means the corpus is valid.
pub fn validate_corpus(c: &Corpus) -> ValidationReport {
    let mut v = Vec::new();
    for (pos, p) in c.publications.iter().enumerate() {
        if !p.countries.is_empty() {
            for (country, w) in &p.countries {
                if !(*w > 0.0) {
                    v.push(Violation::NonPositiveCountryWeight {
                        pub_id: p.id,
                        country: country.clone(),
                    });
                }
            }
            let sum: f64 = p.countries.iter().map(|(_, w)| w).sum();
            if (sum - 1.0).abs() > COUNTRY_WEIGHT_TOLERANCE {
                v.push(Violation::CountryWeightSum { pub_id: p.id, sum });
            }
        }

        let mut seen = BTreeSet::new();
        for &r in &p.references {
            if r == p.id {
                v.push(Violation::SelfReference { pub_id: p.id });
            }
            if !seen.insert(r) {
                v.push(Violation::DuplicateReference {
                    pub_id: p.id,
                    target: r,
                });
            }
            if !c.positions.contains_key(&r) {
                v.push(Violation::DanglingReference {
                    pub_id: p.id,
                    target: r,
                });
            }
        }

        if let Some((lo, hi)) = c.year_range {
            if p.year < lo || p.year > hi {
                v.push(Violation::YearOutOfRange {
                    pub_id: p.id,
                    year: p.year,
                });
            }
        }

        let journal_ok = c
            .pub_journal
            .get(pos)
            .and_then(|&jp| c.journals.get(jp))
            .is_some_and(|j| j.id == p.journal);
        if !journal_ok {
            v.push(Violation::UnknownJournal {
                pub_id: p.id,
                journal: p.journal.clone(),
            });
        }

        let from_refs: BTreeSet<usize> = p
            .references
            .iter()
            .filter_map(|r| c.positions.get(r).copied())
            .collect();
        let indexed: BTreeSet<usize> = c.forward.get(pos).map(|f| f.iter().copied().collect()).unwrap_or_default();
        if from_refs != indexed {
            v.push(Violation::ForwardIndexMismatch { pub_id: p.id });
        }
    }

    // Transpose check in both directions.
    let n = c.publications.len();
    for (a, targets) in c.forward.iter().enumerate() {
        for &b in targets {
            if b >= n || !c.reverse[b].contains(&a) {
                v.push(Violation::MissingReverseEdge {
                    citing: c.publications[a].id,
                    cited: c.publications.get(b).map_or(u64::MAX, |p| p.id),
                });
            }
        }
    }
    for (b, sources) in c.reverse.iter().enumerate() {
        for &a in sources {
            if a >= n || !c.forward[a].contains(&b) {
                v.push(Violation::MissingForwardEdge {
                    citing: c.publications.get(a).map_or(u64::MAX, |p| p.id),
                    cited: c.publications[b].id,
                });
            }
        }
    }

    ValidationReport { violations: v }
}

/// Summary counts per journal, keyed by journal id.
pub fn publications_per_journal(c: &Corpus) -> BTreeMap<JournalId, usize> {
    let mut m = BTreeMap::new();
    for p in &c.publications {
        *m.entry(p.journal.clone()).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: u64, year: i32, refs: &[u64]) -> String {
        format!(
            r#"{{"id":{id},"year":{year},"journal":"J","type":"article","lang":"en","authors":1,"countries":["NL"],"refs":{refs:?}}}"#
        )
    }

    fn parse(text: &str) -> Result<Corpus> {
        read_corpus(text.as_bytes(), None)
    }

    #[test]
    fn reverse_index_is_transpose() {
        let text = [line(1, 2000, &[]), line(2, 2000, &[]), line(3, 2001, &[1, 2])].join("\n");
        let c = parse(&text).unwrap();
        assert_eq!(c.reverse_index(1), vec![3]);
        assert_eq!(c.reverse_index(2), vec![3]);
        assert_eq!(c.forward_index(3), vec![1, 2]);
        assert_eq!(c.edge_count(), 2);
        assert!(validate_corpus(&c).is_valid());
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let c = parse("").unwrap();
        assert!(c.is_empty());
        assert_eq!(c.year_range(), None);
    }

    #[test]
    fn unresolved_references_are_counted() {
        let text = [line(1, 2000, &[]), line(5, 2001, &[1, 99, 99, 5])].join("\n");
        // Linear scan oracle: ids in the refs array not among the file's ids.
        let ids: BTreeSet<u64> = [1, 5].into();
        let unresolved: BTreeSet<u64> = [1u64, 99, 99, 5]
            .into_iter()
            .filter(|r| !ids.contains(r))
            .collect();
        let c = parse(&text).unwrap();
        let p = c.get(5).unwrap();
        assert_eq!(p.references, vec![1]);
        assert_eq!(p.external_reference_count(), unresolved.len());
        assert_eq!(p.external_reference_count(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n{{not json}}\n", line(1, 2000, &[]));
        match parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_is_integrity_error() {
        let text = [line(1, 2000, &[]), line(1, 2001, &[])].join("\n");
        assert!(matches!(parse(&text), Err(Error::Integrity(_))));
    }

    #[test]
    fn repeated_countries_deduplicate() {
        let w = equal_country_weights(["NL", "NL", "BE"]);
        assert_eq!(w, vec![("BE".to_string(), 0.5), ("NL".to_string(), 0.5)]);
    }

    #[test]
    fn country_weight_sum_violation() {
        let text = line(1, 2000, &[]);
        let mut c = parse(&text).unwrap();
        c.publications[0].countries = vec![("BE".into(), 0.6), ("NL".into(), 0.6)];
        let report = validate_corpus(&c);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::CountryWeightSum { pub_id: 1, .. })));
    }

    #[test]
    fn corrupted_reverse_index_is_reported() {
        let text = [line(1, 2000, &[]), line(2, 2001, &[1])].join("\n");
        let mut c = parse(&text).unwrap();
        c.reverse[0].clear();
        let report = validate_corpus(&c);
        assert_eq!(
            report.violations,
            vec![Violation::MissingReverseEdge { citing: 2, cited: 1 }]
        );
    }

    #[test]
    fn declared_year_range_is_checked() {
        let text = [line(1, 2000, &[]), line(2, 2005, &[])].join("\n");
        let c = parse(&text).unwrap().with_year_range(2001, 2010);
        let report = validate_corpus(&c);
        assert_eq!(
            report.violations,
            vec![Violation::YearOutOfRange { pub_id: 1, year: 2000 }]
        );
    }

    #[test]
    fn journal_file_must_cover_publications() {
        let text = line(1, 2000, &[]);
        let journals = vec![Journal {
            id: "K".into(),
            name: "Other".into(),
        }];
        assert!(matches!(
            read_corpus(text.as_bytes(), Some(journals)),
            Err(Error::Integrity(_))
        ));
    }
}

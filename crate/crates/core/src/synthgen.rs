//! Seeded synthetic corpora with controllable field citation cultures.
//!
//! Every field publishes a growing number of publications per year in its
//! own journals. Each publication draws a Poisson number of references;
//! a reference either leaves the corpus (non-core source, or published
//! before the first generated year) or points to an earlier or same-year
//! publication picked by preferential attachment, inside the citing field
//! with probability `within_field`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::classification::ClassificationSystem;
use crate::corpus::{equal_country_weights, Corpus, DocType, Journal, PubId, Publication};
use crate::error::{Error, Result};

/// External reference ids start here, well above generated publication ids.
pub const EXTERNAL_ID_BASE: PubId = 1 << 40;

const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    /// Publications in the first year.
    pub size: usize,
    pub mean_refs: f64,
    #[serde(default = "default_journals")]
    pub journals: usize,
}

fn default_journals() -> usize {
    4
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, size: usize, mean_refs: f64) -> Self {
        FieldSpec {
            name: name.into(),
            size,
            mean_refs,
            journals: default_journals(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub first_year: i32,
    pub last_year: i32,
    /// Yearly multiplier of every field's size.
    pub growth_rate: f64,
    /// Probability that an in-corpus reference stays in the citing field.
    pub within_field: f64,
    /// Share of references to sources outside the corpus.
    pub non_core_ref_share: f64,
    /// Share of publications whose references all leave the corpus.
    pub zero_active_ref_share: f64,
    /// Relative weight of each reference age in years, index 0 = same year.
    pub age_weights: Vec<f64>,
    pub review_share: f64,
    pub countries: Vec<String>,
    /// Probability that an author address is the journal's home country.
    pub home_bias: f64,
    pub fields: Vec<FieldSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            first_year: 2003,
            last_year: 2011,
            growth_rate: 1.05,
            within_field: 0.9,
            non_core_ref_share: 0.2,
            zero_active_ref_share: 0.0,
            age_weights: vec![0.4, 1.0, 0.9, 0.75, 0.6, 0.5, 0.4, 0.3, 0.25, 0.2],
            review_share: 0.05,
            countries: ["US", "GB", "DE", "FR", "JP", "CN", "IT", "CA", "ES", "NL", "AU", "KR"]
                .map(String::from)
                .to_vec(),
            home_bias: 0.3,
            fields: vec![
                FieldSpec::new("physics", 600, 30.0),
                FieldSpec::new("mathematics", 300, 15.0),
                FieldSpec::new("medicine", 900, 35.0),
                FieldSpec::new("chemistry", 500, 28.0),
                FieldSpec::new("sociology", 200, 45.0),
            ],
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn years(&self) -> usize {
        (self.last_year - self.first_year + 1).max(0) as usize
    }

    /// Publications of field `f` in year index `t`.
    pub fn field_size(&self, f: usize, t: usize) -> usize {
        (self.fields[f].size as f64 * self.growth_rate.powi(t as i32)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.first_year > self.last_year {
            return bad(format!("first_year {} after last_year {}", self.first_year, self.last_year));
        }
        if !(self.growth_rate > 0.0) {
            return bad(format!("growth_rate must be positive, got {}", self.growth_rate));
        }
        for (name, v) in [
            ("within_field", self.within_field),
            ("non_core_ref_share", self.non_core_ref_share),
            ("zero_active_ref_share", self.zero_active_ref_share),
            ("review_share", self.review_share),
            ("home_bias", self.home_bias),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.age_weights.is_empty()
            || self.age_weights.iter().any(|w| !(*w >= 0.0))
            || self.age_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("age_weights must be non-negative with a positive sum".into());
        }
        if self.countries.is_empty() {
            return bad("at least one country is required".into());
        }
        if self.fields.is_empty() {
            return bad("at least one field is required".into());
        }
        let total: usize = (0..self.fields.len())
            .flat_map(|f| (0..self.years()).map(move |t| (f, t)))
            .map(|(f, t)| self.field_size(f, t))
            .sum();
        for f in &self.fields {
            if f.journals == 0 {
                return bad(format!("field {} has no journals", f.name));
            }
            if !(f.mean_refs >= 0.0) || !f.mean_refs.is_finite() {
                return bad(format!("field {} has invalid mean_refs {}", f.name, f.mean_refs));
            }
            if f.size > 0 && f.mean_refs > total.saturating_sub(1) as f64 {
                return bad(format!(
                    "field {} asks for {} references per publication but the corpus has {total} publications",
                    f.name, f.mean_refs
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: Corpus,
    /// Generating field of every publication.
    pub truth: ClassificationSystem,
}

impl SynthOutput {
    /// Writes `corpus.jsonl`, `journals.jsonl` and `truth.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<SynthPaths> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SynthPaths {
            corpus: dir.join("corpus.jsonl"),
            journals: dir.join("journals.jsonl"),
            truth: dir.join("truth.csv"),
        };
        self.corpus.save(&paths.corpus, Some(&paths.journals))?;
        let f = File::create(&paths.truth).map_err(|e| Error::io(&paths.truth, e))?;
        let mut w = BufWriter::new(f);
        self.truth.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(&paths.truth, e))?;
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub corpus: PathBuf,
    pub journals: PathBuf,
    pub truth: PathBuf,
}

/// Preferential-attachment urn over the publications of one field-year:
/// every publication starts with one ball and gains one per citation.
struct Urn {
    first_id: PubId,
    balls: Vec<u32>,
}

impl Urn {
    fn new(first_id: PubId, size: usize) -> Self {
        Urn {
            first_id,
            balls: (0..size as u32).collect(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Option<PubId> {
        if self.balls.is_empty() {
            return None;
        }
        let i = rng.random_range(0..self.balls.len());
        Some(self.first_id + self.balls[i] as PubId)
    }

    fn reward(&mut self, id: PubId) {
        self.balls.push((id - self.first_id) as u32);
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nfields = cfg.fields.len();
    let years = cfg.years();

    let journals: Vec<Vec<Journal>> = cfg
        .fields
        .iter()
        .map(|f| {
            (0..f.journals)
                .map(|k| Journal {
                    id: format!("{}-{}", f.name, k + 1),
                    name: format!("Journal of {} {}", f.name, k + 1),
                })
                .collect()
        })
        .collect();
    // Home countries rotate through the pool across all journals.
    let homes: Vec<Vec<usize>> = {
        let mut next = 0;
        journals
            .iter()
            .map(|js| {
                js.iter()
                    .map(|_| {
                        next += 1;
                        (next - 1) % cfg.countries.len()
                    })
                    .collect()
            })
            .collect()
    };

    // Ids are dense and grouped by (year, field).
    let mut urns: Vec<Vec<Urn>> = Vec::with_capacity(years);
    let mut next_id: PubId = 1;
    for t in 0..years {
        let mut row = Vec::with_capacity(nfields);
        for f in 0..nfields {
            let n = cfg.field_size(f, t);
            row.push(Urn::new(next_id, n));
            next_id += n as PubId;
        }
        urns.push(row);
    }

    let ages = WeightedIndex::new(&cfg.age_weights).map_err(|e| Error::Config(e.to_string()))?;
    let poissons: Vec<Option<Poisson<f64>>> = cfg
        .fields
        .iter()
        .map(|f| (f.mean_refs > 0.0).then(|| Poisson::new(f.mean_refs).expect("positive mean")))
        .collect();
    let country_pick = Uniform::new(0, cfg.countries.len()).expect("non-empty country pool");

    let mut pubs = Vec::with_capacity((next_id - 1) as usize);
    let mut truth = Vec::with_capacity(pubs.capacity());
    let mut external: PubId = EXTERNAL_ID_BASE;
    for t in 0..years {
        let year = cfg.first_year + t as i32;
        for f in 0..nfields {
            let spec = &cfg.fields[f];
            let first = urns[t][f].first_id;
            for k in 0..cfg.field_size(f, t) {
                let id = first + k as PubId;
                let j = rng.random_range(0..spec.journals);
                let len = poissons[f].as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
                let isolated = rng.random_bool(cfg.zero_active_ref_share);
                let mut refs: Vec<PubId> = Vec::with_capacity(len);
                for _ in 0..len {
                    let target = if isolated || rng.random_bool(cfg.non_core_ref_share) {
                        None
                    } else {
                        draw_target(cfg, &urns, &ages, &mut rng, t, f, id, &refs)
                    };
                    match target {
                        Some((tt, tf, target)) => {
                            urns[tt][tf].reward(target);
                            refs.push(target);
                        }
                        None => {
                            refs.push(external);
                            external += 1;
                        }
                    }
                }
                refs.sort_unstable();

                let n_countries = 1 + rng.random_bool(0.3) as usize;
                let codes: Vec<&str> = (0..n_countries)
                    .map(|_| {
                        let c = if rng.random_bool(cfg.home_bias) {
                            homes[f][j]
                        } else {
                            country_pick.sample(&mut rng)
                        };
                        cfg.countries[c].as_str()
                    })
                    .collect();
                let doc_type = if rng.random_bool(cfg.review_share) {
                    DocType::Review
                } else {
                    DocType::Article
                };
                pubs.push(Publication {
                    id,
                    year,
                    journal: journals[f][j].id.clone(),
                    doc_type,
                    language: "en".into(),
                    author_count: rng.random_range(1..=6),
                    countries: equal_country_weights(codes),
                    references: refs,
                    external_references: Vec::new(),
                });
                truth.push((id, spec.name.clone()));
            }
        }
    }

    let corpus = Corpus::new(pubs, Some(journals.into_iter().flatten().collect()))?
        .with_year_range(cfg.first_year, cfg.last_year);
    let truth = ClassificationSystem::single("truth", truth);
    Ok(SynthOutput { corpus, truth })
}

/// Picks an in-corpus target for a reference of publication `id` (year
/// index `t`, field `f`), or `None` for a reference leaving the corpus.
#[allow(clippy::too_many_arguments)]
fn draw_target(
    cfg: &SynthConfig,
    urns: &[Vec<Urn>],
    ages: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
    t: usize,
    f: usize,
    id: PubId,
    taken: &[PubId],
) -> Option<(usize, usize, PubId)> {
    let age = ages.sample(rng);
    if age > t {
        return None;
    }
    let tt = t - age;
    let nfields = cfg.fields.len();
    let tf = if nfields == 1 || rng.random_bool(cfg.within_field) {
        f
    } else {
        let other = rng.random_range(0..nfields - 1);
        if other >= f {
            other + 1
        } else {
            other
        }
    };
    for _ in 0..MAX_REDRAWS {
        let target = urns[tt][tf].draw(rng)?;
        if target != id && !taken.contains(&target) {
            return Some((tt, tf, target));
        }
    }
    None
}

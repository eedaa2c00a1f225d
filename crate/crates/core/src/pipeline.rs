//! End-to-end runs: ingest, core selection, classification, scoring and
//! evaluation, with CSV outputs and a JSON run manifest.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classification::{
    build_classification, load_external_classification, read_classification, BuildReport, ClassificationSystem,
    ClusteringParams, Preset,
};
use crate::core_selection::{
    select_core, CoreSelectionParams, CoreSelectionResult, DEFAULT_ACTIVE_RATIO, DEFAULT_KL_THRESHOLD,
    DEFAULT_RECENT_GAP,
};
use crate::corpus::{load_corpus, validate_corpus, Corpus, JournalId, PubId};
use crate::error::{Error, Result};
use crate::evaluation::{
    assign_quantiles, decompose, inequality_curve, score_column, yearly_means, DecompositionResult,
    QuantileAggregate, YearlyMeans, DEFAULT_QUANTILES,
};
use crate::normalization::{is_selected, score_all, ScoreKind, ScoreTable, ScoringParams};

pub const ALGORITHMIC_SYSTEM: &str = "algorithmic";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub core: CoreConfig,
    pub classification: ClassifyConfig,
    pub scoring: ScoringConfig,
    pub evaluation: EvaluationConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub corpus: PathBuf,
    pub journals: Option<PathBuf>,
    /// External `pub_id,field_id` classifications, named by file stem.
    pub systems: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreConfig {
    /// With `false` every journal counts as core.
    pub enabled: bool,
    pub eligible_years: Option<(i32, i32)>,
    pub analysis_years: Option<(i32, i32)>,
    pub threshold: f64,
    pub recent_gap: i32,
    pub ratio: f64,
    /// A core list or `core.csv` from an earlier run; skips the stage.
    pub precomputed: Option<PathBuf>,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            enabled: true,
            eligible_years: None,
            analysis_years: None,
            threshold: DEFAULT_KL_THRESHOLD,
            recent_gap: DEFAULT_RECENT_GAP,
            ratio: DEFAULT_ACTIVE_RATIO,
            precomputed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub enabled: bool,
    pub preset: Option<String>,
    pub resolution: Option<f64>,
    pub min_cluster_size: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
    /// Publication years to classify; defaults to the scoring period.
    pub years: Option<(i32, i32)>,
    /// A `classification.csv` from an earlier run; skips the stage.
    pub precomputed: Option<PathBuf>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        let p = ClusteringParams::from_preset(Preset::B);
        ClassifyConfig {
            enabled: true,
            preset: None,
            resolution: None,
            min_cluster_size: None,
            seed: p.seed,
            restarts: p.restarts,
            years: None,
            precomputed: None,
        }
    }
}

impl ClassifyConfig {
    pub fn clustering_params(&self) -> Result<ClusteringParams> {
        let base = match &self.preset {
            Some(p) => ClusteringParams::from_preset(p.parse()?),
            None => ClusteringParams::from_preset(Preset::B),
        };
        let params = ClusteringParams {
            resolution: self.resolution.unwrap_or(base.resolution),
            min_cluster_size: self.min_cluster_size.unwrap_or(base.min_cluster_size),
            seed: self.seed,
            restarts: self.restarts,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    /// Defaults to the last corpus year.
    pub census_year: Option<i32>,
    /// Defaults to the four years ending in the census year.
    pub period: Option<(i32, i32)>,
    /// System used for NCS; defaults to the algorithmic one when built,
    /// otherwise the first external system.
    pub ncs_system: Option<String>,
    /// A `scores.csv` from an earlier run; skips the stage.
    pub precomputed: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub quantiles: u32,
    /// Systems to evaluate against; empty means all.
    pub systems: Vec<String>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            quantiles: DEFAULT_QUANTILES,
            systems: Vec::new(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML; relative input paths are resolved against `base`.
    pub fn from_toml(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() && !p.as_os_str().is_empty() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut cfg.input.corpus);
            cfg.input.journals.iter_mut().for_each(fix);
            cfg.input.systems.iter_mut().for_each(fix);
            cfg.core.precomputed.iter_mut().for_each(fix);
            cfg.classification.precomputed.iter_mut().for_each(fix);
            cfg.scoring.precomputed.iter_mut().for_each(fix);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every file the run reads.
    pub fn input_paths(&self) -> Vec<PathBuf> {
        let mut v = vec![self.input.corpus.clone()];
        v.extend(self.input.journals.clone());
        v.extend(self.input.systems.iter().cloned());
        v.extend(self.core.precomputed.clone());
        v.extend(self.classification.precomputed.clone());
        v.extend(self.scoring.precomputed.clone());
        v
    }
}

/// Resolved census year and scoring period for a corpus.
pub fn scoring_params(cfg: &ScoringConfig, c: &Corpus) -> Result<ScoringParams> {
    let census_year = match cfg.census_year.or_else(|| c.year_range().map(|r| r.1)) {
        Some(y) => y,
        None => return Err(Error::Config("cannot infer census year from an empty corpus".into())),
    };
    let period = cfg.period.unwrap_or((census_year - 3, census_year));
    Ok(ScoringParams { census_year, period })
}

/// Core selection parameters; the analysis period defaults to the scoring
/// period and eligibility starts `recent_gap` years earlier.
pub fn core_params(cfg: &CoreConfig, scoring: &ScoringParams) -> CoreSelectionParams {
    let analysis = cfg.analysis_years.unwrap_or(scoring.period);
    let eligible = cfg
        .eligible_years
        .unwrap_or((analysis.0 - cfg.recent_gap, analysis.1));
    let mut p = CoreSelectionParams::new(eligible, analysis);
    p.threshold = cfg.threshold;
    p.fixpoint.recent_gap = cfg.recent_gap;
    p.fixpoint.ratio = cfg.ratio;
    p
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

/// `journal_id,d_i,kept_after_step2,final_ratio,kept_after_step3,removal_round`
/// with `removal_round = -1` for journals never removed in step 3.
pub fn write_core_csv(result: &CoreSelectionResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "journal_id",
        "d_i",
        "kept_after_step2",
        "final_ratio",
        "kept_after_step3",
        "removal_round",
    ])?;
    for a in &result.audit {
        w.write_record([
            a.journal_id.clone(),
            opt_f64(a.kl),
            a.kept_after_step2.to_string(),
            opt_f64(a.final_ratio()),
            a.kept_after_step3.to_string(),
            a.removal_round.map_or(-1, |r| r as i64).to_string(),
        ])?;
    }
    finish(w, path)
}

/// Reads either a `core.csv` (rows with `kept_after_step3 = true`) or a
/// plain list with one journal id per line.
pub fn read_core_list(path: &Path) -> Result<BTreeSet<JournalId>> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("");
    if !first.split(',').any(|h| h.trim() == "journal_id") {
        return Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect());
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "journal_id").expect("checked above");
    let kept_col = headers.iter().position(|h| h == "kept_after_step3");
    let mut out = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let kept = match kept_col.map(|k| rec.get(k).unwrap_or("").trim()) {
            None => true,
            Some("true") => true,
            Some("false") => false,
            Some(other) => {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("kept_after_step3 must be true or false, got {other:?}"),
                })
            }
        };
        if kept {
            out.insert(rec.get(id_col).unwrap_or("").trim().to_string());
        }
    }
    Ok(out)
}

pub fn write_core_list(core: &BTreeSet<JournalId>, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    for j in core {
        writeln!(w, "{j}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Publications entering classification: articles and reviews in core
/// journals published within `years`.
pub fn classification_scope(c: &Corpus, core: Option<&BTreeSet<JournalId>>, years: (i32, i32)) -> BTreeSet<PubId> {
    c.publications()
        .iter()
        .filter(|p| is_selected(p, core) && (years.0..=years.1).contains(&p.year))
        .map(|p| p.id)
        .collect()
}

/// Curves and decompositions of every score column against several systems.
#[derive(Debug, Clone, Default)]
pub struct Evaluation {
    pub curves: Vec<(String, ScoreKind, QuantileAggregate)>,
    pub decompositions: Vec<(String, ScoreKind, Option<DecompositionResult>)>,
}

pub fn evaluate(
    table: &ScoreTable,
    systems: &[&ClassificationSystem],
    years: Option<(i32, i32)>,
    quantiles: u32,
) -> Result<Evaluation> {
    let mut out = Evaluation::default();
    for sys in systems {
        for kind in ScoreKind::ALL {
            let scores = score_column(table, kind);
            let cells = assign_quantiles(&scores, sys, years, quantiles)?;
            out.curves
                .push((sys.name().to_string(), kind, inequality_curve(&cells)));
            let d = match decompose(&cells) {
                Ok(d) => Some(d),
                Err(Error::Undefined(msg)) => {
                    log::warn!("{} / {kind}: {msg}", sys.name());
                    None
                }
                Err(e) => return Err(e),
            };
            out.decompositions.push((sys.name().to_string(), kind, d));
        }
    }
    Ok(out)
}

/// Long format `system,score,q,n,mu,I_q,y_axis`; undefined `I(q)` is an
/// empty field. `y_axis` tells plotting tools to use a log scale.
pub fn write_curve_csv(eval: &Evaluation, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["system", "score", "q", "n", "mu", "I_q", "y_axis"])?;
    for (sys, kind, curve) in &eval.curves {
        for p in &curve.points {
            w.write_record([
                sys.clone(),
                kind.to_string(),
                p.q.to_string(),
                p.n.to_string(),
                p.mu.to_string(),
                opt_f64(p.inequality),
                "log".to_string(),
            ])?;
        }
    }
    finish(w, path)
}

/// `system,score,W,S,IDCP,I,n,mu`; all fields after `score` are empty when
/// the decomposition is undefined.
pub fn write_decomposition_csv(eval: &Evaluation, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["system", "score", "W", "S", "IDCP", "I", "n", "mu"])?;
    for (sys, kind, d) in &eval.decompositions {
        let mut rec = vec![sys.clone(), kind.to_string()];
        match d {
            Some(d) => rec.extend([
                d.within.to_string(),
                d.between_intervals.to_string(),
                d.idcp.to_string(),
                d.total.to_string(),
                d.n.to_string(),
                d.mu.to_string(),
            ]),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// `year,n,cs,ncs,sncs1,sncs2,sncs3`.
pub fn write_yearly_csv(rows: &[YearlyMeans], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["year".to_string(), "n".to_string()];
    header.extend(ScoreKind::ALL.iter().map(|k| k.to_string()));
    w.write_record(&header)?;
    for y in rows {
        let mut rec = vec![y.year.to_string(), y.n.to_string()];
        rec.extend(ScoreKind::ALL.iter().map(|k| opt_f64(y.means.get(k).copied().flatten())));
        w.write_record(&rec)?;
    }
    finish(w, path)
}

/// `x` rounded to `digits` significant digits.
pub fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = digits as i64 - 1 - magnitude;
    if (0..=15).contains(&decimals) {
        format!("{:.*}", decimals as usize, x)
    } else {
        format!("{:.*e}", digits.saturating_sub(1), x)
    }
}

/// Human-readable decomposition table.
pub fn write_report(eval: &Evaluation, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{:<16} {:<6} {:>10} {:>10} {:>10} {:>10}", "system", "score", "W", "S", "IDCP", "I").map_err(io)?;
    for (sys, kind, d) in &eval.decompositions {
        match d {
            Some(d) => writeln!(
                w,
                "{:<16} {:<6} {:>10} {:>10} {:>10} {:>10}",
                sys,
                kind.to_string(),
                significant(d.within, 6),
                significant(d.between_intervals, 6),
                significant(d.idcp, 6),
                significant(d.total, 6)
            ),
            None => writeln!(w, "{sys:<16} {:<6} undefined", kind.to_string()),
        }
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        bytes += n as u64;
    }
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(hasher.finalize()),
        bytes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub outputs: Vec<FileDigest>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<StageRecord>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub success: bool,
    pub error: Option<String>,
}

/// Collects manifest fields over a run. Input digests are taken at start.
#[derive(Debug)]
pub struct ManifestRecorder {
    manifest: RunManifest,
    clock: Instant,
}

impl ManifestRecorder {
    pub fn start(subcommand: &str, parameters: serde_json::Value, seeds: Vec<u64>, inputs: &[PathBuf]) -> Result<Self> {
        let inputs = inputs.iter().map(|p| digest_file(p)).collect::<Result<Vec<_>>>()?;
        Ok(ManifestRecorder {
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                parameters,
                seeds,
                inputs,
                stages: Vec::new(),
                started_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
                wall_clock_seconds: 0.0,
                success: false,
                error: None,
            },
            clock: Instant::now(),
        })
    }

    pub fn stage(&mut self, name: &str, status: StageStatus, outputs: &[PathBuf], seconds: f64) -> Result<()> {
        let outputs = outputs.iter().map(|p| digest_file(p)).collect::<Result<Vec<_>>>()?;
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status,
            outputs,
            seconds,
        });
        Ok(())
    }

    /// Writes `manifest.json` into `dir` and returns the manifest.
    pub fn finish(mut self, dir: &Path, error: Option<&str>) -> Result<RunManifest> {
        self.manifest.wall_clock_seconds = self.clock.elapsed().as_secs_f64();
        self.manifest.success = error.is_none();
        self.manifest.error = error.map(str::to_string);
        let path = dir.join("manifest.json");
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &self.manifest).map_err(|e| Error::io(&path, e.into()))?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

/// A failed run. Failures outside any stage are usage errors.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: Option<String>,
    pub error: Error,
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        if self.stage.is_none() {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.stage {
            Some(s) => write!(f, "stage {s} failed: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for PipelineError {}

/// Output file names inside the run directory.
pub mod files {
    pub const CORE: &str = "core.csv";
    pub const CLASSIFICATION: &str = "classification.csv";
    pub const SCORES: &str = "scores.csv";
    pub const CURVE: &str = "curve.csv";
    pub const DECOMPOSITION: &str = "decomposition.csv";
    pub const YEARLY: &str = "yearly.csv";
    pub const REPORT: &str = "report.txt";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: RunManifest,
    pub classification_report: Option<BuildReport>,
    pub evaluation: Evaluation,
}

struct Runner<'a> {
    out: &'a Path,
    recorder: ManifestRecorder,
}

impl Runner<'_> {
    fn stage<T>(
        &mut self,
        name: &str,
        outputs: &[&str],
        f: impl FnOnce() -> Result<T>,
    ) -> std::result::Result<T, PipelineError> {
        let clock = Instant::now();
        log::info!("stage {name}");
        let fail = |error| PipelineError {
            stage: Some(name.to_string()),
            error,
        };
        let value = f().map_err(fail)?;
        let paths: Vec<PathBuf> = outputs.iter().map(|o| self.out.join(o)).collect();
        self.recorder
            .stage(name, StageStatus::Ran, &paths, clock.elapsed().as_secs_f64())
            .map_err(fail)?;
        Ok(value)
    }

    fn skipped(&mut self, name: &str) {
        log::info!("stage {name} skipped");
        self.recorder
            .stage(name, StageStatus::Skipped, &[], 0.0)
            .expect("no outputs to digest");
    }
}

/// Runs every stage, writing outputs and `manifest.json` into `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> std::result::Result<PipelineOutcome, PipelineError> {
    let usage = |error| PipelineError { stage: None, error };
    let missing: Vec<_> = cfg.input_paths().into_iter().filter(|p| !p.is_file()).collect();
    if !missing.is_empty() {
        return Err(usage(Error::Config(format!("missing input files: {missing:?}"))));
    }
    fs::create_dir_all(out).map_err(|e| usage(Error::io(out, e)))?;
    let params = serde_json::to_value(cfg).expect("config serializes");
    let recorder = ManifestRecorder::start("pipeline", params, vec![cfg.classification.seed], &cfg.input_paths())
        .map_err(usage)?;
    let mut runner = Runner { out, recorder };
    let result = run_stages(cfg, &mut runner);
    let error = result.as_ref().err().map(|e| e.to_string());
    let manifest = runner.recorder.finish(out, error.as_deref()).map_err(usage)?;
    result.map(|(classification_report, evaluation)| PipelineOutcome {
        manifest,
        classification_report,
        evaluation,
    })
}

fn run_stages(
    cfg: &PipelineConfig,
    r: &mut Runner,
) -> std::result::Result<(Option<BuildReport>, Evaluation), PipelineError> {
    let out = r.out.to_path_buf();
    let corpus = r.stage("ingest", &[], || {
        let c = load_corpus(&cfg.input.corpus, cfg.input.journals.as_deref())?;
        let report = validate_corpus(&c);
        if !report.is_valid() {
            return Err(Error::Integrity(format!(
                "{} violations, first: {}",
                report.violations.len(),
                report.violations[0]
            )));
        }
        log::info!("{} publications, {} citation links", c.len(), c.edge_count());
        Ok(c)
    })?;

    let scoring = scoring_params(&cfg.scoring, &corpus).map_err(|error| PipelineError {
        stage: Some("ingest".into()),
        error,
    })?;

    let core: Option<BTreeSet<JournalId>> = if let Some(p) = &cfg.core.precomputed {
        r.skipped("select-core");
        Some(read_core_list(p).map_err(|error| PipelineError {
            stage: Some("select-core".into()),
            error,
        })?)
    } else if cfg.core.enabled {
        Some(r.stage("select-core", &[files::CORE], || {
            let res = select_core(&corpus, &core_params(&cfg.core, &scoring))?;
            write_core_csv(&res, &out.join(files::CORE))?;
            log::info!("{} core journals after {} rounds", res.core_journal_ids.len(), res.iterations);
            Ok(res.core_journal_ids)
        })?)
    } else {
        r.skipped("select-core");
        None
    };

    let mut systems: Vec<ClassificationSystem> = Vec::new();
    let mut build_report = None;
    if let Some(p) = &cfg.classification.precomputed {
        r.skipped("classify");
        let f = File::open(p).map_err(|e| PipelineError {
            stage: Some("classify".into()),
            error: Error::io(p, e),
        })?;
        let sys = read_classification(ALGORITHMIC_SYSTEM, f, Some(&corpus)).map_err(|error| PipelineError {
            stage: Some("classify".into()),
            error,
        })?;
        systems.push(sys);
    } else if cfg.classification.enabled {
        let build = r.stage("classify", &[files::CLASSIFICATION], || {
            let params = cfg.classification.clustering_params()?;
            let years = cfg.classification.years.unwrap_or(scoring.period);
            let scope = classification_scope(&corpus, core.as_ref(), years);
            let build = build_classification(&corpus, &scope, &params, ALGORITHMIC_SYSTEM)?;
            build.system.save(&out.join(files::CLASSIFICATION))?;
            log::info!("{} fields, quality {}", build.system.field_count(), build.quality);
            Ok(build)
        })?;
        build_report = Some(build.report);
        systems.push(build.system);
    } else {
        r.skipped("classify");
    }
    for p in &cfg.input.systems {
        let sys = load_external_classification(p, Some(&corpus)).map_err(|error| PipelineError {
            stage: Some("ingest".into()),
            error,
        })?;
        systems.push(sys);
    }

    let find = |name: &str| systems.iter().find(|s| s.name() == name);
    let ncs_system = match &cfg.scoring.ncs_system {
        Some(name) => Some(find(name).ok_or_else(|| PipelineError {
            stage: Some("score".into()),
            error: Error::Config(format!("unknown NCS system {name:?}")),
        })?),
        None => systems.first(),
    };

    let table = if let Some(p) = &cfg.scoring.precomputed {
        r.skipped("score");
        let mut t = ScoreTable::load(p).map_err(|error| PipelineError {
            stage: Some("score".into()),
            error,
        })?;
        t.ncs_system = ncs_system.map(|s| s.name().to_string());
        t
    } else {
        r.stage("score", &[files::SCORES], || {
            let t = score_all(&corpus, ncs_system, &scoring, core.as_ref())?;
            t.save(&out.join(files::SCORES))?;
            log::info!("scored {} publications", t.len());
            Ok(t)
        })?
    };

    let selected: Vec<&ClassificationSystem> = if cfg.evaluation.systems.is_empty() {
        systems.iter().collect()
    } else {
        cfg.evaluation
            .systems
            .iter()
            .map(|n| {
                find(n).ok_or_else(|| PipelineError {
                    stage: Some("evaluate".into()),
                    error: Error::Config(format!("unknown evaluation system {n:?}")),
                })
            })
            .collect::<std::result::Result<_, _>>()?
    };
    let evaluation = r.stage(
        "evaluate",
        &[files::CURVE, files::DECOMPOSITION, files::YEARLY, files::REPORT],
        || {
            let eval = evaluate(&table, &selected, Some(scoring.period), cfg.evaluation.quantiles)?;
            write_curve_csv(&eval, &out.join(files::CURVE))?;
            write_decomposition_csv(&eval, &out.join(files::DECOMPOSITION))?;
            write_yearly_csv(&yearly_means(&table, ncs_system), &out.join(files::YEARLY))?;
            write_report(&eval, &out.join(files::REPORT))?;
            Ok(eval)
        },
    )?;
    Ok((build_report, evaluation))
}

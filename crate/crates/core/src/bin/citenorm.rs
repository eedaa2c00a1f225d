use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use citenorm::classification::{build_classification, load_external_classification, ClusteringParams, Preset};
use citenorm::core_selection::{CoreSelectionParams, DEFAULT_ACTIVE_RATIO, DEFAULT_KL_THRESHOLD, DEFAULT_RECENT_GAP};
use citenorm::corpus::{load_corpus, validate_corpus, Corpus, JournalId};
use citenorm::evaluation::{yearly_means, DEFAULT_QUANTILES};
use citenorm::normalization::{score_all, ScoreTable, ScoringParams};
use citenorm::pipeline::{self, files, ManifestRecorder, PipelineConfig};
use citenorm::synthgen::{generate, SynthConfig};
use citenorm::{Error, Result};

#[derive(Parser)]
#[command(name = "citenorm", version, about = "Normalized citation scores and their evaluation")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for clustering and synthetic generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CorpusArgs {
    /// Publication records, one JSON object per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Journal records, one JSON object per line.
    #[arg(long)]
    journals: Option<PathBuf>,
}

impl CorpusArgs {
    fn paths(&self) -> Vec<PathBuf> {
        std::iter::once(self.corpus.clone()).chain(self.journals.clone()).collect()
    }

    fn load(&self) -> Result<Corpus> {
        load_corpus(&self.corpus, self.journals.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus, resolve references and write it back normalized.
    Ingest(CorpusArgs),
    /// Check corpus integrity.
    Validate(CorpusArgs),
    /// Select core journals and write the audit table.
    SelectCore {
        #[command(flatten)]
        input: CorpusArgs,
        /// Eligible publication years, e.g. 2003:2010.
        #[arg(long, value_parser = parse_years)]
        eligible_years: (i32, i32),
        /// Years whose publications are assessed for active citing.
        #[arg(long, value_parser = parse_years)]
        analysis_years: (i32, i32),
        #[arg(long, default_value_t = DEFAULT_KL_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_RECENT_GAP)]
        recent_gap: i32,
        #[arg(long, default_value_t = DEFAULT_ACTIVE_RATIO)]
        ratio: f64,
    },
    /// Cluster the citation network into a classification system.
    Classify {
        #[command(flatten)]
        input: CorpusArgs,
        /// Restrict to journals in this list or core.csv.
        #[arg(long)]
        core_list: Option<PathBuf>,
        /// Publication years to classify; defaults to all.
        #[arg(long, value_parser = parse_years)]
        years: Option<(i32, i32)>,
        #[arg(long, default_value = "B")]
        preset: Preset,
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        min_size: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Compute CS, NCS and SNCS scores.
    Score {
        #[command(flatten)]
        input: CorpusArgs,
        #[arg(long)]
        census_year: i32,
        /// Scored publication years; defaults to the four years up to the census.
        #[arg(long, value_parser = parse_years)]
        period: Option<(i32, i32)>,
        /// Classification used for NCS.
        #[arg(long = "systems", alias = "system")]
        systems: Option<PathBuf>,
        #[arg(long)]
        core_list: Option<PathBuf>,
    },
    /// Inequality curves, decompositions and yearly means of a score table.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        /// Classifications to evaluate against.
        #[arg(long, num_args = 1.., required = true)]
        systems: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_QUANTILES)]
        quantiles: u32,
        #[arg(long, value_parser = parse_years)]
        years: Option<(i32, i32)>,
    },
    /// Decomposition of total inequality only.
    Decompose {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        systems: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_QUANTILES)]
        quantiles: u32,
        #[arg(long, value_parser = parse_years)]
        years: Option<(i32, i32)>,
    },
    /// Generate a synthetic corpus with ground-truth fields.
    Synth {
        /// TOML generator configuration; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run all stages from a TOML configuration.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_years(s: &str) -> std::result::Result<(i32, i32), String> {
    let (a, b) = s.split_once(':').ok_or("expected FIRST:LAST")?;
    let lo = a.trim().parse().map_err(|_| format!("invalid year {a:?}"))?;
    let hi = b.trim().parse().map_err(|_| format!("invalid year {b:?}"))?;
    if lo > hi {
        return Err(format!("{lo} is after {hi}"));
    }
    Ok((lo, hi))
}

fn core_from(path: Option<&Path>) -> Result<Option<BTreeSet<JournalId>>> {
    path.map(pipeline::read_core_list).transpose()
}

fn load_systems(paths: &[PathBuf]) -> Result<Vec<citenorm::classification::ClassificationSystem>> {
    paths.iter().map(|p| load_external_classification(p, None)).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if let Command::Pipeline { config } = &cli.command {
        return run_pipeline(config, &cli);
    }
    let inputs = inputs_of(&cli.command);
    if let Some(missing) = inputs.iter().find(|p| !p.is_file()) {
        eprintln!("error: input file {} does not exist", missing.display());
        return ExitCode::from(2);
    }
    let params = json!({ "args": std::env::args().skip(1).collect::<Vec<_>>() });
    let recorder = match ManifestRecorder::start(name_of(&cli.command), params, cli.seed.into_iter().collect(), &inputs)
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = fs::create_dir_all(&cli.out)
        .map_err(|e| Error::io(&cli.out, e))
        .and_then(|_| execute(&cli));
    let status = match &result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    };
    if !matches!(cli.command, Command::Validate(_)) {
        let err = result.as_ref().err().map(|e| e.to_string());
        if let Err(e) = recorder.finish(&cli.out, err.as_deref()) {
            eprintln!("error: cannot write manifest: {e}");
            return ExitCode::from(1);
        }
    }
    status
}

fn name_of(cmd: &Command) -> &'static str {
    match cmd {
        Command::Ingest(_) => "ingest",
        Command::Validate(_) => "validate",
        Command::SelectCore { .. } => "select-core",
        Command::Classify { .. } => "classify",
        Command::Score { .. } => "score",
        Command::Evaluate { .. } => "evaluate",
        Command::Decompose { .. } => "decompose",
        Command::Synth { .. } => "synth",
        Command::Pipeline { .. } => "pipeline",
    }
}

fn inputs_of(cmd: &Command) -> Vec<PathBuf> {
    match cmd {
        Command::Ingest(c) | Command::Validate(c) => c.paths(),
        Command::SelectCore { input, .. } => input.paths(),
        Command::Classify { input, core_list, .. } => input.paths().into_iter().chain(core_list.clone()).collect(),
        Command::Score {
            input,
            systems,
            core_list,
            ..
        } => input
            .paths()
            .into_iter()
            .chain(systems.clone())
            .chain(core_list.clone())
            .collect(),
        Command::Evaluate { scores, systems, .. } | Command::Decompose { scores, systems, .. } => {
            std::iter::once(scores.clone()).chain(systems.iter().cloned()).collect()
        }
        Command::Synth { config } => config.iter().cloned().collect(),
        Command::Pipeline { config } => vec![config.clone()],
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Ingest(input) => {
            let c = input.load()?;
            c.save(&out.join("corpus.jsonl"), Some(&out.join("journals.jsonl")))?;
            let external: usize = c.publications().iter().map(|p| p.external_reference_count()).sum();
            println!(
                "{} publications, {} journals, {} citation links, {} external references, years {:?}",
                c.len(),
                c.journals().len(),
                c.edge_count(),
                external,
                c.year_range()
            );
        }
        Command::Validate(input) => {
            let c = input.load()?;
            let report = validate_corpus(&c);
            for v in &report.violations {
                println!("{v}");
            }
            if !report.is_valid() {
                return Err(Error::Integrity(format!("{} violations", report.violations.len())));
            }
            println!("valid: {} publications", c.len());
        }
        Command::SelectCore {
            input,
            eligible_years,
            analysis_years,
            threshold,
            recent_gap,
            ratio,
        } => {
            let c = input.load()?;
            let mut params = CoreSelectionParams::new(*eligible_years, *analysis_years);
            params.threshold = *threshold;
            params.fixpoint.recent_gap = *recent_gap;
            params.fixpoint.ratio = *ratio;
            let res = citenorm::core_selection::select_core(&c, &params)?;
            pipeline::write_core_csv(&res, &out.join(files::CORE))?;
            pipeline::write_core_list(&res.core_journal_ids, &out.join("core_list.txt"))?;
            println!(
                "{} international, {} core journals after {} rounds",
                res.international_journal_ids.len(),
                res.core_journal_ids.len(),
                res.iterations
            );
        }
        Command::Classify {
            input,
            core_list,
            years,
            preset,
            resolution,
            min_size,
            restarts,
        } => {
            let c = input.load()?;
            let core = core_from(core_list.as_deref())?;
            let years = years.or(c.year_range()).unwrap_or((i32::MIN, i32::MAX));
            let mut params = ClusteringParams::from_preset(*preset);
            params.resolution = resolution.unwrap_or(params.resolution);
            params.min_cluster_size = min_size.unwrap_or(params.min_cluster_size);
            params.restarts = restarts.unwrap_or(params.restarts);
            params.seed = cli.seed.unwrap_or(params.seed);
            let scope = pipeline::classification_scope(&c, core.as_ref(), years);
            let build = build_classification(&c, &scope, &params, pipeline::ALGORITHMIC_SYSTEM)?;
            build.system.save(&out.join(files::CLASSIFICATION))?;
            println!("{:?}, quality {}", build.report, build.quality);
        }
        Command::Score {
            input,
            census_year,
            period,
            systems,
            core_list,
        } => {
            let c = input.load()?;
            let core = core_from(core_list.as_deref())?;
            let system = systems
                .as_deref()
                .map(|p| load_external_classification(p, Some(&c)))
                .transpose()?;
            let params = ScoringParams {
                census_year: *census_year,
                period: period.unwrap_or((census_year - 3, *census_year)),
            };
            let table = score_all(&c, system.as_ref(), &params, core.as_ref())?;
            table.save(&out.join(files::SCORES))?;
            println!("scored {} publications", table.len());
        }
        Command::Evaluate {
            scores,
            systems,
            quantiles,
            years,
        } => {
            let table = ScoreTable::load(scores)?;
            let systems = load_systems(systems)?;
            let refs: Vec<_> = systems.iter().collect();
            let eval = pipeline::evaluate(&table, &refs, *years, *quantiles)?;
            pipeline::write_curve_csv(&eval, &out.join(files::CURVE))?;
            pipeline::write_decomposition_csv(&eval, &out.join(files::DECOMPOSITION))?;
            pipeline::write_yearly_csv(&yearly_means(&table, refs.first().copied()), &out.join(files::YEARLY))?;
            pipeline::write_report(&eval, &out.join(files::REPORT))?;
            print!("{}", fs::read_to_string(out.join(files::REPORT)).map_err(|e| Error::io(out, e))?);
        }
        Command::Decompose {
            scores,
            systems,
            quantiles,
            years,
        } => {
            let table = ScoreTable::load(scores)?;
            let systems = load_systems(systems)?;
            let refs: Vec<_> = systems.iter().collect();
            let eval = pipeline::evaluate(&table, &refs, *years, *quantiles)?;
            pipeline::write_decomposition_csv(&eval, &out.join(files::DECOMPOSITION))?;
            pipeline::write_report(&eval, &out.join(files::REPORT))?;
            print!("{}", fs::read_to_string(out.join(files::REPORT)).map_err(|e| Error::io(out, e))?);
        }
        Command::Synth { config } => {
            let mut cfg = match config {
                Some(p) => SynthConfig::load(p)?,
                None => SynthConfig::default(),
            };
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            let generated = generate(&cfg)?;
            let paths = generated.write(out)?;
            println!(
                "{} publications in {} fields -> {}",
                generated.corpus.len(),
                generated.truth.field_count(),
                paths.corpus.display()
            );
        }
        Command::Pipeline { .. } => unreachable!("handled before dispatch"),
    }
    Ok(())
}

fn run_pipeline(config: &Path, cli: &Cli) -> ExitCode {
    let mut cfg = match PipelineConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.classification.seed = seed;
    }
    match pipeline::run_pipeline(&cfg, &cli.out) {
        Ok(outcome) => {
            print!(
                "{}",
                fs::read_to_string(cli.out.join(files::REPORT)).unwrap_or_default()
            );
            log::info!("manifest: {} stages", outcome.manifest.stages.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

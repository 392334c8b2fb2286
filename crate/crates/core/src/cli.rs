//! Operator commands: filter, compress, evaluate, baseline, redundancy,
//! synth.
//!
//! Settings merge in three layers: built-in defaults, then the optional TOML
//! config file, then command-line flags, later layers winning field by
//! field. Every report echoes its effective config and seed; timestamps,
//! thread counts, and wall-clock times are quarantined in a `meta` block so
//! determinism checks can hash everything else.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 infeasible request,
//! 3 I/O failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{FitnessConfig, GaConfig};
use crate::metrics::{rank_shifts, ranks_desc, MetricSuite};
use crate::pipeline::{
    baseline_select, compress, default_group_ga, evaluate_subset, predict_subset,
    BaselineMethod, CompressSettings, PipelineConfig, PreprocessConfig, ReportMeta,
    SplitConfig,
};
use crate::redundancy::{
    coarse_filter, load_embeddings_csv_path, ranking_dataset_redundancy,
    ranking_pair_redundancy, ranking_sample_redundancy, text_dataset_redundancy,
    text_pair_redundancy, text_sample_redundancy, EmbeddingSet, FilterResult,
    RankingCorrelation, RedundancyConfig, TriggerScope,
};
use crate::rng::{keyed, StreamTag};
use crate::scorematrix::{
    load_score_matrix_path, preprocess, save_score_matrix_path, stratified_split,
    ScoreMatrix,
};
use crate::synth::{generate, DuplicateGroup, SynthSpec};

pub const THREADS_ENV: &str = "COREBENCH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "corebench",
    version,
    about = "Compress benchmarks to small subsets that preserve model rankings"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads, 0 = all cores (also COREBENCH_THREADS)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Master seed for every random choice
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drop redundant samples by embedding similarity and ranking correlation
    Filter(FilterArgs),
    /// Run the full compression pipeline and write a report
    Compress(CompressArgs),
    /// Score an existing subset against the full benchmark
    Evaluate(EvaluateArgs),
    /// Select a subset by a reference strategy
    Baseline(BaselineArgs),
    /// Measure dataset redundancy and emit heatmap data
    Redundancy(RedundancyArgs),
    /// Generate a synthetic benchmark with known structure
    Synth(SynthArgs),
}

fn parse_correlation(s: &str) -> std::result::Result<RankingCorrelation, String> {
    match s {
        "pearson" => Ok(RankingCorrelation::Pearson),
        "spearman" => Ok(RankingCorrelation::Spearman),
        "r_squared" => Ok(RankingCorrelation::RSquared),
        other => Err(format!(
            "unknown correlation `{other}` (expected pearson, spearman, or r_squared)"
        )),
    }
}

fn parse_trigger_scope(s: &str) -> std::result::Result<TriggerScope, String> {
    match s {
        "kept_only" => Ok(TriggerScope::KeptOnly),
        "all_earlier" => Ok(TriggerScope::AllEarlier),
        other => Err(format!(
            "unknown trigger scope `{other}` (expected kept_only or all_earlier)"
        )),
    }
}

fn parse_method(s: &str) -> std::result::Result<BaselineMethod, String> {
    match s {
        "random" => Ok(BaselineMethod::Random),
        "score_ranked" => Ok(BaselineMethod::ScoreRanked),
        other => Err(format!(
            "unknown method `{other}` (expected random or score_ranked)"
        )),
    }
}

/// "source:copies:flip", e.g. "3:2:0.1" plants two copies of sample 3 with
/// 10% bit flips.
fn parse_duplicate_group(s: &str) -> std::result::Result<DuplicateGroup, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected source:copies:flip, got `{s}`"));
    }
    let source_index = parts[0]
        .parse::<usize>()
        .map_err(|e| format!("bad source index `{}`: {e}", parts[0]))?;
    let copies = parts[1]
        .parse::<usize>()
        .map_err(|e| format!("bad copy count `{}`: {e}", parts[1]))?;
    let flip_probability = parts[2]
        .parse::<f64>()
        .map_err(|e| format!("bad flip probability `{}`: {e}", parts[2]))?;
    Ok(DuplicateGroup { source_index, copies, flip_probability })
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Score matrix CSV (model rows, sample columns)
    #[arg(long)]
    pub scores: PathBuf,

    /// Embedding CSV `id,v0,v1,...`; required while text filtering is active
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// Text similarity threshold; 1.0 disables text filtering
    #[arg(long)]
    pub tau_text: Option<f64>,

    /// Ranking correlation threshold; 1.0 disables ranking filtering
    #[arg(long)]
    pub tau_ranking: Option<f64>,

    /// pearson, spearman, or r_squared
    #[arg(long, value_parser = parse_correlation)]
    pub correlation: Option<RankingCorrelation>,

    /// kept_only or all_earlier
    #[arg(long, value_parser = parse_trigger_scope)]
    pub trigger_scope: Option<TriggerScope>,

    /// Drop model rows below this accuracy first
    #[arg(long)]
    pub min_accuracy: Option<f64>,

    /// Drop sample columns below this Bernoulli variance first; any positive
    /// value removes the constant columns the ranking filter rejects
    #[arg(long)]
    pub min_variance: Option<f64>,

    /// Report JSON path
    #[arg(long)]
    pub out: PathBuf,

    /// Kept-ID list path (default: out path with extension kept.txt)
    #[arg(long)]
    pub ids_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Score matrix CSV (model rows, sample columns)
    #[arg(long)]
    pub scores: PathBuf,

    /// Embedding CSV; required while text filtering is active
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// Subset size
    #[arg(short, long)]
    pub k: Option<usize>,

    /// Skip the coarse redundancy filter
    #[arg(long)]
    pub no_filter: bool,

    #[arg(long)]
    pub tau_text: Option<f64>,

    #[arg(long)]
    pub tau_ranking: Option<f64>,

    /// Main search population size
    #[arg(long)]
    pub population: Option<usize>,

    /// Elites kept per generation
    #[arg(long)]
    pub elites: Option<usize>,

    /// Main search generations
    #[arg(long)]
    pub generations: Option<usize>,

    /// Refinement rounds
    #[arg(long)]
    pub rounds: Option<usize>,

    /// Fraction of the pool each group keeps
    #[arg(long)]
    pub retention: Option<f64>,

    /// Softmax temperature for attribution-biased group seeding
    #[arg(long)]
    pub temperature: Option<f64>,

    /// Drop model rows below this accuracy first
    #[arg(long)]
    pub min_accuracy: Option<f64>,

    /// Drop sample columns below this Bernoulli variance first
    #[arg(long)]
    pub min_variance: Option<f64>,

    /// Report JSON path
    #[arg(long)]
    pub out: PathBuf,

    /// Subset ID list path (default: out path with extension subset.txt)
    #[arg(long)]
    pub subset_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score matrix CSV (model rows, sample columns)
    #[arg(long)]
    pub scores: PathBuf,

    /// Newline-delimited sample IDs of the subset to evaluate
    #[arg(long)]
    pub subset: PathBuf,

    /// Evaluate every model instead of only the held-out test split
    #[arg(long)]
    pub all_models: bool,

    /// Ranking depth for NDCG and top-k overlap
    #[arg(long)]
    pub k_top: Option<usize>,

    /// Metric suite JSON path
    #[arg(long)]
    pub out: PathBuf,

    /// Per-model rank-shift CSV (default: out path with extension shifts.csv)
    #[arg(long)]
    pub shifts_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Score matrix CSV (model rows, sample columns)
    #[arg(long)]
    pub scores: PathBuf,

    /// Subset size
    #[arg(short, long)]
    pub k: usize,

    /// random or score_ranked
    #[arg(long, value_parser = parse_method)]
    pub method: BaselineMethod,

    /// Per-sample scores CSV `sample_id,score` for score_ranked
    #[arg(long)]
    pub scores_file: Option<PathBuf>,

    /// Subset ID list path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RedundancyArgs {
    /// Score matrix CSV (model rows, sample columns)
    #[arg(long)]
    pub scores: PathBuf,

    /// Embedding CSV for text redundancy
    #[arg(long)]
    pub embeddings: Option<PathBuf>,

    /// Samples drawn for the pairwise heatmap
    #[arg(long)]
    pub heatmap_samples: Option<usize>,

    /// pearson, spearman, or r_squared
    #[arg(long, value_parser = parse_correlation)]
    pub correlation: Option<RankingCorrelation>,

    /// Report JSON path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub models: Option<usize>,

    #[arg(long)]
    pub samples: Option<usize>,

    #[arg(long)]
    pub skill_mean: Option<f64>,

    #[arg(long)]
    pub skill_spread: Option<f64>,

    #[arg(long)]
    pub difficulty_mean: Option<f64>,

    #[arg(long)]
    pub difficulty_spread: Option<f64>,

    #[arg(long)]
    pub embedding_dim: Option<usize>,

    /// Planted duplicate group `source:copies:flip`; repeatable
    #[arg(long = "duplicates", value_parser = parse_duplicate_group)]
    pub duplicates: Vec<DuplicateGroup>,

    /// Directory for scores.csv, embeddings.csv, and manifest.json
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Declarative experiment manifest. Every field is optional; omitted ones
/// fall back to built-in defaults, and command-line flags override both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub redundancy: RedundancyBlock,
    pub ga: GaBlock,
    pub pipeline: PipelineBlock,
    pub split: SplitBlock,
    pub metrics: MetricsBlock,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedundancyBlock {
    /// `false` skips coarse filtering during compress
    pub enabled: Option<bool>,
    pub tau_text: Option<f64>,
    pub tau_ranking: Option<f64>,
    pub correlation: Option<RankingCorrelation>,
    pub trigger_scope: Option<TriggerScope>,
    pub heatmap_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaBlock {
    pub population_size: Option<usize>,
    pub elite_count: Option<usize>,
    pub generations: Option<usize>,
    pub tournament_size: Option<usize>,
    pub fitness: Option<FitnessConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineBlock {
    pub k: Option<usize>,
    pub rounds_max: Option<usize>,
    pub retention_ratio: Option<f64>,
    pub sampling_temperature: Option<f64>,
    /// Group search overrides; unset fields inherit from the main search
    /// except generations, which defaults to a third of the main budget
    pub group_ga: GaBlock,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitBlock {
    pub test_fraction: Option<f64>,
    pub n_strata: Option<usize>,
    pub val_fraction_of_train: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsBlock {
    pub k_top: Option<usize>,
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve_ga(block: &GaBlock, base: GaConfig) -> GaConfig {
    GaConfig {
        population_size: block.population_size.unwrap_or(base.population_size),
        elite_count: block.elite_count.unwrap_or(base.elite_count),
        generations: block.generations.unwrap_or(base.generations),
        tournament_size: block.tournament_size.unwrap_or(base.tournament_size),
        fitness: block.fitness.clone().unwrap_or(base.fitness),
        ..base
    }
}

fn resolve_split(block: &SplitBlock) -> SplitConfig {
    let base = SplitConfig::default();
    SplitConfig {
        test_fraction: block.test_fraction.unwrap_or(base.test_fraction),
        n_strata: block.n_strata.unwrap_or(base.n_strata),
        val_fraction_of_train: block.val_fraction_of_train.unwrap_or(base.val_fraction_of_train),
    }
}

fn resolve_redundancy(
    block: &RedundancyBlock,
    tau_text: Option<f64>,
    tau_ranking: Option<f64>,
    correlation: Option<RankingCorrelation>,
    trigger_scope: Option<TriggerScope>,
) -> RedundancyConfig {
    let base = RedundancyConfig::default();
    RedundancyConfig {
        tau_text: tau_text.or(block.tau_text).unwrap_or(base.tau_text),
        tau_ranking: tau_ranking.or(block.tau_ranking).unwrap_or(base.tau_ranking),
        correlation: correlation.or(block.correlation).unwrap_or(base.correlation),
        trigger_scope: trigger_scope.or(block.trigger_scope).unwrap_or(base.trigger_scope),
    }
}

/// Text filtering compares embeddings, so a live text threshold without an
/// embedding file is a contradiction the user has to resolve explicitly.
fn require_embeddings_for_text(
    rcfg: &RedundancyConfig,
    embeddings: Option<&EmbeddingSet>,
) -> Result<()> {
    if rcfg.tau_text < 1.0 && embeddings.is_none() {
        return Err(Error::Usage(
            "text filtering is active (tau_text < 1.0) but no --embeddings file was given; \
             supply one, set --tau-text 1.0, or disable filtering"
                .into(),
        ));
    }
    Ok(())
}

fn resolve_seed(flag: Option<u64>, file: &RunConfig) -> u64 {
    flag.or(file.seed).unwrap_or(0)
}

/// Flag beats environment beats config file; 0 means "all cores".
pub fn resolve_threads(
    flag: Option<usize>,
    env: Option<&str>,
    file: Option<usize>,
) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    if let Some(raw) = env {
        return raw.trim().parse().map_err(|_| {
            Error::Usage(format!("{THREADS_ENV} must be a non-negative integer, got `{raw}`"))
        });
    }
    Ok(file.unwrap_or(0))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_id_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if ids.is_empty() {
        return Err(Error::Usage(format!("no sample ids in {}", path.display())));
    }
    Ok(ids)
}

fn subset_columns(matrix: &ScoreMatrix, ids: &[String]) -> Result<Vec<usize>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut columns = Vec::with_capacity(ids.len());
    for id in ids {
        let pos = matrix
            .sample_position(id)
            .ok_or_else(|| Error::Usage(format!("unknown sample id `{id}`")))?;
        if !seen.insert(pos) {
            return Err(Error::Usage(format!("duplicate sample id `{id}`")));
        }
        columns.push(pos);
    }
    Ok(columns)
}

fn meta_with_total(start: Instant) -> ReportMeta {
    let mut wall = BTreeMap::new();
    wall.insert("total".to_string(), start.elapsed().as_secs_f64());
    ReportMeta {
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        threads: rayon::current_num_threads(),
        wall_clock_seconds: wall,
    }
}

fn default_sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

#[derive(Debug, Serialize)]
struct PreprocessEcho {
    config: PreprocessConfig,
    models_dropped: usize,
    samples_dropped: usize,
}

#[derive(Debug, Serialize)]
struct FilterReport<'a> {
    meta: ReportMeta,
    seed: u64,
    kept: usize,
    discarded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    preprocess: Option<PreprocessEcho>,
    #[serde(flatten)]
    result: &'a FilterResult,
}

fn cmd_filter(args: &FilterArgs, file_cfg: &RunConfig, seed: u64) -> Result<()> {
    let start = Instant::now();
    let loaded = load_score_matrix_path(&args.scores)?;
    let (matrix, pre_echo) =
        match preprocess_from_flags(args.min_accuracy, args.min_variance) {
            Some(pre) => {
                let cleaned = preprocess(&loaded, pre.min_accuracy, pre.min_variance)?;
                let echo = PreprocessEcho {
                    config: pre,
                    models_dropped: loaded.n_models() - cleaned.n_models(),
                    samples_dropped: loaded.n_samples() - cleaned.n_samples(),
                };
                (cleaned, Some(echo))
            }
            None => (loaded, None),
        };
    let embeddings = args
        .embeddings
        .as_deref()
        .map(load_embeddings_csv_path)
        .transpose()?;
    let rcfg = resolve_redundancy(
        &file_cfg.redundancy,
        args.tau_text,
        args.tau_ranking,
        args.correlation,
        args.trigger_scope,
    );
    require_embeddings_for_text(&rcfg, embeddings.as_ref())?;

    let result = coarse_filter(&matrix, embeddings.as_ref(), &rcfg)?;
    let report = FilterReport {
        meta: meta_with_total(start),
        seed,
        kept: result.kept_sample_ids.len(),
        discarded: result.discarded.len(),
        preprocess: pre_echo,
        result: &result,
    };
    write_json(&args.out, &report)?;
    let ids_out = args
        .ids_out
        .clone()
        .unwrap_or_else(|| default_sibling(&args.out, "kept.txt"));
    write_lines(&ids_out, &result.kept_sample_ids)?;
    println!(
        "kept {} of {} samples, discarded {} -> {}",
        result.kept_sample_ids.len(),
        matrix.n_samples(),
        result.discarded.len(),
        args.out.display()
    );
    Ok(())
}

fn compress_settings(args: &CompressArgs, file_cfg: &RunConfig, seed: u64) -> CompressSettings {
    let ga = resolve_ga(
        &GaBlock {
            population_size: args.population.or(file_cfg.ga.population_size),
            elite_count: args.elites.or(file_cfg.ga.elite_count),
            generations: args.generations.or(file_cfg.ga.generations),
            ..file_cfg.ga.clone()
        },
        GaConfig::default(),
    );
    // group searches inherit the main settings at a third of the budget,
    // then apply their own block
    let group_ga = resolve_ga(&file_cfg.pipeline.group_ga, default_group_ga(&ga));
    let base = PipelineConfig::default();
    let pipeline = PipelineConfig {
        k: args.k.or(file_cfg.pipeline.k).unwrap_or(base.k),
        rounds_max: args.rounds.or(file_cfg.pipeline.rounds_max).unwrap_or(base.rounds_max),
        retention_ratio: args
            .retention
            .or(file_cfg.pipeline.retention_ratio)
            .unwrap_or(base.retention_ratio),
        sampling_temperature: args
            .temperature
            .or(file_cfg.pipeline.sampling_temperature)
            .unwrap_or(base.sampling_temperature),
        ga,
        group_ga,
        seed,
    };
    let filtering = !args.no_filter && file_cfg.redundancy.enabled.unwrap_or(true);
    let redundancy = filtering.then(|| {
        resolve_redundancy(&file_cfg.redundancy, args.tau_text, args.tau_ranking, None, None)
    });
    CompressSettings {
        pipeline,
        split: resolve_split(&file_cfg.split),
        preprocess: preprocess_from_flags(args.min_accuracy, args.min_variance),
        redundancy,
        k_top: file_cfg.metrics.k_top.unwrap_or(50),
    }
}

fn preprocess_from_flags(
    min_accuracy: Option<f64>,
    min_variance: Option<f64>,
) -> Option<PreprocessConfig> {
    if min_accuracy.is_none() && min_variance.is_none() {
        return None;
    }
    Some(PreprocessConfig {
        min_accuracy: min_accuracy.unwrap_or(0.0),
        min_variance: min_variance.unwrap_or(0.0),
    })
}

fn cmd_compress(args: &CompressArgs, file_cfg: &RunConfig, seed: u64) -> Result<()> {
    let matrix = load_score_matrix_path(&args.scores)?;
    let embeddings = args
        .embeddings
        .as_deref()
        .map(load_embeddings_csv_path)
        .transpose()?;
    let settings = compress_settings(args, file_cfg, seed);
    if let Some(rcfg) = &settings.redundancy {
        require_embeddings_for_text(rcfg, embeddings.as_ref())?;
    }

    let report = compress(&matrix, embeddings.as_ref(), &settings)?;
    write_json(&args.out, &report)?;
    let subset_out = args
        .subset_out
        .clone()
        .unwrap_or_else(|| default_sibling(&args.out, "subset.txt"));
    write_lines(&subset_out, &report.selected_sample_ids)?;
    println!(
        "selected {} of {} samples, error {:.6} -> {}",
        report.k,
        matrix.n_samples(),
        report.final_error,
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluateEcho {
    split: SplitConfig,
    fitness: FitnessConfig,
    k_top: usize,
    all_models: bool,
    subset_size: usize,
}

#[derive(Debug, Serialize)]
struct EvaluateReport {
    meta: ReportMeta,
    seed: u64,
    config: EvaluateEcho,
    suite: MetricSuite,
}

fn cmd_evaluate(args: &EvaluateArgs, file_cfg: &RunConfig, seed: u64) -> Result<()> {
    let start = Instant::now();
    let matrix = load_score_matrix_path(&args.scores)?;
    let ids = read_id_lines(&args.subset)?;
    let columns = subset_columns(&matrix, &ids)?;

    let split_cfg = resolve_split(&file_cfg.split);
    let fitness = resolve_ga(&file_cfg.ga, GaConfig::default()).fitness;
    let k_top = args.k_top.or(file_cfg.metrics.k_top).unwrap_or(50);

    let y = matrix.accuracy();
    let split = stratified_split(
        &y,
        split_cfg.n_strata,
        split_cfg.test_fraction,
        split_cfg.val_fraction_of_train,
        seed,
    )?;
    let (rows, actual, predicted) =
        predict_subset(&matrix, &y, &split, &columns, &fitness, args.all_models)?;
    let suite = evaluate_subset(
        &matrix,
        &y,
        &split,
        &columns,
        &fitness,
        k_top,
        args.all_models,
    )?;

    let report = EvaluateReport {
        meta: meta_with_total(start),
        seed,
        config: EvaluateEcho {
            split: split_cfg,
            fitness,
            k_top,
            all_models: args.all_models,
            subset_size: columns.len(),
        },
        suite,
    };
    write_json(&args.out, &report)?;

    // headerless rows: model_id,actual,predicted,actual_rank,predicted_rank,shift
    let shifts = rank_shifts(&actual, &predicted)?;
    let rank_a = ranks_desc(&actual);
    let rank_p = ranks_desc(&predicted);
    let lines: Vec<String> = rows
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            format!(
                "{},{},{},{},{},{}",
                matrix.model_ids()[r],
                actual[i],
                predicted[i],
                rank_a[i],
                rank_p[i],
                shifts[i]
            )
        })
        .collect();
    let shifts_out = args
        .shifts_out
        .clone()
        .unwrap_or_else(|| default_sibling(&args.out, "shifts.csv"));
    write_lines(&shifts_out, &lines)?;

    println!(
        "evaluated {} models: rmse {:.6}, spearman {:.4} -> {}",
        report.suite.n_models,
        report.suite.rmse,
        report.suite.spearman,
        args.out.display()
    );
    Ok(())
}

fn load_sample_scores(path: &Path, matrix: &ScoreMatrix) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut by_id: BTreeMap<String, f64> = BTreeMap::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                field: record.len(),
                msg: "expected `sample_id,score`".into(),
            });
        }
        let id = record[0].to_string();
        let score: f64 = record[1].parse().map_err(|e| Error::Parse {
            line: lineno + 1,
            field: 2,
            msg: format!("bad score: {e}"),
        })?;
        if by_id.insert(id.clone(), score).is_some() {
            return Err(Error::DuplicateId { kind: "sample", id });
        }
    }
    matrix
        .sample_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Usage(format!("no score for sample `{id}`")))
        })
        .collect()
}

fn cmd_baseline(args: &BaselineArgs, seed: u64) -> Result<()> {
    let matrix = load_score_matrix_path(&args.scores)?;
    let scores = args
        .scores_file
        .as_deref()
        .map(|p| load_sample_scores(p, &matrix))
        .transpose()?;
    let mask = baseline_select(&matrix, args.k, args.method, scores.as_deref(), seed)?;
    let ids: Vec<String> = mask
        .ones()
        .iter()
        .map(|&c| matrix.sample_ids()[c].clone())
        .collect();
    write_lines(&args.out, &ids)?;
    println!("selected {} of {} samples -> {}", ids.len(), matrix.n_samples(), args.out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct RedundancyEcho {
    correlation: RankingCorrelation,
    heatmap_samples: usize,
}

#[derive(Debug, Serialize)]
struct SampleRedundancy {
    id: String,
    text: Option<f64>,
    ranking: f64,
}

#[derive(Debug, Serialize)]
struct Heatmap {
    sample_ids: Vec<String>,
    text: Option<Vec<Vec<f64>>>,
    ranking: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct Overall {
    text: Option<f64>,
    ranking: f64,
}

#[derive(Debug, Serialize)]
struct RedundancyReport {
    meta: ReportMeta,
    seed: u64,
    config: RedundancyEcho,
    overall: Overall,
    per_sample: Vec<SampleRedundancy>,
    heatmap: Heatmap,
}

fn cmd_redundancy(args: &RedundancyArgs, file_cfg: &RunConfig, seed: u64) -> Result<()> {
    let start = Instant::now();
    let matrix = load_score_matrix_path(&args.scores)?;
    let embeddings = args
        .embeddings
        .as_deref()
        .map(load_embeddings_csv_path)
        .transpose()?
        .map(|e| e.align_to(matrix.sample_ids()))
        .transpose()?;
    let correlation = args
        .correlation
        .or(file_cfg.redundancy.correlation)
        .unwrap_or(RankingCorrelation::Pearson);
    let heatmap_samples = args
        .heatmap_samples
        .or(file_cfg.redundancy.heatmap_samples)
        .unwrap_or(10);

    let m = matrix.n_samples();
    let mut per_sample = Vec::with_capacity(m);
    for j in 0..m {
        per_sample.push(SampleRedundancy {
            id: matrix.sample_ids()[j].clone(),
            text: embeddings
                .as_ref()
                .map(|e| text_sample_redundancy(e, j))
                .transpose()?,
            ranking: ranking_sample_redundancy(&matrix, j, correlation)?,
        });
    }
    let overall = Overall {
        text: embeddings.as_ref().map(text_dataset_redundancy).transpose()?,
        ranking: ranking_dataset_redundancy(&matrix, correlation)?,
    };

    // the heatmap covers a small random sample of samples; indices are
    // sorted so the block reads in matrix order
    let mut rng = keyed(seed, StreamTag::Heatmap, 0, 0);
    let n_heat = heatmap_samples.min(m);
    let mut picked = rand::seq::index::sample(&mut rng, m, n_heat).into_vec();
    picked.sort_unstable();
    let mut ranking_heat = vec![vec![1.0; n_heat]; n_heat];
    let mut text_heat = embeddings.as_ref().map(|_| vec![vec![1.0; n_heat]; n_heat]);
    for a in 0..n_heat {
        for b in (a + 1)..n_heat {
            let r = ranking_pair_redundancy(&matrix, picked[a], picked[b], correlation)?;
            ranking_heat[a][b] = r;
            ranking_heat[b][a] = r;
            if let (Some(heat), Some(emb)) = (text_heat.as_mut(), embeddings.as_ref()) {
                let t = text_pair_redundancy(emb, picked[a], picked[b])?;
                heat[a][b] = t;
                heat[b][a] = t;
            }
        }
    }

    let report = RedundancyReport {
        meta: meta_with_total(start),
        seed,
        config: RedundancyEcho { correlation, heatmap_samples },
        overall: Overall { text: overall.text, ranking: overall.ranking },
        per_sample,
        heatmap: Heatmap {
            sample_ids: picked.iter().map(|&j| matrix.sample_ids()[j].clone()).collect(),
            text: text_heat,
            ranking: ranking_heat,
        },
    };
    write_json(&args.out, &report)?;
    match report.overall.text {
        Some(t) => println!(
            "overall text redundancy {:.4}, ranking redundancy {:.4} -> {}",
            t,
            report.overall.ranking,
            args.out.display()
        ),
        None => println!(
            "overall ranking redundancy {:.4} -> {}",
            report.overall.ranking,
            args.out.display()
        ),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SynthManifest {
    meta: ReportMeta,
    seed: u64,
    config: SynthSpec,
    files: BTreeMap<String, String>,
    duplicate_map: BTreeMap<String, String>,
    skills: Vec<f64>,
    difficulties: Vec<f64>,
}

fn cmd_synth(args: &SynthArgs, seed: u64) -> Result<()> {
    let start = Instant::now();
    let base = SynthSpec::default();
    let spec = SynthSpec {
        n_models: args.models.unwrap_or(base.n_models),
        n_samples: args.samples.unwrap_or(base.n_samples),
        skill_mean: args.skill_mean.unwrap_or(base.skill_mean),
        skill_spread: args.skill_spread.unwrap_or(base.skill_spread),
        difficulty_mean: args.difficulty_mean.unwrap_or(base.difficulty_mean),
        difficulty_spread: args.difficulty_spread.unwrap_or(base.difficulty_spread),
        duplicate_groups: args.duplicates.clone(),
        embedding_dim: args.embedding_dim.unwrap_or(base.embedding_dim),
        seed,
    };
    let out = generate(&spec)?;

    fs::create_dir_all(&args.out_dir)?;
    let scores_path = args.out_dir.join("scores.csv");
    let embeddings_path = args.out_dir.join("embeddings.csv");
    let manifest_path = args.out_dir.join("manifest.json");
    save_score_matrix_path(&out.matrix, &scores_path)?;
    let file = fs::File::create(&embeddings_path)?;
    crate::redundancy::save_embeddings_csv(&out.embeddings, file)?;

    let mut files = BTreeMap::new();
    files.insert("scores".to_string(), "scores.csv".to_string());
    files.insert("embeddings".to_string(), "embeddings.csv".to_string());
    let manifest = SynthManifest {
        meta: meta_with_total(start),
        seed,
        config: spec,
        files,
        duplicate_map: out.duplicate_map,
        skills: out.skills,
        difficulties: out.difficulties,
    };
    write_json(&manifest_path, &manifest)?;
    println!(
        "generated {} models x {} samples -> {}",
        out.matrix.n_models(),
        out.matrix.n_samples(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let file_cfg = load_run_config(cli.config.as_deref())?;
    let threads = resolve_threads(
        cli.threads,
        std::env::var(THREADS_ENV).ok().as_deref(),
        file_cfg.threads,
    )?;
    // a later identical call (tests driving run() twice) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let seed = resolve_seed(cli.seed, &file_cfg);

    match &cli.command {
        Command::Filter(args) => cmd_filter(args, &file_cfg, seed),
        Command::Compress(args) => cmd_compress(args, &file_cfg, seed),
        Command::Evaluate(args) => cmd_evaluate(args, &file_cfg, seed),
        Command::Baseline(args) => cmd_baseline(args, seed),
        Command::Redundancy(args) => cmd_redundancy(args, &file_cfg, seed),
        Command::Synth(args) => cmd_synth(args, seed),
    }
}

/// Binary entry point: clap usage errors exit 1 (help and version exit 0),
/// everything else maps through `Error::exit_code`.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::SplineParams;

    #[test]
    fn run_config_parses_a_full_manifest() {
        let text = r#"
            seed = 77
            threads = 4

            [redundancy]
            tau_text = 0.9
            tau_ranking = 0.98
            correlation = "spearman"
            trigger_scope = "all_earlier"

            [ga]
            population_size = 64
            generations = 120

            [ga.fitness]
            kind = "spline"
            interior_knots = 12
            smoothing_penalty = 0.5
            min_pairs_for_spline = 8

            [pipeline]
            k = 40
            rounds_max = 3

            [pipeline.group_ga]
            generations = 25

            [split]
            test_fraction = 0.15

            [metrics]
            k_top = 20
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, Some(77));
        assert_eq!(cfg.threads, Some(4));
        assert_eq!(cfg.redundancy.tau_text, Some(0.9));
        assert_eq!(cfg.redundancy.correlation, Some(RankingCorrelation::Spearman));
        assert_eq!(cfg.redundancy.trigger_scope, Some(TriggerScope::AllEarlier));
        assert_eq!(cfg.ga.population_size, Some(64));
        assert_eq!(
            cfg.ga.fitness,
            Some(FitnessConfig::Spline(SplineParams {
                interior_knots: 12,
                smoothing_penalty: 0.5,
                min_pairs_for_spline: 8,
            }))
        );
        assert_eq!(cfg.pipeline.k, Some(40));
        assert_eq!(cfg.pipeline.group_ga.generations, Some(25));
        assert_eq!(cfg.split.test_fraction, Some(0.15));
        assert_eq!(cfg.metrics.k_top, Some(20));
    }

    #[test]
    fn run_config_rejects_unknown_fields() {
        assert!(toml::from_str::<RunConfig>("[ga]\npopulation = 5\n").is_err());
        assert!(toml::from_str::<RunConfig>("speed = 3\n").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file: RunConfig = toml::from_str(
            "[redundancy]\ntau_text = 0.8\ntau_ranking = 0.9\n",
        )
        .unwrap();
        let rcfg = resolve_redundancy(&file.redundancy, Some(0.7), None, None, None);
        assert_eq!(rcfg.tau_text, 0.7, "flag beats file");
        assert_eq!(rcfg.tau_ranking, 0.9, "file beats default");
        assert_eq!(rcfg.correlation, RankingCorrelation::Pearson, "default");
    }

    #[test]
    fn group_ga_inherits_a_third_of_the_main_budget() {
        let args = CompressArgs {
            scores: PathBuf::new(),
            embeddings: None,
            k: Some(10),
            no_filter: true,
            tau_text: None,
            tau_ranking: None,
            population: Some(30),
            elites: Some(5),
            generations: Some(90),
            rounds: None,
            retention: None,
            temperature: None,
            min_accuracy: None,
            min_variance: None,
            out: PathBuf::new(),
            subset_out: None,
        };
        let settings = compress_settings(&args, &RunConfig::default(), 9);
        assert_eq!(settings.pipeline.ga.generations, 90);
        assert_eq!(settings.pipeline.group_ga.generations, 30);
        assert_eq!(settings.pipeline.group_ga.population_size, 30);
        assert_eq!(settings.pipeline.group_ga.elite_count, 5);
        assert_eq!(settings.pipeline.seed, 9);
        assert!(settings.redundancy.is_none());

        let mut file: RunConfig = toml::from_str(
            "[ga]\npopulation_size = 40\n[pipeline.group_ga]\ngenerations = 7\n",
        )
        .unwrap();
        file.redundancy.enabled = Some(false);
        let mut args2 = args;
        args2.no_filter = false;
        args2.population = None;
        let settings = compress_settings(&args2, &file, 9);
        assert_eq!(settings.pipeline.ga.population_size, 40, "file survives absent flag");
        assert_eq!(settings.pipeline.group_ga.generations, 7, "file block wins");
        assert!(settings.redundancy.is_none(), "config can disable filtering");
    }

    #[test]
    fn thread_resolution_prefers_flag_then_env_then_file() {
        assert_eq!(resolve_threads(Some(2), Some("8"), Some(4)).unwrap(), 2);
        assert_eq!(resolve_threads(None, Some("8"), Some(4)).unwrap(), 8);
        assert_eq!(resolve_threads(None, None, Some(4)).unwrap(), 4);
        assert_eq!(resolve_threads(None, None, None).unwrap(), 0);
        assert!(resolve_threads(None, Some("lots"), None).is_err());
    }

    #[test]
    fn duplicate_group_flag_parses_and_rejects() {
        let g = parse_duplicate_group("3:2:0.25").unwrap();
        assert_eq!(
            g,
            DuplicateGroup { source_index: 3, copies: 2, flip_probability: 0.25 }
        );
        assert!(parse_duplicate_group("3:2").is_err());
        assert!(parse_duplicate_group("a:2:0.1").is_err());
        assert!(parse_duplicate_group("1:b:0.1").is_err());
        assert!(parse_duplicate_group("1:2:x").is_err());
    }

    #[test]
    fn enum_flags_parse_snake_case_names() {
        assert_eq!(parse_correlation("pearson").unwrap(), RankingCorrelation::Pearson);
        assert_eq!(parse_correlation("r_squared").unwrap(), RankingCorrelation::RSquared);
        assert!(parse_correlation("kendall").is_err());
        assert_eq!(parse_trigger_scope("kept_only").unwrap(), TriggerScope::KeptOnly);
        assert!(parse_trigger_scope("both").is_err());
        assert_eq!(parse_method("random").unwrap(), BaselineMethod::Random);
        assert!(parse_method("oracle").is_err());
    }

    #[test]
    fn missing_embeddings_with_live_text_threshold_is_a_usage_error() {
        let rcfg = RedundancyConfig::default();
        assert!(matches!(
            require_embeddings_for_text(&rcfg, None),
            Err(Error::Usage(_))
        ));
        let off = RedundancyConfig { tau_text: 1.0, ..rcfg };
        assert!(require_embeddings_for_text(&off, None).is_ok());
    }

    #[test]
    fn cli_parses_a_compress_invocation() {
        let cli = Cli::try_parse_from([
            "corebench",
            "compress",
            "--scores",
            "s.csv",
            "-k",
            "25",
            "--no-filter",
            "--generations",
            "50",
            "--out",
            "report.json",
            "--seed",
            "3",
            "--threads",
            "2",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(3));
        assert_eq!(cli.threads, Some(2));
        match cli.command {
            Command::Compress(args) => {
                assert_eq!(args.k, Some(25));
                assert!(args.no_filter);
                assert_eq!(args.generations, Some(50));
            }
            other => panic!("parsed wrong command: {other:?}"),
        }
    }
}

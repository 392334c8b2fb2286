//! Coarse-to-fine compression loop.
//!
//! Each round runs the genetic search on the current sample pool, aggregates
//! per-sample attributions from the elite masks, partitions the pool into
//! high/low/random attribution groups, re-searches each group with an
//! attribution-biased initial population, and narrows the pool to the best
//! group. A global best mask is tracked across every search, main or group.
//!
//! All randomness is keyed off one seed: per-round GA sub-seeds, the random
//! group draw, and the model split each have their own stream, so a run's
//! early rounds do not depend on how many rounds follow.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{run_ga, FitnessConfig, GaConfig, GaResult};
use crate::mask::Mask;
use crate::metrics::{compute_suite, MetricSuite};
use crate::predictor::{fit_attribution_model, fit_score_map, EbmParams};
use crate::redundancy::{coarse_filter, EmbeddingSet, RedundancyConfig};
use crate::rng::{derive_seed, keyed, StreamTag};
use crate::scorematrix;
use crate::scorematrix::{stratified_split, ModelSplit, ScoreMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub n_strata: usize,
    pub val_fraction_of_train: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { test_fraction: 0.1, n_strata: 10, val_fraction_of_train: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Final subset size.
    pub k: usize,
    pub rounds_max: usize,
    /// Fraction of the pool each group keeps (alpha).
    pub retention_ratio: f64,
    /// Softmax temperature for attribution-biased group initialization
    /// (beta). Large values flatten the bias toward uniform.
    pub sampling_temperature: f64,
    pub ga: GaConfig,
    /// Budget for the per-group searches, typically smaller than `ga`.
    pub group_ga: GaConfig,
    pub seed: u64,
}

/// Group search budget defaults to a third of the main budget.
pub fn default_group_ga(main: &GaConfig) -> GaConfig {
    GaConfig { generations: (main.generations / 3).max(1), ..main.clone() }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let ga = GaConfig::default();
        let group_ga = default_group_ga(&ga);
        PipelineConfig {
            k: 50,
            rounds_max: 5,
            retention_ratio: 0.5,
            sampling_temperature: 1.0,
            ga,
            group_ga,
            seed: 0,
        }
    }
}

/// Mean elite shape norm per pool sample. `values[j]` is `None` for samples
/// no elite selected; `coverage[j]` counts the elites containing j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub values: Vec<Option<f64>>,
    pub coverage: Vec<usize>,
}

impl AttributionVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Indicator-weighted averaging of per-elite norms: each elite contributes
/// its norm for exactly the columns it selected.
fn average_norms(per_elite: &[(Vec<usize>, Vec<f64>)], m: usize) -> AttributionVector {
    let mut sums = vec![0.0; m];
    let mut coverage = vec![0usize; m];
    for (cols, norms) in per_elite {
        for (&j, &norm) in cols.iter().zip(norms) {
            sums[j] += norm;
            coverage[j] += 1;
        }
    }
    let values = sums
        .iter()
        .zip(&coverage)
        .map(|(&s, &c)| if c > 0 { Some(s / c as f64) } else { None })
        .collect();
    AttributionVector { values, coverage }
}

/// Fits one attribution model per elite mask on the fit-split rows, then
/// averages each sample's shape norms over the elites that selected it.
pub fn aggregate_attribution(
    elites: &[Mask],
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
) -> Result<AttributionVector> {
    if elites.is_empty() {
        return Err(Error::Degenerate("no elite masks to attribute from".into()));
    }
    if split.fit_indices.is_empty() {
        return Err(Error::Degenerate("no fit models for attribution".into()));
    }
    let params = EbmParams::default();
    let mut per_elite = Vec::with_capacity(elites.len());
    for mask in elites {
        if mask.len() != matrix.n_samples() {
            return Err(Error::DimensionMismatch(format!(
                "elite mask over {} columns, pool matrix has {}",
                mask.len(),
                matrix.n_samples()
            )));
        }
        let cols = mask.ones();
        let features: Vec<Vec<u8>> = cols
            .iter()
            .map(|&c| split.fit_indices.iter().map(|&r| matrix.cell(r, c)).collect())
            .collect();
        let targets: Vec<f64> = split.fit_indices.iter().map(|&r| y[r]).collect();
        let ids: Vec<String> = cols.iter().map(|&c| matrix.sample_ids()[c].clone()).collect();
        let model = fit_attribution_model(&features, &targets, ids, &params)?;
        per_elite.push((cols, model.shape_norms));
    }
    Ok(average_norms(&per_elite, matrix.n_samples()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    High,
    Low,
    Rand,
}

impl GroupKind {
    fn stream_index(self) -> u64 {
        match self {
            GroupKind::High => 0,
            GroupKind::Low => 1,
            GroupKind::Rand => 2,
        }
    }
}

/// The three candidate pools of one refinement step, as positions into the
/// current pool, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriPartition {
    pub high: Vec<usize>,
    pub low: Vec<usize>,
    pub rand: Vec<usize>,
    pub q: usize,
}

/// Splits the pool into the q highest-attribution samples, the q lowest,
/// and q drawn uniformly at random (overlap allowed), q = ceil(alpha*pool).
/// Uncovered samples order below every covered one for the high group and
/// above every covered one for the low group; ties fall back to index order.
pub fn tri_partition<R: rand::Rng>(
    attr: &AttributionVector,
    alpha: f64,
    k: usize,
    rng: &mut R,
) -> Result<TriPartition> {
    let m = attr.len();
    if m == 0 {
        return Err(Error::Degenerate("empty attribution vector".into()));
    }
    let q = (alpha * m as f64).ceil() as usize;
    if q < k {
        return Err(Error::Infeasible(format!(
            "retention keeps {q} of {m} samples, below the subset size {k}"
        )));
    }
    let q = q.min(m);

    let mut high_order: Vec<usize> = (0..m).collect();
    high_order.sort_by(|&a, &b| {
        match (&attr.values[a], &attr.values[b]) {
            (Some(x), Some(y)) => y.total_cmp(x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then(a.cmp(&b))
    });
    let mut low_order: Vec<usize> = (0..m).collect();
    low_order.sort_by(|&a, &b| {
        match (&attr.values[a], &attr.values[b]) {
            (Some(x), Some(y)) => x.total_cmp(y),
            (Some(_), None) => std::cmp::Ordering::Greater,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then(a.cmp(&b))
    });

    let mut high: Vec<usize> = high_order[..q].to_vec();
    let mut low: Vec<usize> = low_order[..q].to_vec();
    high.sort_unstable();
    low.sort_unstable();
    let mut rand_group = rand::seq::index::sample(rng, m, q).into_vec();
    rand_group.sort_unstable();

    Ok(TriPartition { high, low, rand: rand_group, q })
}

/// Initial-population weights for one group: softmax of the members'
/// attributions at temperature beta. Uncovered members weigh as much as the
/// group's weakest covered one; a fully uncovered group is uniform.
pub fn group_init_bias(attr: &AttributionVector, group: &[usize], beta: f64) -> Vec<f64> {
    let covered: Vec<f64> = group
        .iter()
        .filter_map(|&j| attr.values[j])
        .collect();
    let Some(max_a) = covered.iter().copied().reduce(f64::max) else {
        return vec![1.0; group.len()];
    };
    let weight = |a: f64| ((a - max_a) / beta).exp();
    let min_weight = covered.iter().copied().map(weight).fold(f64::INFINITY, f64::min);
    group
        .iter()
        .map(|&j| attr.values[j].map_or(min_weight, weight))
        .collect()
}

/// Plain-seed derivation for the round-r main search.
pub fn main_ga_seed(seed: u64, round: usize) -> u64 {
    derive_seed(seed, StreamTag::MainGa, round as u64, 0)
}

/// Plain-seed derivation for a round-r group search.
pub fn group_ga_seed(seed: u64, round: usize, group: GroupKind) -> u64 {
    derive_seed(seed, StreamTag::GroupGa, round as u64, group.stream_index())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupErrors {
    pub high: f64,
    pub low: f64,
    pub rand: f64,
}

/// Lowest group error; ties prefer high, then low, then rand.
fn choose_group(errors: &GroupErrors) -> GroupKind {
    let mut best = GroupKind::High;
    let mut err = errors.high;
    if errors.low < err {
        best = GroupKind::Low;
        err = errors.low;
    }
    if errors.rand < err {
        best = GroupKind::Rand;
    }
    best
}

struct GroupPhase {
    partition: TriPartition,
    results: [GaResult; 3],
    errors: GroupErrors,
    chosen: GroupKind,
    /// Positions into the round's pool.
    next_pool_positions: Vec<usize>,
}

fn main_ga_on_pool(
    working: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    pool: &[usize],
    cfg: &PipelineConfig,
    round: usize,
) -> Result<GaResult> {
    let sub = working.select_columns(pool)?;
    let ga_cfg = GaConfig {
        seed: main_ga_seed(cfg.seed, round),
        init_bias: None,
        ..cfg.ga.clone()
    };
    run_ga(&sub, y, split, cfg.k, &ga_cfg)
}

fn group_phase(
    working: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    pool: &[usize],
    attr: &AttributionVector,
    cfg: &PipelineConfig,
    round: usize,
) -> Result<GroupPhase> {
    let sub = working.select_columns(pool)?;
    let mut rng = keyed(cfg.seed, StreamTag::RandomGroup, round as u64, 0);
    let partition = tri_partition(attr, cfg.retention_ratio, cfg.k, &mut rng)?;

    let run_group = |group: &[usize], kind: GroupKind| -> Result<GaResult> {
        let subsub = sub.select_columns(group)?;
        let ga_cfg = GaConfig {
            seed: group_ga_seed(cfg.seed, round, kind),
            init_bias: Some(group_init_bias(attr, group, cfg.sampling_temperature)),
            ..cfg.group_ga.clone()
        };
        run_ga(&subsub, y, split, cfg.k, &ga_cfg)
    };
    let high = run_group(&partition.high, GroupKind::High)?;
    let low = run_group(&partition.low, GroupKind::Low)?;
    let rand = run_group(&partition.rand, GroupKind::Rand)?;

    let errors = GroupErrors {
        high: high.best_error,
        low: low.best_error,
        rand: rand.best_error,
    };
    let chosen = choose_group(&errors);
    let next_pool_positions = match chosen {
        GroupKind::High => partition.high.clone(),
        GroupKind::Low => partition.low.clone(),
        GroupKind::Rand => partition.rand.clone(),
    };
    Ok(GroupPhase { partition, results: [high, low, rand], errors, chosen, next_pool_positions })
}

/// One full refinement round on `pool` (positions into `working`): main
/// search, attribution, tri-partition, the three group searches. Returns the
/// main result, the winning group tag, and the new pool in `working` terms.
/// Callers that only want the main search (final round, tiny pool) should
/// call the search directly instead.
pub fn run_round(
    working: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    pool: &[usize],
    cfg: &PipelineConfig,
    round: usize,
) -> Result<(GaResult, GroupKind, Vec<usize>)> {
    if pool.len() <= cfg.k {
        return Err(Error::Infeasible(format!(
            "pool of {} cannot be narrowed below subset size {}",
            pool.len(),
            cfg.k
        )));
    }
    let main = main_ga_on_pool(working, y, split, pool, cfg, round)?;
    let sub = working.select_columns(pool)?;
    let attr = aggregate_attribution(&main.elites, &sub, y, split)?;
    let phase = group_phase(working, y, split, pool, &attr, cfg, round)?;
    let next_pool: Vec<usize> = phase.next_pool_positions.iter().map(|&p| pool[p]).collect();
    Ok((main, phase.chosen, next_pool))
}

/// Which search produced the reported best mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestPhase {
    pub round: usize,
    pub phase: PhaseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Main,
    GroupHigh,
    GroupLow,
    GroupRand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Pool size entering the round.
    pub pool_size: usize,
    pub main_error: f64,
    /// Smallest error any search observed this round.
    pub round_best: f64,
    /// Absent when the round ended before the group phase.
    pub group_errors: Option<GroupErrors>,
    pub chosen_group: Option<GroupKind>,
    pub pool_after: usize,
}

/// Everything quarantined from determinism checks: two reports from the same
/// inputs and seed agree everywhere except this block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub timestamp_unix: u64,
    pub threads: usize,
    pub wall_clock_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub enabled: bool,
    pub kept: usize,
    pub discarded: usize,
}

/// Validity thresholds applied to the matrix before anything else, including
/// the accuracy target. A threshold of 0.0 disables that pass.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Model rows below this accuracy are dropped.
    pub min_accuracy: f64,
    /// Sample columns below this Bernoulli variance are dropped. Any
    /// positive value removes constant columns, which the ranking filter
    /// rejects.
    pub min_variance: f64,
}

impl PreprocessConfig {
    pub fn is_active(&self) -> bool {
        self.min_accuracy > 0.0 || self.min_variance > 0.0
    }
}

/// Full settings bundle for a compression run; echoed verbatim into the
/// report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressSettings {
    pub pipeline: PipelineConfig,
    pub split: SplitConfig,
    /// `None` skips the validity pass entirely.
    pub preprocess: Option<PreprocessConfig>,
    /// `None` skips coarse filtering entirely.
    pub redundancy: Option<RedundancyConfig>,
    /// k for the NDCG@k / top-k metrics in the report.
    pub k_top: usize,
}

impl Default for CompressSettings {
    fn default() -> Self {
        CompressSettings {
            pipeline: PipelineConfig::default(),
            split: SplitConfig::default(),
            preprocess: None,
            redundancy: Some(RedundancyConfig::default()),
            k_top: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    pub meta: ReportMeta,
    pub seed: u64,
    pub k: usize,
    pub selected_sample_ids: Vec<String>,
    /// Validation error of the best mask (the tracked global best).
    pub final_error: f64,
    pub best_phase: BestPhase,
    pub filter: FilterSummary,
    pub per_round: Vec<RoundRecord>,
    /// Fidelity of the selected subset on the held-out test models.
    pub metrics: MetricSuite,
    pub config: CompressSettings,
}

/// Subset accuracies mapped through a freshly fitted score map: returns the
/// evaluated rows with their actual and predicted full-set accuracies.
/// Fitting uses the fit split; evaluation rows are the test split, or every
/// model when `all_models` is set.
pub fn predict_subset(
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    columns: &[usize],
    fitness: &FitnessConfig,
    all_models: bool,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let s = matrix.accuracy_over_columns(columns)?;
    let eval_rows: Vec<usize> = if all_models {
        (0..matrix.n_models()).collect()
    } else {
        split.test_indices.clone()
    };
    if eval_rows.len() < 2 {
        return Err(Error::Degenerate(
            "need at least two evaluation models for the metric suite".into(),
        ));
    }
    let predicted: Vec<f64> = match fitness {
        FitnessConfig::Identity => eval_rows.iter().map(|&i| s[i]).collect(),
        FitnessConfig::Spline(params) => {
            if split.fit_indices.is_empty() {
                return Err(Error::Degenerate("no fit models for the score map".into()));
            }
            let pairs: Vec<(f64, f64)> =
                split.fit_indices.iter().map(|&i| (s[i], y[i])).collect();
            let model = fit_score_map(&pairs, params)?;
            eval_rows.iter().map(|&i| model.predict(s[i])).collect()
        }
    };
    let actual: Vec<f64> = eval_rows.iter().map(|&i| y[i]).collect();
    Ok((eval_rows, actual, predicted))
}

/// `predict_subset` folded into the full metric suite.
pub fn evaluate_subset(
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    columns: &[usize],
    fitness: &FitnessConfig,
    k_top: usize,
    all_models: bool,
) -> Result<MetricSuite> {
    let (_, actual, predicted) =
        predict_subset(matrix, y, split, columns, fitness, all_models)?;
    compute_suite(&actual, &predicted, k_top)
}

struct BestTracker {
    error: f64,
    /// Columns of the working (filtered) matrix.
    columns: Vec<usize>,
    phase: BestPhase,
}

impl BestTracker {
    fn offer(&mut self, error: f64, columns: Vec<usize>, phase: BestPhase) {
        if error < self.error {
            self.error = error;
            self.columns = columns;
            self.phase = phase;
        }
    }
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// End-to-end compression: optional validity pass, optional coarse filter,
/// then up to `rounds_max` refinement rounds, then a held-out metric
/// evaluation of the best mask. The target `y` is the accuracy over the
/// preprocessed matrix (the input itself when no thresholds are set),
/// computed before any filtering. Deterministic outside the `meta` block.
pub fn compress(
    matrix: &ScoreMatrix,
    embeddings: Option<&EmbeddingSet>,
    settings: &CompressSettings,
) -> Result<CompressionReport> {
    let cfg = &settings.pipeline;
    if cfg.rounds_max == 0 {
        return Err(Error::InvalidConfig("need at least one round".into()));
    }
    if !(0.0 < cfg.retention_ratio && cfg.retention_ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "retention ratio {} outside (0, 1)",
            cfg.retention_ratio
        )));
    }
    if !(cfg.sampling_temperature > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sampling temperature {} must be positive",
            cfg.sampling_temperature
        )));
    }

    let total_start = Instant::now();
    let mut wall = BTreeMap::new();

    let cleaned;
    let matrix = match &settings.preprocess {
        Some(pre) if pre.is_active() => {
            let start = Instant::now();
            cleaned = scorematrix::preprocess(matrix, pre.min_accuracy, pre.min_variance)?;
            wall.insert("preprocess".into(), start.elapsed().as_secs_f64());
            &cleaned
        }
        _ => matrix,
    };

    let y = matrix.accuracy();

    let filter_start = Instant::now();
    let (working, filter) = match &settings.redundancy {
        Some(rcfg) => {
            let res = coarse_filter(matrix, embeddings, rcfg)?;
            let summary = FilterSummary {
                enabled: true,
                kept: res.kept_indices.len(),
                discarded: res.discarded.len(),
            };
            let working = if res.discarded.is_empty() {
                matrix.clone()
            } else {
                matrix.select_columns(&res.kept_indices)?
            };
            (working, summary)
        }
        None => (
            matrix.clone(),
            FilterSummary { enabled: false, kept: matrix.n_samples(), discarded: 0 },
        ),
    };
    wall.insert("filter".into(), filter_start.elapsed().as_secs_f64());

    if cfg.k > working.n_samples() {
        return Err(Error::Infeasible(format!(
            "subset size {} exceeds the filtered pool of {}",
            cfg.k,
            working.n_samples()
        )));
    }

    let split = stratified_split(
        &y,
        settings.split.n_strata,
        settings.split.test_fraction,
        settings.split.val_fraction_of_train,
        cfg.seed,
    )?;

    let mut pool: Vec<usize> = (0..working.n_samples()).collect();
    let mut best = BestTracker {
        error: f64::INFINITY,
        columns: Vec::new(),
        phase: BestPhase { round: 0, phase: PhaseKind::Main },
    };
    let mut per_round = Vec::new();

    for round in 0..cfg.rounds_max {
        let round_start = Instant::now();
        let pool_size = pool.len();
        let main = main_ga_on_pool(&working, &y, &split, &pool, cfg, round)?;
        best.offer(
            main.best_error,
            main.best_mask.ones().iter().map(|&p| pool[p]).collect(),
            BestPhase { round, phase: PhaseKind::Main },
        );
        let mut record = RoundRecord {
            round,
            pool_size,
            main_error: main.best_error,
            round_best: main.best_error,
            group_errors: None,
            chosen_group: None,
            pool_after: pool_size,
        };

        let last_round = round == cfg.rounds_max - 1;
        let q = (cfg.retention_ratio * pool.len() as f64).ceil() as usize;
        if pool.len() <= cfg.k || last_round || q < cfg.k {
            wall.insert(format!("round_{round}"), round_start.elapsed().as_secs_f64());
            per_round.push(record);
            break;
        }

        let sub = working.select_columns(&pool)?;
        let attr = aggregate_attribution(&main.elites, &sub, &y, &split)?;
        let phase = group_phase(&working, &y, &split, &pool, &attr, cfg, round)?;
        for (kind, result, group) in [
            (PhaseKind::GroupHigh, &phase.results[0], &phase.partition.high),
            (PhaseKind::GroupLow, &phase.results[1], &phase.partition.low),
            (PhaseKind::GroupRand, &phase.results[2], &phase.partition.rand),
        ] {
            best.offer(
                result.best_error,
                result.best_mask.ones().iter().map(|&p| pool[group[p]]).collect(),
                BestPhase { round, phase: kind },
            );
            record.round_best = record.round_best.min(result.best_error);
        }
        pool = phase.next_pool_positions.iter().map(|&p| pool[p]).collect();
        record.group_errors = Some(phase.errors);
        record.chosen_group = Some(phase.chosen);
        record.pool_after = pool.len();
        wall.insert(format!("round_{round}"), round_start.elapsed().as_secs_f64());
        per_round.push(record);
    }

    let metrics_start = Instant::now();
    let metrics = evaluate_subset(
        &working,
        &y,
        &split,
        &best.columns,
        &cfg.ga.fitness,
        settings.k_top,
        false,
    )?;
    wall.insert("metrics".into(), metrics_start.elapsed().as_secs_f64());

    let selected_sample_ids: Vec<String> = best
        .columns
        .iter()
        .map(|&c| working.sample_ids()[c].clone())
        .collect();
    wall.insert("total".into(), total_start.elapsed().as_secs_f64());

    Ok(CompressionReport {
        meta: ReportMeta {
            timestamp_unix: now_unix(),
            threads: rayon::current_num_threads(),
            wall_clock_seconds: wall,
        },
        seed: cfg.seed,
        k: cfg.k,
        selected_sample_ids,
        final_error: best.error,
        best_phase: best.phase,
        filter,
        per_round,
        metrics,
        config: settings.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Random,
    ScoreRanked,
}

/// Reference selectors: a uniform random k-subset, or the top k samples by
/// an externally supplied per-sample score (descending, ties by index).
pub fn baseline_select(
    matrix: &ScoreMatrix,
    k: usize,
    method: BaselineMethod,
    external_scores: Option<&[f64]>,
    seed: u64,
) -> Result<Mask> {
    let m = matrix.n_samples();
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "subset size {k} out of range for {m} columns"
        )));
    }
    match method {
        BaselineMethod::Random => {
            let mut rng = keyed(seed, StreamTag::Baseline, 0, 0);
            let idx = rand::seq::index::sample(&mut rng, m, k).into_vec();
            Mask::from_indices(m, &idx)
        }
        BaselineMethod::ScoreRanked => {
            let scores = external_scores.ok_or_else(|| {
                Error::Usage("score_ranked selection needs per-sample scores".into())
            })?;
            if scores.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} scores for {m} samples",
                    scores.len()
                )));
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            Mask::from_indices(m, &order[..k])
        }
    }
}

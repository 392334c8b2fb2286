//! Genetic search over fixed-size column subsets.
//!
//! Individuals are masks with exactly `k` set bits. Fitness is the negated
//! reconstruction error on the validation models: subset accuracies are
//! mapped through a score map fitted on the fit models, and the RMSE against
//! the true full-set accuracies is what the search minimizes.
//!
//! Every random decision draws from a stream keyed by (seed, role, indices),
//! so results are independent of thread count and evaluation order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::predictor::{fit_score_map, rmse, SplineParams};
use crate::rng::{keyed, StreamTag};
use crate::scorematrix::{ModelSplit, ScoreMatrix};

/// How subset accuracies are turned into predicted full-set accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessConfig {
    /// Use the subset accuracy directly. Cheap; mostly for tests and
    /// diagnostics.
    Identity,
    /// Fit a score map on the fit models and predict through it.
    Spline(SplineParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    /// Top individuals copied verbatim into the next generation.
    pub elite_count: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub seed: u64,
    /// Optional per-column sampling weights for the initial population.
    /// `None` means uniform random subsets.
    pub init_bias: Option<Vec<f64>>,
    pub fitness: FitnessConfig,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            elite_count: 10,
            generations: 1000,
            tournament_size: 3,
            seed: 0,
            init_bias: None,
            fitness: FitnessConfig::Spline(SplineParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_mask: Mask,
    /// Validation RMSE of `best_mask` (the negated fitness).
    pub best_error: f64,
    /// Final-generation elites, best first.
    pub elites: Vec<Mask>,
    /// Best error of each evaluated generation, `generations` entries in
    /// total; entry 0 is the initial population. Non-increasing because
    /// elites survive.
    pub history: Vec<f64>,
}

/// Negated validation RMSE of one mask. Fit models supply the (subset
/// accuracy, full accuracy) pairs for the score map; validation models are
/// predicted through it and compared to their true accuracies.
pub fn evaluate_fitness(
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    mask: &Mask,
    fitness: &FitnessConfig,
) -> Result<f64> {
    if y.len() != matrix.n_models() {
        return Err(Error::DimensionMismatch(format!(
            "{} accuracies for {} models",
            y.len(),
            matrix.n_models()
        )));
    }
    if split.n_models() != matrix.n_models() {
        return Err(Error::DimensionMismatch(format!(
            "split covers {} models, matrix has {}",
            split.n_models(),
            matrix.n_models()
        )));
    }
    if mask.len() != matrix.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "mask over {} columns, matrix has {}",
            mask.len(),
            matrix.n_samples()
        )));
    }
    if split.fit_indices.is_empty() {
        return Err(Error::Degenerate("no fit models to fit the score map on".into()));
    }
    if split.val_indices.is_empty() {
        return Err(Error::Degenerate("no validation models to score against".into()));
    }
    let s = matrix.accuracy_over_columns(&mask.ones())?;
    let predicted: Vec<f64> = match fitness {
        FitnessConfig::Identity => split.val_indices.iter().map(|&i| s[i]).collect(),
        FitnessConfig::Spline(params) => {
            let pairs: Vec<(f64, f64)> =
                split.fit_indices.iter().map(|&i| (s[i], y[i])).collect();
            let model = fit_score_map(&pairs, params)?;
            split.val_indices.iter().map(|&i| model.predict(s[i])).collect()
        }
    };
    let actual: Vec<f64> = split.val_indices.iter().map(|&i| y[i]).collect();
    Ok(-rmse(&predicted, &actual)?)
}

fn validate(config: &GaConfig, m: usize, k: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "subset size {k} out of range for {m} columns"
        )));
    }
    if config.population_size < 2 {
        return Err(Error::InvalidConfig("population needs at least two individuals".into()));
    }
    if config.elite_count == 0 || config.elite_count >= config.population_size {
        return Err(Error::InvalidConfig(format!(
            "elite count {} must be in 1..population size {}",
            config.elite_count, config.population_size
        )));
    }
    if config.tournament_size < 2 || config.tournament_size > config.population_size {
        return Err(Error::InvalidConfig(format!(
            "tournament size {} must be in 2..=population size {}",
            config.tournament_size, config.population_size
        )));
    }
    if config.generations == 0 {
        return Err(Error::InvalidConfig("need at least one generation".into()));
    }
    if let Some(bias) = &config.init_bias {
        if bias.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} init weights for {m} columns",
                bias.len()
            )));
        }
        if bias.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig(
                "init weights must be finite and non-negative".into(),
            ));
        }
        if bias.iter().filter(|&&w| w > 0.0).count() < k {
            return Err(Error::InvalidConfig(format!(
                "fewer than {k} columns have positive init weight"
            )));
        }
    }
    Ok(())
}

/// Initial population: one rng stream per individual. Uniform k-subsets by
/// default; with `init_bias`, a weighted draw without replacement (each
/// column's key is ln(u)/w, the k largest win).
pub fn init_population(m: usize, k: usize, config: &GaConfig) -> Result<Vec<Mask>> {
    validate(config, m, k)?;
    let mut population = Vec::with_capacity(config.population_size);
    for i in 0..config.population_size {
        let mut rng = keyed(config.seed, StreamTag::GaInit, i as u64, 0);
        let mask = match &config.init_bias {
            None => {
                let idx = rand::seq::index::sample(&mut rng, m, k).into_vec();
                Mask::from_indices(m, &idx)?
            }
            Some(weights) => {
                let mut keyed_cols: Vec<(f64, usize)> = weights
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(j, &w)| {
                        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
                        (u.ln() / w, j)
                    })
                    .collect();
                keyed_cols.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let idx: Vec<usize> = keyed_cols[..k].iter().map(|&(_, j)| j).collect();
                Mask::from_indices(m, &idx)?
            }
        };
        population.push(mask);
    }
    Ok(population)
}

/// Highest fitness among the candidates; ties go to the lowest population
/// index.
fn tournament_winner(fitnesses: &[f64], candidates: &[usize]) -> usize {
    let mut best = candidates[0];
    for &c in &candidates[1..] {
        if fitnesses[c] > fitnesses[best] || (fitnesses[c] == fitnesses[best] && c < best) {
            best = c;
        }
    }
    best
}

fn tournament_select<R: Rng>(fitnesses: &[f64], size: usize, rng: &mut R) -> usize {
    let candidates: Vec<usize> =
        (0..size).map(|_| rng.gen_range(0..fitnesses.len())).collect();
    tournament_winner(fitnesses, &candidates)
}

/// Uniform crossover: bit j comes from `a` where the pattern is set, from
/// `b` where it is clear.
fn crossover_bits(a: &Mask, b: &Mask, pattern: &[bool]) -> Mask {
    debug_assert_eq!(a.len(), b.len(), "parents must share a column universe");
    let bits: Vec<bool> = (0..a.len())
        .map(|j| if pattern[j] { a.get(j) } else { b.get(j) })
        .collect();
    Mask::from_bits(bits)
}

fn crossover<R: Rng>(a: &Mask, b: &Mask, rng: &mut R) -> Mask {
    let pattern: Vec<bool> = (0..a.len()).map(|_| rng.gen::<bool>()).collect();
    crossover_bits(a, b, pattern.as_slice())
}

/// Flips each bit independently with probability 1/k.
fn mutate<R: Rng>(mask: &mut Mask, k: usize, rng: &mut R) {
    let p = 1.0 / k as f64;
    for j in 0..mask.len() {
        if rng.gen::<f64>() < p {
            mask.set(j, !mask.get(j));
        }
    }
}

/// Repairs the popcount back to k: clears uniformly random set bits while
/// over, sets uniformly random clear bits while under.
fn adjust<R: Rng>(mask: &mut Mask, k: usize, rng: &mut R) {
    while mask.count_ones() > k {
        let ones = mask.ones();
        let pick = ones[rng.gen_range(0..ones.len())];
        mask.set(pick, false);
    }
    while mask.count_ones() < k {
        let zeros = mask.zeros_of();
        let pick = zeros[rng.gen_range(0..zeros.len())];
        mask.set(pick, true);
    }
}

/// Population indices ordered by fitness, best first; ties go to the lower
/// index.
fn rank(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]).then(a.cmp(&b)));
    order
}

fn eval_all(
    population: &[Mask],
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    fitness: &FitnessConfig,
) -> Result<Vec<f64>> {
    population
        .par_iter()
        .map(|mask| evaluate_fitness(matrix, y, split, mask, fitness))
        .collect()
}

/// Full search loop: elitism plus tournament-selected offspring built by
/// uniform crossover, bitwise mutation and popcount repair. `generations`
/// counts evaluated populations, the randomly initialized one included, so
/// one generation means no breeding at all. Each offspring slot has its own
/// rng stream keyed by (seed, generation, slot); within one stream the draw
/// order is parent a, parent b, crossover pattern, mutation, repair. Returns
/// the best mask ever evaluated (earliest generation wins ties).
pub fn run_ga(
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    k: usize,
    config: &GaConfig,
) -> Result<GaResult> {
    let m = matrix.n_samples();
    validate(config, m, k)?;
    let mut population = init_population(m, k, config)?;
    let mut fitnesses = eval_all(&population, matrix, y, split, &config.fitness)?;

    let order = rank(&fitnesses);
    let mut best_mask = population[order[0]].clone();
    let mut best_error = -fitnesses[order[0]];
    let mut history = vec![best_error];

    for g in 1..config.generations {
        let order = rank(&fitnesses);
        let mut next: Vec<Mask> = order[..config.elite_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        let n_offspring = config.population_size - config.elite_count;
        let offspring: Vec<Mask> = (0..n_offspring)
            .map(|slot| {
                let mut rng = keyed(config.seed, StreamTag::GaOffspring, g as u64, slot as u64);
                let pa = tournament_select(&fitnesses, config.tournament_size, &mut rng);
                let pb = tournament_select(&fitnesses, config.tournament_size, &mut rng);
                let mut child = crossover(&population[pa], &population[pb], &mut rng);
                mutate(&mut child, k, &mut rng);
                adjust(&mut child, k, &mut rng);
                child
            })
            .collect();
        next.extend(offspring);
        population = next;
        fitnesses = eval_all(&population, matrix, y, split, &config.fitness)?;

        let order = rank(&fitnesses);
        let gen_best = -fitnesses[order[0]];
        history.push(gen_best);
        if gen_best < best_error {
            best_error = gen_best;
            best_mask = population[order[0]].clone();
        }
    }

    let order = rank(&fitnesses);
    let elites: Vec<Mask> = order[..config.elite_count]
        .iter()
        .map(|&i| population[i].clone())
        .collect();
    Ok(GaResult { best_mask, best_error, elites, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn matrix_from_rows(rows: &[Vec<u8>]) -> ScoreMatrix {
        let cells: Vec<u8> = rows.iter().flatten().copied().collect();
        ScoreMatrix::new(ids("m", rows.len()), ids("s", rows[0].len()), cells).unwrap()
    }

    fn random_matrix(n_models: usize, n_samples: usize, seed: u64) -> ScoreMatrix {
        let mut rng = keyed(seed, StreamTag::Synth, 0, 0);
        let rows: Vec<Vec<u8>> = (0..n_models)
            .map(|m| {
                // spread per-model success rates so accuracies differ
                let p = 0.15 + 0.7 * (m as f64 / n_models.max(2) as f64);
                (0..n_samples)
                    .map(|_| if rng.gen::<f64>() < p { 1 } else { 0 })
                    .collect()
            })
            .collect();
        matrix_from_rows(&rows)
    }

    fn three_way_split(n: usize) -> ModelSplit {
        let fit: Vec<usize> = (0..n / 2).collect();
        let val: Vec<usize> = (n / 2..(3 * n) / 4).collect();
        let test: Vec<usize> = ((3 * n) / 4..n).collect();
        ModelSplit::from_parts(fit, val, test, n, 0).unwrap()
    }

    #[test]
    fn fitness_hand_value() {
        let m = matrix_from_rows(&[
            vec![0, 0, 0, 0, 0],
            vec![1, 1, 1, 1, 1],
            vec![1, 1, 1, 1, 1],
            vec![1, 1, 1, 1, 0],
        ]);
        let y = m.accuracy();
        let split = ModelSplit::from_parts(vec![0, 1], vec![2, 3], vec![], 4, 0).unwrap();
        let mask = Mask::from_indices(5, &[0, 1]).unwrap();
        // fit pairs (0,0) and (1,1) give the identity line; validation
        // residuals are 0 and 0.2, so the error is sqrt(0.02)
        for fitness in [
            FitnessConfig::Identity,
            FitnessConfig::Spline(SplineParams::default()),
        ] {
            let f = evaluate_fitness(&m, &y, &split, &mask, &fitness).unwrap();
            assert!((f - (-0.02f64.sqrt())).abs() < 1e-12, "{fitness:?}: {f}");
        }
    }

    #[test]
    fn full_mask_reconstructs_exactly() {
        let m = random_matrix(24, 10, 11);
        let y = m.accuracy();
        let split = three_way_split(24);
        let mask = Mask::from_indices(10, &(0..10).collect::<Vec<_>>()).unwrap();
        let f = evaluate_fitness(
            &m,
            &y,
            &split,
            &mask,
            &FitnessConfig::Spline(SplineParams::default()),
        )
        .unwrap();
        assert!(f.abs() < 1e-8, "{f}");
    }

    #[test]
    fn fitness_rejects_empty_splits() {
        let m = matrix_from_rows(&[vec![1, 0], vec![0, 1]]);
        let y = m.accuracy();
        let mask = Mask::from_indices(2, &[0]).unwrap();
        let no_fit = ModelSplit::from_parts(vec![], vec![0, 1], vec![], 2, 0).unwrap();
        assert!(evaluate_fitness(&m, &y, &no_fit, &mask, &FitnessConfig::Identity).is_err());
        let no_val = ModelSplit::from_parts(vec![0, 1], vec![], vec![], 2, 0).unwrap();
        assert!(evaluate_fitness(&m, &y, &no_val, &mask, &FitnessConfig::Identity).is_err());
    }

    #[test]
    fn fitness_ignores_unselected_columns() {
        let a = matrix_from_rows(&[
            vec![1, 1, 0, 0, 1, 0],
            vec![0, 1, 1, 0, 0, 1],
            vec![1, 0, 1, 1, 0, 0],
            vec![0, 1, 0, 1, 1, 1],
        ]);
        // permute columns 0, 2, 4, 5; mask columns 1 and 3 stay in place
        let perm = [4usize, 1, 0, 3, 5, 2];
        let cells: Vec<u8> = (0..4)
            .flat_map(|m| perm.iter().map(move |&c| (m, c)))
            .map(|(m, c)| a.cell(m, c))
            .collect();
        let permuted = ScoreMatrix::new(ids("m", 4), ids("s", 6), cells).unwrap();
        let y = a.accuracy();
        let split = ModelSplit::from_parts(vec![0, 1], vec![2, 3], vec![], 4, 0).unwrap();
        let mask = Mask::from_indices(6, &[1, 3]).unwrap();
        let fa = evaluate_fitness(&a, &y, &split, &mask, &FitnessConfig::Identity).unwrap();
        let fb = evaluate_fitness(&permuted, &y, &split, &mask, &FitnessConfig::Identity).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn crossover_pattern_picks_sides() {
        let a = Mask::from_bits(vec![true, true, false, false]);
        let b = Mask::from_bits(vec![false, false, true, true]);
        let child = crossover_bits(&a, &b, &[true, false, true, false]);
        assert_eq!(child, Mask::from_bits(vec![true, false, false, true]));
    }

    #[test]
    fn tournament_tie_goes_to_lowest_index() {
        let fitnesses = [1.0, 1.0, 0.5];
        assert_eq!(tournament_winner(&fitnesses, &[2, 1, 0]), 0);
        assert_eq!(tournament_winner(&fitnesses, &[2, 1]), 1);
        assert_eq!(tournament_winner(&fitnesses, &[2, 2]), 2);
    }

    #[test]
    fn mutate_flip_rate_matches_probability() {
        let k = 4usize;
        let m = 100usize;
        let mut rng = keyed(5, StreamTag::GaOffspring, 0, 0);
        let base = Mask::from_indices(m, &[0, 1, 2, 3]).unwrap();
        let mut flips = 0usize;
        let trials = 200usize;
        for _ in 0..trials {
            let mut mask = base.clone();
            mutate(&mut mask, k, &mut rng);
            flips += (0..m).filter(|&j| mask.get(j) != base.get(j)).count();
        }
        let rate = flips as f64 / (trials * m) as f64;
        assert!((rate - 0.25).abs() < 0.01, "{rate}");
    }

    #[test]
    fn adjust_restores_popcount() {
        let mut rng = keyed(9, StreamTag::GaOffspring, 1, 0);
        let mut over = Mask::from_indices(10, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        adjust(&mut over, 4, &mut rng);
        assert_eq!(over.count_ones(), 4);
        assert!(over.ones().iter().all(|&j| j <= 6), "only clears, never sets");

        let mut under = Mask::from_indices(10, &[0, 1]).unwrap();
        adjust(&mut under, 4, &mut rng);
        assert_eq!(under.count_ones(), 4);
        assert!(under.get(0) && under.get(1), "existing bits survive");
    }

    #[test]
    fn adjust_outcomes_are_uniform() {
        // 1110 trimmed to two bits can land on 1100, 1010 or 0110; each
        // should appear about a third of the time
        let mut rng = keyed(14, StreamTag::GaOffspring, 2, 0);
        let mut counts = std::collections::BTreeMap::new();
        let trials = 3000;
        for _ in 0..trials {
            let mut m = Mask::from_bits(vec![true, true, true, false]);
            adjust(&mut m, 2, &mut rng);
            *counts.entry(m.ones()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3, "{counts:?}");
        for (ones, n) in &counts {
            let freq = *n as f64 / trials as f64;
            // standard error ~0.009
            assert!((freq - 1.0 / 3.0).abs() < 0.035, "{ones:?}: {freq}");
        }

        // growing an empty mask reaches every 2-subset of 4 columns
        let mut grown = std::collections::BTreeSet::new();
        for _ in 0..200 {
            let mut m = Mask::zeros(4);
            adjust(&mut m, 2, &mut rng);
            grown.insert(m.ones());
        }
        assert_eq!(grown.len(), 6);
    }

    #[test]
    fn single_generation_run_reports_the_initial_population() {
        let matrix = random_matrix(12, 15, 4);
        let y = matrix.accuracy();
        let split = three_way_split(12);
        let config = GaConfig {
            population_size: 10,
            elite_count: 2,
            generations: 1,
            seed: 42,
            fitness: FitnessConfig::Identity,
            ..Default::default()
        };
        let result = run_ga(&matrix, &y, &split, 4, &config).unwrap();
        let init = init_population(15, 4, &config).unwrap();
        let best_init = init
            .iter()
            .map(|m| -evaluate_fitness(&matrix, &y, &split, m, &config.fitness).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.best_error, best_init);
        assert_eq!(result.history, vec![best_init]);
    }

    #[test]
    fn uniform_init_hits_expected_column_frequency() {
        let config = GaConfig { population_size: 5000, seed: 21, ..Default::default() };
        let pop = init_population(30, 10, &config).unwrap();
        for j in 0..30 {
            let freq = pop.iter().filter(|m| m.get(j)).count() as f64 / 5000.0;
            // expected 1/3, standard error ~0.0067; 0.03 is ~4.5 sigma
            assert!((freq - 1.0 / 3.0).abs() < 0.03, "column {j}: {freq}");
        }
        for mask in &pop {
            assert_eq!(mask.count_ones(), 10);
        }

        // tiny-universe variant: k=1 over three columns
        let config = GaConfig { population_size: 10000, seed: 22, ..Default::default() };
        let pop = init_population(3, 1, &config).unwrap();
        for j in 0..3 {
            let freq = pop.iter().filter(|m| m.get(j)).count() as f64 / 10000.0;
            assert!((freq - 1.0 / 3.0).abs() < 0.02, "column {j}: {freq}");
        }
    }

    #[test]
    fn biased_init_respects_weights() {
        let bias = vec![1.0, 1.0, 0.0, 0.0, 0.0, 1e6];
        let config = GaConfig {
            population_size: 500,
            seed: 3,
            init_bias: Some(bias),
            ..Default::default()
        };
        let pop = init_population(6, 2, &config).unwrap();
        let freq =
            |j: usize| pop.iter().filter(|m| m.get(j)).count() as f64 / pop.len() as f64;
        assert!(freq(5) > 0.99, "heavy column almost always drawn: {}", freq(5));
        for j in 2..5 {
            assert_eq!(freq(j), 0.0, "zero-weight column {j} never drawn");
        }
    }

    #[test]
    fn biased_init_with_exactly_k_positive_weights_is_forced() {
        let bias = vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let config = GaConfig {
            population_size: 50,
            seed: 8,
            init_bias: Some(bias),
            ..Default::default()
        };
        let pop = init_population(6, 2, &config).unwrap();
        for mask in pop {
            assert_eq!(mask.ones(), vec![0, 4]);
        }
    }

    #[test]
    fn biased_init_needs_enough_positive_weights() {
        let config = GaConfig {
            init_bias: Some(vec![1.0, 0.0, 0.0, 0.0]),
            ..Default::default()
        };
        assert!(matches!(
            init_population(4, 2, &config),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn ga_finds_brute_force_optimum_on_small_instance() {
        let matrix = random_matrix(20, 12, 42);
        let y = matrix.accuracy();
        let split = three_way_split(20);
        let fitness = FitnessConfig::Identity;

        let mut brute_best = f64::INFINITY;
        for combo in (0..12).combinations(4) {
            let mask = Mask::from_indices(12, &combo).unwrap();
            let err = -evaluate_fitness(&matrix, &y, &split, &mask, &fitness).unwrap();
            if err < brute_best {
                brute_best = err;
            }
        }

        let config = GaConfig {
            population_size: 40,
            elite_count: 6,
            generations: 60,
            seed: 7,
            fitness,
            ..Default::default()
        };
        let result = run_ga(&matrix, &y, &split, 4, &config).unwrap();
        assert_eq!(result.best_mask.count_ones(), 4);
        assert!(
            (result.best_error - brute_best).abs() < 1e-12,
            "ga {} vs brute force {brute_best}",
            result.best_error
        );
    }

    #[test]
    fn ga_is_deterministic_and_history_is_monotone() {
        // search space large enough (C(40,5)) that different seeds cannot
        // both start at the optimum
        let matrix = random_matrix(16, 40, 13);
        let y = matrix.accuracy();
        let split = three_way_split(16);
        let config = GaConfig {
            population_size: 12,
            elite_count: 4,
            generations: 8,
            seed: 99,
            fitness: FitnessConfig::Identity,
            ..Default::default()
        };
        let a = run_ga(&matrix, &y, &split, 5, &config).unwrap();
        let b = run_ga(&matrix, &y, &split, 5, &config).unwrap();
        assert_eq!(a, b);

        assert_eq!(a.history.len(), config.generations);
        for w in a.history.windows(2) {
            assert!(w[1] <= w[0], "history must not regress: {:?}", a.history);
        }
        assert_eq!(a.best_error, *a.history.last().unwrap());
        assert_eq!(a.elites.len(), config.elite_count);
        for e in &a.elites {
            assert_eq!(e.count_ones(), 5);
        }

        let other = GaConfig { seed: 100, ..config };
        let c = run_ga(&matrix, &y, &split, 5, &other).unwrap();
        assert_ne!(a.history, c.history, "different seeds should explore differently");
    }

    #[test]
    fn config_validation_catches_bad_shapes() {
        let matrix = random_matrix(8, 6, 1);
        let y = matrix.accuracy();
        let split = three_way_split(8);
        let bad_k = GaConfig { fitness: FitnessConfig::Identity, ..Default::default() };
        assert!(run_ga(&matrix, &y, &split, 0, &bad_k).is_err());
        assert!(run_ga(&matrix, &y, &split, 7, &bad_k).is_err());
        let bad_elite = GaConfig {
            population_size: 10,
            elite_count: 11,
            fitness: FitnessConfig::Identity,
            ..Default::default()
        };
        assert!(run_ga(&matrix, &y, &split, 2, &bad_elite).is_err());
    }
}

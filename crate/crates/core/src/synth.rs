//! Synthetic score matrices with known structure.
//!
//! Models get latent skills, samples get latent difficulties, and each cell
//! is a Bernoulli draw with success probability sigmoid(skill - difficulty).
//! Optional duplicate groups append noisy copies of chosen base columns,
//! which gives redundancy-filter tests a planted ground truth. Matching
//! embeddings are generated so the text signal agrees with the planted
//! duplicates.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{evaluate_fitness, FitnessConfig};
use crate::mask::Mask;
use crate::redundancy::EmbeddingSet;
use crate::rng::{keyed, StreamTag};
use crate::scorematrix::{ModelSplit, ScoreMatrix};

/// A planted group of near-duplicate columns: `copies` noisy clones of the
/// base column at `source_index`, each cell flipped independently with
/// `flip_probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    pub source_index: usize,
    pub copies: usize,
    pub flip_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_models: usize,
    pub n_samples: usize,
    pub skill_mean: f64,
    pub skill_spread: f64,
    pub difficulty_mean: f64,
    pub difficulty_spread: f64,
    #[serde(default)]
    pub duplicate_groups: Vec<DuplicateGroup>,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_models: 50,
            n_samples: 200,
            skill_mean: 0.0,
            skill_spread: 1.0,
            difficulty_mean: 0.0,
            difficulty_spread: 1.0,
            duplicate_groups: Vec::new(),
            embedding_dim: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub matrix: ScoreMatrix,
    pub embeddings: EmbeddingSet,
    /// copy sample id -> source sample id
    pub duplicate_map: BTreeMap<String, String>,
    pub skills: Vec<f64>,
    pub difficulties: Vec<f64>,
}

// rng sub-stream roles within StreamTag::Synth
const ROLE_SKILLS: u64 = 0;
const ROLE_DIFFICULTIES: u64 = 1;
const ROLE_CELLS: u64 = 2;
const ROLE_DUPES: u64 = 3;
const ROLE_EMBEDDINGS: u64 = 4;

/// One standard normal draw (Box-Muller).
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn validate(spec: &SynthSpec) -> Result<()> {
    if spec.n_models == 0 || spec.n_samples == 0 {
        return Err(Error::InvalidConfig("need at least one model and one sample".into()));
    }
    if spec.embedding_dim == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
    }
    for v in [spec.skill_mean, spec.skill_spread, spec.difficulty_mean, spec.difficulty_spread] {
        if !v.is_finite() {
            return Err(Error::InvalidConfig("skill/difficulty parameters must be finite".into()));
        }
    }
    if spec.skill_spread < 0.0 || spec.difficulty_spread < 0.0 {
        return Err(Error::InvalidConfig("spreads must be non-negative".into()));
    }
    for g in &spec.duplicate_groups {
        if g.source_index >= spec.n_samples {
            return Err(Error::IndexOutOfRange {
                what: "duplicate source column",
                index: g.source_index,
                len: spec.n_samples,
            });
        }
        if g.copies == 0 {
            return Err(Error::InvalidConfig("duplicate group with zero copies".into()));
        }
        if !(0.0..=1.0).contains(&g.flip_probability) {
            return Err(Error::InvalidConfig(format!(
                "flip probability {} outside [0, 1]",
                g.flip_probability
            )));
        }
    }
    Ok(())
}

fn stream(spec: &SynthSpec, role: u64, index: u64) -> ChaCha8Rng {
    keyed(spec.seed, StreamTag::Synth, role, index)
}

/// Generates the matrix, embeddings and duplicate map for a `SynthSpec`.
/// Deterministic in `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    validate(spec)?;

    let mut rng = stream(spec, ROLE_SKILLS, 0);
    let skills: Vec<f64> = (0..spec.n_models)
        .map(|_| spec.skill_mean + spec.skill_spread * normal(&mut rng))
        .collect();
    let mut rng = stream(spec, ROLE_DIFFICULTIES, 0);
    let difficulties: Vec<f64> = (0..spec.n_samples)
        .map(|_| spec.difficulty_mean + spec.difficulty_spread * normal(&mut rng))
        .collect();

    // base columns, one cell stream per column so layout changes stay local
    let mut columns: Vec<Vec<u8>> = Vec::new();
    for j in 0..spec.n_samples {
        let mut rng = stream(spec, ROLE_CELLS, j as u64);
        let col: Vec<u8> = (0..spec.n_models)
            .map(|i| u8::from(rng.gen::<f64>() < sigmoid(skills[i] - difficulties[j])))
            .collect();
        columns.push(col);
    }
    let mut sample_ids: Vec<String> = (0..spec.n_samples).map(|j| format!("s{j}")).collect();

    let mut duplicate_map = BTreeMap::new();
    for (gi, group) in spec.duplicate_groups.iter().enumerate() {
        let mut rng = stream(spec, ROLE_DUPES, gi as u64);
        for c in 1..=group.copies {
            let mut col = columns[group.source_index].clone();
            for cell in &mut col {
                if rng.gen::<f64>() < group.flip_probability {
                    *cell = 1 - *cell;
                }
            }
            let source_id = format!("s{}", group.source_index);
            let copy_id = format!("{source_id}_dup{c}");
            duplicate_map.insert(copy_id.clone(), source_id);
            sample_ids.push(copy_id);
            columns.push(col);
        }
    }

    let n_total = columns.len();
    let mut cells = Vec::with_capacity(spec.n_models * n_total);
    for i in 0..spec.n_models {
        for col in &columns {
            cells.push(col[i]);
        }
    }
    let model_ids: Vec<String> = (0..spec.n_models).map(|i| format!("m{i}")).collect();
    let matrix = ScoreMatrix::new(model_ids, sample_ids.clone(), cells)?;

    // base embeddings are random directions; copies sit near their source,
    // displaced proportionally to the flip probability
    let mut base_emb: Vec<Vec<f64>> = Vec::with_capacity(spec.n_samples);
    for j in 0..spec.n_samples {
        let mut rng = stream(spec, ROLE_EMBEDDINGS, j as u64);
        base_emb.push((0..spec.embedding_dim).map(|_| normal(&mut rng)).collect());
    }
    let mut emb_rows: Vec<Vec<f64>> = base_emb.clone();
    for (gi, group) in spec.duplicate_groups.iter().enumerate() {
        let mut rng = stream(spec, ROLE_EMBEDDINGS, (spec.n_samples + gi) as u64);
        for _ in 0..group.copies {
            let row: Vec<f64> = base_emb[group.source_index]
                .iter()
                .map(|&v| v + group.flip_probability * normal(&mut rng))
                .collect();
            emb_rows.push(row);
        }
    }
    let data: Vec<f64> = emb_rows.into_iter().flatten().collect();
    let embeddings = EmbeddingSet::new(sample_ids, spec.embedding_dim, data)?;

    Ok(SynthOutput { matrix, embeddings, duplicate_map, skills, difficulties })
}

/// Number of k-subsets of m columns, capped so the guard below cannot
/// overflow.
fn subset_count(m: usize, k: usize, cap: u128) -> u128 {
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (m - i) as u128 / (i + 1) as u128;
        if c > cap {
            return cap + 1;
        }
    }
    c
}

/// Exhaustive search over every k-subset, same fitness as the genetic
/// search. Ties go to the lexicographically smallest index set. Refuses
/// instances with more than `max_subsets` candidates (default guard 1e6).
pub fn brute_force_best_subset(
    matrix: &ScoreMatrix,
    y: &[f64],
    split: &ModelSplit,
    k: usize,
    fitness: &FitnessConfig,
    max_subsets: Option<u64>,
) -> Result<(Mask, f64)> {
    let m = matrix.n_samples();
    if k == 0 || k > m {
        return Err(Error::InvalidConfig(format!(
            "subset size {k} out of range for {m} columns"
        )));
    }
    let cap = max_subsets.unwrap_or(1_000_000) as u128;
    let count = subset_count(m, k, cap);
    if count > cap {
        return Err(Error::Infeasible(format!(
            "choose({m}, {k}) exceeds the {cap}-subset brute force budget"
        )));
    }

    use itertools::Itertools;
    let mut best: Option<(Mask, f64)> = None;
    for combo in (0..m).combinations(k) {
        let mask = Mask::from_indices(m, &combo)?;
        let err = -evaluate_fitness(matrix, y, split, &mask, fitness)?;
        match &best {
            Some((_, e)) if err >= *e => {}
            _ => best = Some((mask, err)),
        }
    }
    best.ok_or_else(|| Error::EmptyResult("no subsets enumerated".into()))
}

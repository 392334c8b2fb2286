//! Coarse redundancy filtering over benchmark samples.
//!
//! Two redundancy signals: text similarity (inner products of normalized
//! sample embeddings) and ranking similarity (correlation between the
//! samples' binary score columns). The filter makes one keep-first pass and
//! discards any sample too similar to an already-kept one.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ranks_desc;
use crate::scorematrix::ScoreMatrix;

/// Sample embeddings, L2-normalized on load so the inner product of two rows
/// is their cosine similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    sample_ids: Vec<String>,
    dim: usize,
    /// Row-major, `sample_ids.len() * dim` values.
    data: Vec<f64>,
}

impl EmbeddingSet {
    /// Builds a set from raw rows and normalizes each to unit length.
    pub fn new(sample_ids: Vec<String>, dim: usize, mut data: Vec<f64>) -> Result<Self> {
        if sample_ids.is_empty() {
            return Err(Error::Degenerate("no embedding rows".into()));
        }
        if dim == 0 {
            return Err(Error::Degenerate("embedding dimension is zero".into()));
        }
        if data.len() != sample_ids.len() * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} rows of dimension {dim}",
                data.len(),
                sample_ids.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId { kind: "sample", id: id.clone() });
            }
        }
        for (r, id) in sample_ids.iter().enumerate() {
            let row = &mut data[r * dim..(r + 1) * dim];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::Degenerate(format!(
                    "embedding for `{id}` cannot be normalized (norm {norm})"
                )));
            }
            for v in row {
                *v /= norm;
            }
        }
        Ok(EmbeddingSet { sample_ids, dim, data })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Reorders rows to match `ids`. Errors when the id sets differ.
    pub fn align_to(&self, ids: &[String]) -> Result<EmbeddingSet> {
        if ids.len() != self.sample_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} embeddings vs {} samples",
                self.sample_ids.len(),
                ids.len()
            )));
        }
        let pos: HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for id in ids {
            let &i = pos.get(id.as_str()).ok_or_else(|| {
                Error::DimensionMismatch(format!("no embedding for sample `{id}`"))
            })?;
            data.extend_from_slice(self.row(i));
        }
        Ok(EmbeddingSet { sample_ids: ids.to_vec(), dim: self.dim, data })
    }
}

/// Loads embeddings from CSV rows of the form `sample_id,v0,v1,...` (no
/// header). Rows are normalized.
pub fn load_embeddings_csv<R: Read>(reader: R) -> Result<EmbeddingSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut sample_ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                field: rec.len(),
                msg: "embedding row needs an id plus at least one value".into(),
            });
        }
        if dim == 0 {
            dim = rec.len() - 1;
        } else if rec.len() - 1 != dim {
            return Err(Error::Parse {
                line,
                field: rec.len(),
                msg: format!("expected {dim} embedding values, found {}", rec.len() - 1),
            });
        }
        sample_ids.push(rec.get(0).unwrap_or("").to_owned());
        for (f, raw) in rec.iter().skip(1).enumerate() {
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                field: f + 2,
                msg: format!("not a float: `{raw}`"),
            })?;
            data.push(v);
        }
    }
    EmbeddingSet::new(sample_ids, dim, data)
}

pub fn load_embeddings_csv_path(path: &Path) -> Result<EmbeddingSet> {
    load_embeddings_csv(std::fs::File::open(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingSidecar {
    sample_ids: Vec<String>,
    dim: usize,
}

/// Loads embeddings from a raw little-endian f32 file plus a JSON sidecar
/// (`{"sample_ids": [...], "dim": d}`) that fixes row order and width.
pub fn load_embeddings_raw(bin_path: &Path, sidecar_path: &Path) -> Result<EmbeddingSet> {
    let sidecar: EmbeddingSidecar =
        serde_json::from_reader(std::fs::File::open(sidecar_path)?)?;
    let bytes = std::fs::read(bin_path)?;
    let expected = sidecar.sample_ids.len() * sidecar.dim * 4;
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "raw embedding file holds {} bytes, sidecar implies {expected}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    EmbeddingSet::new(sidecar.sample_ids, sidecar.dim, data)
}

/// Writes the raw + sidecar pair `load_embeddings_raw` reads.
pub fn save_embeddings_raw(emb: &EmbeddingSet, bin_path: &Path, sidecar_path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(emb.data.len() * 4);
    for v in &emb.data {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    std::fs::write(bin_path, bytes)?;
    let sidecar = EmbeddingSidecar { sample_ids: emb.sample_ids.clone(), dim: emb.dim };
    serde_json::to_writer_pretty(std::fs::File::create(sidecar_path)?, &sidecar)?;
    Ok(())
}

/// Writes embeddings as `sample_id,v0,v1,...` CSV rows.
pub fn save_embeddings_csv<W: std::io::Write>(emb: &EmbeddingSet, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (i, id) in emb.sample_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(emb.row(i).iter().map(|v| format!("{v}")));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Correlation flavor for ranking redundancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingCorrelation {
    Pearson,
    Spearman,
    RSquared,
}

/// Which earlier samples a candidate is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerScope {
    /// Compare only against samples that survived so far (default).
    KeptOnly,
    /// Compare against every earlier sample, kept or discarded.
    AllEarlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyConfig {
    /// Discard when text similarity exceeds this. Values >= 1.0 disable the
    /// text check.
    pub tau_text: f64,
    /// Discard when |ranking correlation| exceeds this. Values >= 1.0
    /// disable the ranking check.
    pub tau_ranking: f64,
    pub correlation: RankingCorrelation,
    pub trigger_scope: TriggerScope,
}

impl Default for RedundancyConfig {
    fn default() -> Self {
        RedundancyConfig {
            tau_text: 0.95,
            tau_ranking: 0.95,
            correlation: RankingCorrelation::Pearson,
            trigger_scope: TriggerScope::KeptOnly,
        }
    }
}

impl RedundancyConfig {
    /// True when neither threshold can ever fire (correlations and cosine
    /// similarities never exceed 1).
    pub fn is_vacuous(&self, has_embeddings: bool) -> bool {
        self.tau_ranking >= 1.0 && (!has_embeddings || self.tau_text >= 1.0)
    }
}

/// Inner product of two embedding rows; rows are unit length, so this is
/// their cosine similarity.
pub fn text_pair_redundancy(emb: &EmbeddingSet, i: usize, j: usize) -> Result<f64> {
    let n = emb.len();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { what: "embedding row", index: idx, len: n });
        }
    }
    Ok(emb.row(i).iter().zip(emb.row(j)).map(|(a, b)| a * b).sum())
}

/// Mean text similarity of sample `i` to every other sample.
pub fn text_sample_redundancy(emb: &EmbeddingSet, i: usize) -> Result<f64> {
    let n = emb.len();
    if n < 2 {
        return Err(Error::Degenerate("need at least two samples".into()));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { what: "embedding row", index: i, len: n });
    }
    let mut sum = 0.0;
    for j in 0..n {
        if j != i {
            sum += text_pair_redundancy(emb, i, j)?;
        }
    }
    Ok(sum / (n - 1) as f64)
}

/// Mean of `text_sample_redundancy` over all samples.
pub fn text_dataset_redundancy(emb: &EmbeddingSet) -> Result<f64> {
    let n = emb.len();
    if n < 2 {
        return Err(Error::Degenerate("need at least two samples".into()));
    }
    let mut sum = 0.0;
    for i in 0..n {
        sum += text_sample_redundancy(emb, i)?;
    }
    Ok(sum / n as f64)
}

fn column_f64(matrix: &ScoreMatrix, j: usize) -> Vec<f64> {
    (0..matrix.n_models()).map(|m| matrix.cell(m, j) as f64).collect()
}

fn pearson_or_zero_variance(matrix: &ScoreMatrix, i: usize, j: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    crate::metrics::pearson(x, y).map_err(|e| match e {
        Error::Degenerate(msg) if msg.contains("zero variance") => {
            // name whichever column is constant
            let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
            let id = if constant(x) { i } else { j };
            Error::ZeroVariance(matrix.sample_ids()[id].clone())
        }
        other => other,
    })
}

/// Correlation between the score columns of samples `i` and `j`.
pub fn ranking_pair_redundancy(
    matrix: &ScoreMatrix,
    i: usize,
    j: usize,
    correlation: RankingCorrelation,
) -> Result<f64> {
    let n = matrix.n_samples();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { what: "sample column", index: idx, len: n });
        }
    }
    let x = column_f64(matrix, i);
    let y = column_f64(matrix, j);
    match correlation {
        RankingCorrelation::Pearson => pearson_or_zero_variance(matrix, i, j, &x, &y),
        RankingCorrelation::Spearman => {
            let rx = ranks_desc(&x);
            let ry = ranks_desc(&y);
            pearson_or_zero_variance(matrix, i, j, &rx, &ry)
        }
        RankingCorrelation::RSquared => {
            pearson_or_zero_variance(matrix, i, j, &x, &y).map(|r| r * r)
        }
    }
}

/// Mean |correlation| of sample `i`'s column against every other column.
pub fn ranking_sample_redundancy(
    matrix: &ScoreMatrix,
    i: usize,
    correlation: RankingCorrelation,
) -> Result<f64> {
    let n = matrix.n_samples();
    if n < 2 {
        return Err(Error::Degenerate("need at least two samples".into()));
    }
    if i >= n {
        return Err(Error::IndexOutOfRange { what: "sample column", index: i, len: n });
    }
    let mut sum = 0.0;
    for j in 0..n {
        if j != i {
            sum += ranking_pair_redundancy(matrix, i, j, correlation)?.abs();
        }
    }
    Ok(sum / (n - 1) as f64)
}

/// Mean of `ranking_sample_redundancy` over all samples.
pub fn ranking_dataset_redundancy(
    matrix: &ScoreMatrix,
    correlation: RankingCorrelation,
) -> Result<f64> {
    let n = matrix.n_samples();
    if n < 2 {
        return Err(Error::Degenerate("need at least two samples".into()));
    }
    let mut sum = 0.0;
    for i in 0..n {
        sum += ranking_sample_redundancy(matrix, i, correlation)?;
    }
    Ok(sum / n as f64)
}

/// Why a sample was discarded and which earlier sample triggered it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discard {
    pub reason: DiscardReason,
    pub trigger: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    Text,
    Ranking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub kept_sample_ids: Vec<String>,
    /// Positions of the kept samples in the input matrix.
    pub kept_indices: Vec<usize>,
    pub discarded: BTreeMap<String, Discard>,
    pub config: RedundancyConfig,
}

/// Per-column ranking stats packed for O(words) pairwise correlation: the
/// column as a bitset over models plus its popcount.
struct ColumnStats {
    bits: Vec<u64>,
    ones: u32,
}

fn column_stats(matrix: &ScoreMatrix) -> Vec<ColumnStats> {
    let n_models = matrix.n_models();
    let words = n_models.div_ceil(64);
    (0..matrix.n_samples())
        .map(|j| {
            let mut bits = vec![0u64; words];
            let mut ones = 0u32;
            for m in 0..n_models {
                if matrix.cell(m, j) == 1 {
                    bits[m / 64] |= 1 << (m % 64);
                    ones += 1;
                }
            }
            ColumnStats { bits, ones }
        })
        .collect()
}

/// Pearson correlation of two binary columns from co-occurrence counts.
/// Exact because every term is integer until the final division.
fn binary_pearson(a: &ColumnStats, b: &ColumnStats, n_models: usize) -> Option<f64> {
    let n = n_models as i64;
    let sa = a.ones as i64;
    let sb = b.ones as i64;
    let da = n * sa - sa * sa;
    let db = n * sb - sb * sb;
    if da == 0 || db == 0 {
        return None;
    }
    let c11: i64 = a
        .bits
        .iter()
        .zip(&b.bits)
        .map(|(x, y)| (x & y).count_ones() as i64)
        .sum();
    Some((n * c11 - sa * sb) as f64 / ((da as f64) * (db as f64)).sqrt())
}

/// One keep-first pass over the samples in matrix order. Sample i survives
/// unless some comparison sample j < i has text similarity above `tau_text`
/// (checked first, only when embeddings are given) or |ranking correlation|
/// above `tau_ranking`. The comparison set is controlled by
/// `config.trigger_scope`. Ranking correlation of a zero-variance column is
/// undefined and surfaces as a `ZeroVariance` error; run `preprocess` first.
pub fn coarse_filter(
    matrix: &ScoreMatrix,
    embeddings: Option<&EmbeddingSet>,
    config: &RedundancyConfig,
) -> Result<FilterResult> {
    let n = matrix.n_samples();
    let emb = match embeddings {
        Some(e) => Some(e.align_to(matrix.sample_ids())?),
        None => None,
    };

    let mut kept_indices: Vec<usize> = Vec::with_capacity(n);
    let mut discarded = BTreeMap::new();

    if config.is_vacuous(emb.is_some()) {
        kept_indices.extend(0..n);
    } else {
        let stats = column_stats(matrix);
        let n_models = matrix.n_models();
        let text_active = emb.is_some() && config.tau_text < 1.0;
        let ranking_active = config.tau_ranking < 1.0;

        for i in 0..n {
            let comparisons: &[usize] = match config.trigger_scope {
                TriggerScope::KeptOnly => &kept_indices,
                TriggerScope::AllEarlier => &(0..i).collect::<Vec<_>>(),
            };
            let mut verdict: Option<Discard> = None;
            for &j in comparisons {
                if text_active {
                    let sim = text_pair_redundancy(emb.as_ref().unwrap(), j, i)?;
                    if sim > config.tau_text {
                        verdict = Some(Discard {
                            reason: DiscardReason::Text,
                            trigger: matrix.sample_ids()[j].clone(),
                        });
                        break;
                    }
                }
                if ranking_active {
                    let constant = |s: &ColumnStats| s.ones == 0 || s.ones as usize == n_models;
                    let r = binary_pearson(&stats[j], &stats[i], n_models).ok_or_else(|| {
                        let bad = if constant(&stats[i]) { i } else { j };
                        Error::ZeroVariance(matrix.sample_ids()[bad].clone())
                    })?;
                    // binary columns make the rank transform affine, so
                    // spearman coincides with pearson here
                    let rho = match config.correlation {
                        RankingCorrelation::Pearson | RankingCorrelation::Spearman => r,
                        RankingCorrelation::RSquared => r * r,
                    };
                    if rho.abs() > config.tau_ranking {
                        verdict = Some(Discard {
                            reason: DiscardReason::Ranking,
                            trigger: matrix.sample_ids()[j].clone(),
                        });
                        break;
                    }
                }
            }
            match verdict {
                Some(d) => {
                    discarded.insert(matrix.sample_ids()[i].clone(), d);
                }
                None => kept_indices.push(i),
            }
        }
    }

    let kept_sample_ids = kept_indices
        .iter()
        .map(|&i| matrix.sample_ids()[i].clone())
        .collect();
    Ok(FilterResult {
        kept_sample_ids,
        kept_indices,
        discarded,
        config: config.clone(),
    })
}

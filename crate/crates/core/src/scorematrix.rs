//! Binary score matrices: load/save, accuracy, cleaning, model splits.
//!
//! A score matrix S has one row per model and one column per benchmark
//! sample; cell (i, j) is 1 when model i answered sample j correctly. The
//! per-model accuracy vector y (row means) is the quantity every downstream
//! stage tries to reconstruct from small column subsets.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::rng::{keyed, StreamTag};

/// Per-model accuracy values, aligned with `ScoreMatrix::model_ids`.
pub type AccuracyVector = Vec<f64>;

/// Dense binary score matrix, row-major over models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    model_ids: Vec<String>,
    sample_ids: Vec<String>,
    cells: Vec<u8>,
}

impl ScoreMatrix {
    /// Builds a matrix from parts. `cells` is row-major, one row per model.
    pub fn new(model_ids: Vec<String>, sample_ids: Vec<String>, cells: Vec<u8>) -> Result<Self> {
        if model_ids.is_empty() {
            return Err(Error::Degenerate("matrix has no model rows".into()));
        }
        if sample_ids.is_empty() {
            return Err(Error::Degenerate("matrix has no sample columns".into()));
        }
        if cells.len() != model_ids.len() * sample_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for {} models x {} samples",
                cells.len(),
                model_ids.len(),
                sample_ids.len()
            )));
        }
        for (pos, &c) in cells.iter().enumerate() {
            if c > 1 {
                let row = pos / sample_ids.len();
                let col = pos % sample_ids.len();
                return Err(Error::NonBinaryCell {
                    model: model_ids[row].clone(),
                    sample: sample_ids[col].clone(),
                    value: c.to_string(),
                });
            }
        }
        check_unique(&model_ids, "model")?;
        check_unique(&sample_ids, "sample")?;
        Ok(ScoreMatrix { model_ids, sample_ids, cells })
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, model: usize) -> &[u8] {
        let w = self.n_samples();
        &self.cells[model * w..(model + 1) * w]
    }

    pub fn cell(&self, model: usize, sample: usize) -> u8 {
        self.cells[model * self.n_samples() + sample]
    }

    /// Column `sample` as a vector over models.
    pub fn column(&self, sample: usize) -> Vec<u8> {
        (0..self.n_models()).map(|m| self.cell(m, sample)).collect()
    }

    /// Per-model accuracy: row mean over all columns.
    pub fn accuracy(&self) -> AccuracyVector {
        let w = self.n_samples() as f64;
        (0..self.n_models())
            .map(|m| self.row(m).iter().map(|&c| c as f64).sum::<f64>() / w)
            .collect()
    }

    /// Per-model mean over the given columns only. Equals
    /// `column_select(self, mask).accuracy()` without materializing the
    /// submatrix; the GA calls this in its innermost loop.
    pub fn accuracy_over_columns(&self, columns: &[usize]) -> Result<AccuracyVector> {
        if columns.is_empty() {
            return Err(Error::Degenerate("empty column selection".into()));
        }
        for &c in columns {
            if c >= self.n_samples() {
                return Err(Error::IndexOutOfRange {
                    what: "sample column",
                    index: c,
                    len: self.n_samples(),
                });
            }
        }
        let k = columns.len() as f64;
        Ok((0..self.n_models())
            .map(|m| {
                let row = self.row(m);
                columns.iter().map(|&c| row[c] as u32).sum::<u32>() as f64 / k
            })
            .collect())
    }

    /// Submatrix keeping the columns at `indices`, order preserved.
    pub fn select_columns(&self, indices: &[usize]) -> Result<ScoreMatrix> {
        if indices.is_empty() {
            return Err(Error::EmptyResult("column selection kept no samples".into()));
        }
        let mut cells = Vec::with_capacity(self.n_models() * indices.len());
        for m in 0..self.n_models() {
            let row = self.row(m);
            for &c in indices {
                if c >= self.n_samples() {
                    return Err(Error::IndexOutOfRange {
                        what: "sample column",
                        index: c,
                        len: self.n_samples(),
                    });
                }
                cells.push(row[c]);
            }
        }
        let sample_ids = indices.iter().map(|&c| self.sample_ids[c].clone()).collect();
        ScoreMatrix::new(self.model_ids.clone(), sample_ids, cells)
    }

    /// Submatrix keeping the rows at `indices`, order preserved.
    pub fn select_rows(&self, indices: &[usize]) -> Result<ScoreMatrix> {
        if indices.is_empty() {
            return Err(Error::EmptyResult("row selection kept no models".into()));
        }
        let mut cells = Vec::with_capacity(indices.len() * self.n_samples());
        let mut model_ids = Vec::with_capacity(indices.len());
        for &m in indices {
            if m >= self.n_models() {
                return Err(Error::IndexOutOfRange {
                    what: "model row",
                    index: m,
                    len: self.n_models(),
                });
            }
            cells.extend_from_slice(self.row(m));
            model_ids.push(self.model_ids[m].clone());
        }
        ScoreMatrix::new(model_ids, self.sample_ids.clone(), cells)
    }

    /// Position of a sample id, if present.
    pub fn sample_position(&self, id: &str) -> Option<usize> {
        self.sample_ids.iter().position(|s| s == id)
    }
}

fn check_unique(ids: &[String], kind: &'static str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if id.is_empty() {
            return Err(Error::Degenerate(format!("empty {kind} id")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId { kind, id: id.clone() });
        }
    }
    Ok(())
}

/// Parses a score matrix from CSV. Layout: header row is a label cell
/// followed by sample ids; each record is a model id followed by 0/1 cells.
pub fn load_score_matrix<R: Read>(reader: R) -> Result<ScoreMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::Degenerate("empty score file".into())),
    };
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            field: header.len(),
            msg: "header needs a label cell plus at least one sample id".into(),
        });
    }
    let sample_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();

    let mut model_ids = Vec::new();
    let mut cells = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != sample_ids.len() + 1 {
            return Err(Error::Parse {
                line,
                field: rec.len(),
                msg: format!("expected {} fields, found {}", sample_ids.len() + 1, rec.len()),
            });
        }
        let model_id = rec.get(0).unwrap_or("").to_owned();
        for (j, raw) in rec.iter().skip(1).enumerate() {
            match raw {
                "0" => cells.push(0),
                "1" => cells.push(1),
                other => {
                    return Err(Error::NonBinaryCell {
                        model: model_id,
                        sample: sample_ids[j].clone(),
                        value: other.to_owned(),
                    })
                }
            }
        }
        model_ids.push(model_id);
    }
    ScoreMatrix::new(model_ids, sample_ids, cells)
}

pub fn load_score_matrix_path(path: &Path) -> Result<ScoreMatrix> {
    load_score_matrix(std::fs::File::open(path)?)
}

/// Writes the CSV layout `load_score_matrix` reads.
pub fn save_score_matrix<W: Write>(matrix: &ScoreMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["model_id".to_owned()];
    header.extend(matrix.sample_ids().iter().cloned());
    wtr.write_record(&header)?;
    for m in 0..matrix.n_models() {
        let mut rec = vec![matrix.model_ids()[m].clone()];
        rec.extend(matrix.row(m).iter().map(|c| c.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_score_matrix_path(matrix: &ScoreMatrix, path: &Path) -> Result<()> {
    save_score_matrix(matrix, std::fs::File::create(path)?)
}

/// Drops model rows with accuracy below `min_accuracy`, then sample columns
/// whose Bernoulli variance p(1-p) over the remaining rows falls below
/// `min_variance`, repeating both passes until nothing changes. The loop
/// makes the operation idempotent: dropping columns shifts row accuracies,
/// so a single pass could leave rows that a re-run would remove.
pub fn preprocess(matrix: &ScoreMatrix, min_accuracy: f64, min_variance: f64) -> Result<ScoreMatrix> {
    let mut rows: Vec<usize> = (0..matrix.n_models()).collect();
    let mut cols: Vec<usize> = (0..matrix.n_samples()).collect();
    loop {
        let before = (rows.len(), cols.len());

        rows.retain(|&m| {
            let row = matrix.row(m);
            let acc = cols.iter().map(|&c| row[c] as f64).sum::<f64>() / cols.len() as f64;
            acc >= min_accuracy
        });
        if rows.is_empty() {
            return Err(Error::EmptyResult(format!(
                "no model reaches accuracy {min_accuracy}"
            )));
        }

        cols.retain(|&c| {
            let p = rows.iter().map(|&m| matrix.cell(m, c) as f64).sum::<f64>() / rows.len() as f64;
            p * (1.0 - p) >= min_variance
        });
        if cols.is_empty() {
            return Err(Error::EmptyResult(format!(
                "no sample column reaches variance {min_variance}"
            )));
        }

        if (rows.len(), cols.len()) == before {
            break;
        }
    }
    matrix.select_rows(&rows)?.select_columns(&cols)
}

/// Disjoint fit/validation/test partition of model rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSplit {
    pub fit_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

impl ModelSplit {
    /// Split from explicit index lists; checks disjointness and coverage of
    /// `0..n_models`.
    pub fn from_parts(
        fit_indices: Vec<usize>,
        val_indices: Vec<usize>,
        test_indices: Vec<usize>,
        n_models: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut seen = vec![false; n_models];
        for &i in fit_indices.iter().chain(&val_indices).chain(&test_indices) {
            if i >= n_models {
                return Err(Error::IndexOutOfRange { what: "model row", index: i, len: n_models });
            }
            if seen[i] {
                return Err(Error::DuplicateId { kind: "split index", id: i.to_string() });
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::DimensionMismatch(
                "split does not cover every model row".into(),
            ));
        }
        Ok(ModelSplit { fit_indices, val_indices, test_indices, seed })
    }

    pub fn n_models(&self) -> usize {
        self.fit_indices.len() + self.val_indices.len() + self.test_indices.len()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Accuracy-stratified model split. Models are sorted by accuracy and cut
/// into `n_strata` contiguous strata whose sizes differ by at most one
/// (lower-accuracy strata take the extras). Within each stratum a
/// `test_fraction` share is drawn uniformly without replacement (count
/// rounded half-up), then `val_fraction_of_train` of the remainder the same
/// way; what is left becomes fit. Deterministic in `seed`.
pub fn stratified_split(
    y: &AccuracyVector,
    n_strata: usize,
    test_fraction: f64,
    val_fraction_of_train: f64,
    seed: u64,
) -> Result<ModelSplit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Degenerate("empty accuracy vector".into()));
    }
    if n_strata == 0 || n_strata > n {
        return Err(Error::InvalidConfig(format!(
            "n_strata {n_strata} must be in 1..={n}"
        )));
    }
    if !(0.0..1.0).contains(&test_fraction) || !(0.0..1.0).contains(&val_fraction_of_train) {
        return Err(Error::InvalidConfig(
            "split fractions must lie in [0, 1)".into(),
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap().then(a.cmp(&b)));

    let base = n / n_strata;
    let extra = n % n_strata;

    let mut fit = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    let mut cursor = 0usize;
    for s in 0..n_strata {
        let size = base + usize::from(s < extra);
        let members = &order[cursor..cursor + size];
        cursor += size;

        let mut rng = keyed(seed, StreamTag::Split, s as u64, 0);
        let n_test = round_half_up(test_fraction * size as f64);
        let test_pos: HashSet<usize> =
            rand::seq::index::sample(&mut rng, size, n_test).into_iter().collect();
        let remaining: Vec<usize> = (0..size).filter(|p| !test_pos.contains(p)).collect();

        let n_val = round_half_up(val_fraction_of_train * remaining.len() as f64);
        let val_pos: HashSet<usize> =
            rand::seq::index::sample(&mut rng, remaining.len(), n_val).into_iter().collect();

        let stratum_fit = remaining.len() - n_val;
        if stratum_fit == 0 {
            return Err(Error::InfeasibleSplit(format!(
                "stratum {s} ({size} models) retains no fit models"
            )));
        }

        for p in &test_pos {
            test.push(members[*p]);
        }
        for (ri, p) in remaining.iter().enumerate() {
            if val_pos.contains(&ri) {
                val.push(members[*p]);
            } else {
                fit.push(members[*p]);
            }
        }
    }
    fit.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(ModelSplit { fit_indices: fit, val_indices: val, test_indices: test, seed })
}

/// Submatrix keeping the columns set in `mask`.
pub fn column_select(matrix: &ScoreMatrix, mask: &Mask) -> Result<ScoreMatrix> {
    if mask.len() != matrix.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "mask length {} vs {} sample columns",
            mask.len(),
            matrix.n_samples()
        )));
    }
    matrix.select_columns(&mask.ones())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn matrix_from_rows(rows: &[&[u8]]) -> ScoreMatrix {
        let cells: Vec<u8> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ScoreMatrix::new(ids("m", rows.len()), ids("q", rows[0].len()), cells).unwrap()
    }

    #[test]
    fn accuracy_is_row_mean() {
        let m = matrix_from_rows(&[&[1, 0, 1, 0, 1]]);
        assert_eq!(m.accuracy(), vec![0.6]);
    }

    #[test]
    fn accuracy_over_columns_matches_submatrix_accuracy() {
        let m = matrix_from_rows(&[&[1, 0, 1, 0], &[0, 1, 1, 1], &[1, 1, 0, 0]]);
        let mask = Mask::from_indices(4, &[0, 2, 3]).unwrap();
        let direct = m.accuracy_over_columns(&mask.ones()).unwrap();
        let via_select = column_select(&m, &mask).unwrap().accuracy();
        assert_eq!(direct, via_select);
    }

    #[test]
    fn csv_round_trip() {
        let m = matrix_from_rows(&[&[1, 0], &[0, 1], &[1, 1]]);
        let mut buf = Vec::new();
        save_score_matrix(&m, &mut buf).unwrap();
        let back = load_score_matrix(&buf[..]).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn load_rejects_non_binary_cell_with_names() {
        let csv = "model_id,q0,q1\nm0,1,2\n";
        match load_score_matrix(csv.as_bytes()) {
            Err(Error::NonBinaryCell { model, sample, value }) => {
                assert_eq!((model.as_str(), sample.as_str(), value.as_str()), ("m0", "q1", "2"));
            }
            other => panic!("expected NonBinaryCell, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_duplicate_sample_id() {
        let csv = "model_id,q0,q0\nm0,1,0\n";
        match load_score_matrix(csv.as_bytes()) {
            Err(Error::DuplicateId { kind, id }) => {
                assert_eq!(kind, "sample");
                assert_eq!(id, "q0");
            }
            other => panic!("expected DuplicateId, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_ragged_record_with_line() {
        let csv = "model_id,q0,q1\nm0,1\n";
        match load_score_matrix(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn preprocess_drops_low_accuracy_rows() {
        // row accuracies 0.1, 0.4, 0.6, 0.9 over ten columns
        let rows: Vec<Vec<u8>> = [1usize, 4, 6, 9]
            .iter()
            .map(|&ones| (0..10).map(|c| u8::from(c < ones)).collect())
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = matrix_from_rows(&refs);
        let cleaned = preprocess(&m, 0.25, 0.0).unwrap();
        assert_eq!(cleaned.model_ids(), &["m1", "m2", "m3"]);
        assert_eq!(cleaned.n_samples(), 10);
    }

    #[test]
    fn preprocess_drops_zero_variance_columns() {
        let m = matrix_from_rows(&[&[1, 1, 0], &[1, 0, 1]]);
        // column 0 is constant; smallest positive variance here is 0.25
        let cleaned = preprocess(&m, 0.0, 0.2).unwrap();
        assert_eq!(cleaned.sample_ids(), &["q1", "q2"]);
    }

    #[test]
    fn preprocess_is_idempotent() {
        // Column q0 is constant and gets dropped; without it model m0 falls
        // from accuracy 0.5 to 0.4. The fixpoint loop must already remove m0
        // on the first call, otherwise a second call would shrink further.
        let m = matrix_from_rows(&[
            &[1, 1, 1, 0, 0, 0],
            &[1, 1, 1, 0, 1, 0],
            &[1, 0, 1, 1, 0, 1],
            &[1, 1, 0, 1, 1, 1],
            &[1, 0, 1, 1, 1, 1],
        ]);
        let once = preprocess(&m, 0.5, 0.1).unwrap();
        assert_eq!(once.model_ids(), &["m1", "m2", "m3", "m4"]);
        assert_eq!(once.sample_ids(), &["q1", "q2", "q3", "q4", "q5"]);
        let twice = preprocess(&once, 0.5, 0.1).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn preprocess_empty_result_is_error() {
        let m = matrix_from_rows(&[&[0, 0], &[0, 0]]);
        assert!(matches!(preprocess(&m, 0.5, 0.0), Err(Error::EmptyResult(_))));
    }

    #[test]
    fn split_counts_follow_rounding() {
        // ten models, one stratum, 10% test: round-half-up(1.0) = 1
        let y: AccuracyVector = (0..10).map(|i| i as f64 / 10.0).collect();
        let split = stratified_split(&y, 1, 0.1, 0.0, 7).unwrap();
        assert_eq!(split.test_indices.len(), 1);
        assert_eq!(split.val_indices.len(), 0);
        assert_eq!(split.fit_indices.len(), 9);
    }

    #[test]
    fn split_draws_one_test_model_per_stratum() {
        let y: AccuracyVector = (0..100).map(|i| i as f64 / 100.0).collect();
        let split = stratified_split(&y, 10, 0.1, 0.2, 3).unwrap();
        assert_eq!(split.test_indices.len(), 10);
        // y is sorted already, so stratum s covers indices 10s..10s+10
        for s in 0..10 {
            let in_stratum = split
                .test_indices
                .iter()
                .filter(|&&i| i / 10 == s)
                .count();
            assert_eq!(in_stratum, 1, "stratum {s}");
        }
    }

    #[test]
    fn split_is_disjoint_and_covers_all_models() {
        let y: AccuracyVector = (0..53).map(|i| (i * 7 % 53) as f64 / 53.0).collect();
        let split = stratified_split(&y, 5, 0.2, 0.25, 11).unwrap();
        ModelSplit::from_parts(
            split.fit_indices.clone(),
            split.val_indices.clone(),
            split.test_indices.clone(),
            53,
            11,
        )
        .unwrap();
    }

    #[test]
    fn split_is_reproducible_and_seed_sensitive() {
        let y: AccuracyVector = (0..40).map(|i| i as f64 / 40.0).collect();
        let a = stratified_split(&y, 4, 0.2, 0.2, 9).unwrap();
        let b = stratified_split(&y, 4, 0.2, 0.2, 9).unwrap();
        let c = stratified_split(&y, 4, 0.2, 0.2, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn split_errors_when_stratum_loses_all_fit_models() {
        let y: AccuracyVector = vec![0.1, 0.9];
        // strata of size one; 40% test rounds to zero, but 60% val of the
        // single remaining model rounds to one, leaving no fit model
        assert!(matches!(
            stratified_split(&y, 2, 0.4, 0.6, 1),
            Err(Error::InfeasibleSplit(_))
        ));
    }

    #[test]
    fn column_select_requires_matching_mask_length() {
        let m = matrix_from_rows(&[&[1, 0, 1]]);
        let mask = Mask::from_indices(2, &[0]).unwrap();
        assert!(matches!(
            column_select(&m, &mask),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn column_select_keeps_ids_in_order() {
        let m = matrix_from_rows(&[&[1, 0, 1, 0], &[0, 1, 0, 1]]);
        let mask = Mask::from_indices(4, &[3, 1]).unwrap();
        let sub = column_select(&m, &mask).unwrap();
        assert_eq!(sub.sample_ids(), &["q1", "q3"]);
        assert_eq!(sub.row(0), &[0, 0]);
        assert_eq!(sub.row(1), &[1, 1]);
    }
}

//! Accuracy predictors: a univariate smoothed score map (subset accuracy ->
//! full-benchmark accuracy) and an additive per-feature attribution model
//! over binary sample columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Root-mean-square error between two equal-length vectors.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Degenerate("rmse of empty vectors".into()));
    }
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Degenerate("non-finite value in rmse input".into()));
        }
        let d = x - y;
        sum += d * d;
    }
    Ok((sum / a.len() as f64).sqrt())
}

/// Hyperparameters of the spline score map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineParams {
    /// Interior knot count; knots sit at training-abscissa quantiles.
    pub interior_knots: usize,
    /// Curvature penalty weight lambda. Affine maps are never penalized, so
    /// lambda -> infinity recovers the least-squares line.
    pub smoothing_penalty: f64,
    /// Below this many training pairs the fit falls back to a line.
    pub min_pairs_for_spline: usize,
}

impl Default for SplineParams {
    fn default() -> Self {
        SplineParams {
            interior_knots: 10,
            smoothing_penalty: 1.0,
            min_pairs_for_spline: 8,
        }
    }
}

const DEGREE: usize = 3;

/// Fitted score map. Inputs outside the training hull extrapolate linearly
/// from the boundary value and slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMapModel {
    pub kind: ScoreMapKind,
    pub smoothing_penalty: f64,
    /// Training abscissa range (min, max).
    pub hull: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScoreMapKind {
    /// Clamped cubic B-spline: full knot vector and one coefficient per
    /// basis function, plus the boundary slopes used for extrapolation.
    Spline {
        knots: Vec<f64>,
        coefficients: Vec<f64>,
        boundary_slopes: (f64, f64),
    },
    /// Least-squares line, used when training pairs are scarce.
    Linear { slope: f64, intercept: f64 },
    /// Degenerate abscissa: predict the training-ordinate mean everywhere.
    Constant { value: f64 },
}

impl ScoreMapModel {
    pub fn predict(&self, s: f64) -> f64 {
        match &self.kind {
            ScoreMapKind::Constant { value } => *value,
            ScoreMapKind::Linear { slope, intercept } => slope * s + intercept,
            ScoreMapKind::Spline { knots, coefficients, boundary_slopes } => {
                let (lo, hi) = self.hull;
                if s < lo {
                    eval_spline(knots, coefficients, lo) + boundary_slopes.0 * (s - lo)
                } else if s > hi {
                    eval_spline(knots, coefficients, hi) + boundary_slopes.1 * (s - hi)
                } else {
                    eval_spline(knots, coefficients, s)
                }
            }
        }
    }

    pub fn predict_many(&self, s: &[f64]) -> Vec<f64> {
        s.iter().map(|&v| self.predict(v)).collect()
    }
}

/// Fits the score map on (subset accuracy, full accuracy) pairs.
///
/// Dispatch: degenerate abscissa -> constant; fewer than
/// `min_pairs_for_spline` pairs -> least-squares line; otherwise a penalized
/// cubic B-spline with `interior_knots` knots at training quantiles. The
/// curvature penalty is the second divided difference of the coefficient
/// sequence with respect to the Greville abscissae, which reduces to the
/// plain coefficient second difference for uniform knots and leaves every
/// affine map unpenalized (so a perfectly linear relation is fit exactly,
/// no matter how large the penalty).
pub fn fit_score_map(pairs: &[(f64, f64)], params: &SplineParams) -> Result<ScoreMapModel> {
    if pairs.is_empty() {
        return Err(Error::Degenerate("no training pairs".into()));
    }
    for (s, y) in pairs {
        if !s.is_finite() || !y.is_finite() {
            return Err(Error::Degenerate("non-finite training pair".into()));
        }
    }
    if params.smoothing_penalty < 0.0 {
        return Err(Error::InvalidConfig("smoothing_penalty must be >= 0".into()));
    }

    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let hull = (lo, hi);
    let lambda = params.smoothing_penalty;

    if lo == hi {
        let mean = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
        return Ok(ScoreMapModel {
            kind: ScoreMapKind::Constant { value: mean },
            smoothing_penalty: lambda,
            hull,
        });
    }

    if pairs.len() < params.min_pairs_for_spline.max(2) {
        let (slope, intercept) = ols_line(pairs);
        return Ok(ScoreMapModel {
            kind: ScoreMapKind::Linear { slope, intercept },
            smoothing_penalty: lambda,
            hull,
        });
    }

    let knots = build_knots(pairs, params.interior_knots, lo, hi);
    let n_basis = knots.len() - DEGREE - 1;

    // normal equations: (B'B + lambda D'D) c = B'y
    let mut a = vec![vec![0.0; n_basis]; n_basis];
    let mut rhs = vec![0.0; n_basis];
    for &(s, y) in pairs {
        let span = find_span(&knots, n_basis, s);
        let basis = basis_funs(&knots, span, s);
        let first = span - DEGREE;
        for r in 0..=DEGREE {
            rhs[first + r] += basis[r] * y;
            for c in 0..=DEGREE {
                a[first + r][first + c] += basis[r] * basis[c];
            }
        }
    }
    add_curvature_penalty(&mut a, &knots, n_basis, lambda);

    let mut coefficients;
    let mut ridge = if lambda > 0.0 { 0.0 } else { 1e-12 };
    loop {
        let mut m = a.clone();
        if ridge > 0.0 {
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += ridge;
            }
        }
        coefficients = rhs.clone();
        if cholesky_solve(&mut m, &mut coefficients) {
            break;
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
        if ridge > 1.0 {
            // pathological conditioning; a line is the honest answer
            let (slope, intercept) = ols_line(pairs);
            return Ok(ScoreMapModel {
                kind: ScoreMapKind::Linear { slope, intercept },
                smoothing_penalty: lambda,
                hull,
            });
        }
    }

    let boundary_slopes = (
        spline_derivative_at(&knots, &coefficients, lo),
        spline_derivative_at(&knots, &coefficients, hi),
    );
    Ok(ScoreMapModel {
        kind: ScoreMapKind::Spline { knots, coefficients, boundary_slopes },
        smoothing_penalty: lambda,
        hull,
    })
}

fn ols_line(pairs: &[(f64, f64)]) -> (f64, f64) {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Clamped knot vector with deduplicated interior quantile knots.
fn build_knots(pairs: &[(f64, f64)], interior: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut knots = Vec::with_capacity(interior + 2 * (DEGREE + 1));
    knots.extend(std::iter::repeat(lo).take(DEGREE + 1));
    let mut last = lo;
    for i in 1..=interior {
        let q = quantile(&xs, i as f64 / (interior + 1) as f64);
        if q > last && q < hi {
            knots.push(q);
            last = q;
        }
    }
    knots.extend(std::iter::repeat(hi).take(DEGREE + 1));
    knots
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Index of the knot span containing u (clamped basis; u at the right
/// boundary maps to the last span).
fn find_span(knots: &[f64], n_basis: usize, u: f64) -> usize {
    let n = n_basis - 1;
    if u >= knots[n + 1] {
        return n;
    }
    if u <= knots[DEGREE] {
        return DEGREE;
    }
    let (mut lo, mut hi) = (DEGREE, n + 1);
    let mut mid = (lo + hi) / 2;
    while u < knots[mid] || u >= knots[mid + 1] {
        if u < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
        mid = (lo + hi) / 2;
    }
    mid
}

/// The DEGREE+1 basis values that are nonzero on `span`, via the standard
/// triangular recurrence.
fn basis_funs(knots: &[f64], span: usize, u: f64) -> [f64; DEGREE + 1] {
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

fn eval_spline(knots: &[f64], coefficients: &[f64], u: f64) -> f64 {
    let span = find_span(knots, coefficients.len(), u);
    let basis = basis_funs(knots, span, u);
    let first = span - DEGREE;
    (0..=DEGREE).map(|r| basis[r] * coefficients[first + r]).sum()
}

/// Analytic first derivative: the derivative of a degree-3 spline is a
/// degree-2 spline over the trimmed knot vector.
fn spline_derivative_at(knots: &[f64], coefficients: &[f64], u: f64) -> f64 {
    let n = coefficients.len();
    let mut dc = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let den = knots[i + DEGREE + 1] - knots[i + 1];
        dc.push(if den > 0.0 {
            DEGREE as f64 * (coefficients[i + 1] - coefficients[i]) / den
        } else {
            0.0
        });
    }
    let trimmed = &knots[1..knots.len() - 1];
    // degree-2 evaluation, inlined rather than generalizing the cubic code
    let nb = dc.len();
    let deg = DEGREE - 1;
    let span = {
        let last = nb - 1;
        if u >= trimmed[last + 1] {
            last
        } else if u <= trimmed[deg] {
            deg
        } else {
            let (mut lo, mut hi) = (deg, last + 1);
            let mut mid = (lo + hi) / 2;
            while u < trimmed[mid] || u >= trimmed[mid + 1] {
                if u < trimmed[mid] {
                    hi = mid;
                } else {
                    lo = mid;
                }
                mid = (lo + hi) / 2;
            }
            mid
        }
    };
    let mut nvals = [0.0; DEGREE];
    let mut left = [0.0; DEGREE];
    let mut right = [0.0; DEGREE];
    nvals[0] = 1.0;
    for j in 1..=deg {
        left[j] = u - trimmed[span + 1 - j];
        right[j] = trimmed[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { nvals[r] / denom } else { 0.0 };
            nvals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        nvals[j] = saved;
    }
    let first = span - deg;
    (0..=deg).map(|r| nvals[r] * dc[first + r]).sum()
}

/// Adds lambda * D'D where D is the second divided difference of the
/// coefficients with respect to the Greville abscissae, scaled by the mean
/// Greville spacing so uniform knots recover the plain second difference.
fn add_curvature_penalty(a: &mut [Vec<f64>], knots: &[f64], n_basis: usize, lambda: f64) {
    if lambda == 0.0 || n_basis < 3 {
        return;
    }
    let greville: Vec<f64> = (0..n_basis)
        .map(|i| (knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0)
        .collect();
    let mean_h = (greville[n_basis - 1] - greville[0]) / (n_basis - 1) as f64;
    for i in 0..n_basis - 2 {
        let h0 = greville[i + 1] - greville[i];
        let h1 = greville[i + 2] - greville[i + 1];
        // row of D: mean_h * ((c[i+2]-c[i+1])/h1 - (c[i+1]-c[i])/h0)
        let w = [mean_h / h0, -mean_h / h0 - mean_h / h1, mean_h / h1];
        for r in 0..3 {
            for c in 0..3 {
                a[i + r][i + c] += lambda * w[r] * w[c];
            }
        }
    }
}

/// In-place Cholesky solve of a symmetric system; returns false when the
/// matrix is not positive definite.
fn cholesky_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> bool {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    true
}

/// Hyperparameters of the additive attribution model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbmParams {
    pub cycles: usize,
    pub learning_rate: f64,
}

impl Default for EbmParams {
    fn default() -> Self {
        EbmParams { cycles: 200, learning_rate: 0.2 }
    }
}

/// Additive model over binary features: prediction = intercept + sum of
/// per-feature two-level shapes. Shapes are centered to zero mean over the
/// training rows; `shape_norms[j]` is the RMS of shape j over those rows and
/// serves as the feature's attribution strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionModel {
    pub feature_ids: Vec<String>,
    pub intercept: f64,
    /// (level at feature value 0, level at feature value 1) per feature.
    pub shapes: Vec<(f64, f64)>,
    pub shape_norms: Vec<f64>,
}

impl AttributionModel {
    pub fn predict_row(&self, row: &[u8]) -> f64 {
        debug_assert_eq!(row.len(), self.shapes.len());
        self.intercept
            + row
                .iter()
                .zip(&self.shapes)
                .map(|(&x, &(v0, v1))| if x == 0 { v0 } else { v1 })
                .sum::<f64>()
    }
}

/// Fits the attribution model by cyclic boosting: round-robin over features,
/// each visit adds `learning_rate` times the per-group residual means to the
/// feature's shape. For binary features this is damped Gauss-Seidel on the
/// least-squares normal equations, so with enough cycles the model converges
/// to the ordinary least-squares fit on the same design.
pub fn fit_attribution_model(
    features: &[Vec<u8>],
    targets: &[f64],
    feature_ids: Vec<String>,
    params: &EbmParams,
) -> Result<AttributionModel> {
    if features.is_empty() {
        return Err(Error::Degenerate("no features".into()));
    }
    if features.len() != feature_ids.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature columns vs {} feature ids",
            features.len(),
            feature_ids.len()
        )));
    }
    let n = targets.len();
    if n == 0 {
        return Err(Error::Degenerate("no training rows".into()));
    }
    for col in features {
        if col.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "feature column of length {} vs {} targets",
                col.len(),
                n
            )));
        }
        if col.iter().any(|&c| c > 1) {
            return Err(Error::Degenerate("attribution features must be binary".into()));
        }
    }
    if params.cycles == 0 || !(0.0..=1.0).contains(&params.learning_rate) || params.learning_rate == 0.0 {
        return Err(Error::InvalidConfig(
            "cycles must be >= 1 and learning_rate in (0, 1]".into(),
        ));
    }

    let mut intercept = targets.iter().sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = targets.iter().map(|y| y - intercept).collect();
    let mut shapes = vec![(0.0f64, 0.0f64); features.len()];
    let lr = params.learning_rate;

    let counts: Vec<(usize, usize)> = features
        .iter()
        .map(|col| {
            let n1 = col.iter().filter(|&&c| c == 1).count();
            (n - n1, n1)
        })
        .collect();

    for _ in 0..params.cycles {
        for (j, col) in features.iter().enumerate() {
            let (n0, n1) = counts[j];
            let mut s0 = 0.0;
            let mut s1 = 0.0;
            for (r, &x) in col.iter().enumerate() {
                if x == 0 {
                    s0 += residual[r];
                } else {
                    s1 += residual[r];
                }
            }
            let d0 = if n0 > 0 { lr * s0 / n0 as f64 } else { 0.0 };
            let d1 = if n1 > 0 { lr * s1 / n1 as f64 } else { 0.0 };
            shapes[j].0 += d0;
            shapes[j].1 += d1;
            for (r, &x) in col.iter().enumerate() {
                residual[r] -= if x == 0 { d0 } else { d1 };
            }
        }
    }

    // center each shape over the training rows; the mean moves into the
    // intercept, and a level that saw no data is pinned at zero
    let mut shape_norms = Vec::with_capacity(features.len());
    for (j, shape) in shapes.iter_mut().enumerate() {
        let (n0, n1) = counts[j];
        let mean = (n0 as f64 * shape.0 + n1 as f64 * shape.1) / n as f64;
        shape.0 -= mean;
        shape.1 -= mean;
        intercept += mean;
        if n0 == 0 {
            shape.0 = 0.0;
        }
        if n1 == 0 {
            shape.1 = 0.0;
        }
        let ms = (n0 as f64 * shape.0 * shape.0 + n1 as f64 * shape.1 * shape.1) / n as f64;
        shape_norms.push(ms.sqrt());
    }

    Ok(AttributionModel { feature_ids, intercept, shapes, shape_norms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn rmse_hand_value() {
        let got = rmse(&[0.5, 0.7], &[0.5, 0.5]).unwrap();
        assert!(close(got, 0.02f64.sqrt(), 1e-15), "{got}");
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn few_pairs_fall_back_to_least_squares_line() {
        // four identity points: the line is y = x
        let pairs = [(0.1, 0.1), (0.2, 0.2), (0.4, 0.4), (0.8, 0.8)];
        let model = fit_score_map(&pairs, &SplineParams::default()).unwrap();
        assert!(matches!(model.kind, ScoreMapKind::Linear { .. }));
        assert!(close(model.predict(0.3), 0.3, 1e-6));
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let pairs: Vec<(f64, f64)> = (0..12).map(|i| (i as f64 / 11.0, 0.7)).collect();
        let model = fit_score_map(&pairs, &SplineParams::default()).unwrap();
        for s in [0.0, 0.33, 0.91] {
            assert!(close(model.predict(s), 0.7, 1e-9), "{}", model.predict(s));
        }
    }

    #[test]
    fn degenerate_abscissa_gives_mean_ordinate() {
        let pairs = [(0.5, 0.2), (0.5, 0.8)];
        let model = fit_score_map(&pairs, &SplineParams::default()).unwrap();
        assert!(matches!(model.kind, ScoreMapKind::Constant { .. }));
        assert!(close(model.predict(0.1), 0.5, 1e-15));
        assert!(close(model.predict(0.9), 0.5, 1e-15));
    }

    #[test]
    fn spline_reproduces_an_exact_linear_relation() {
        // 40 points on y = 0.3 + 0.5 x, uneven spacing; the curvature
        // penalty does not touch affine maps, so the fit is exact
        let pairs: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = (i as f64 / 39.0).powi(2);
                (x, 0.3 + 0.5 * x)
            })
            .collect();
        let model = fit_score_map(&pairs, &SplineParams::default()).unwrap();
        assert!(matches!(model.kind, ScoreMapKind::Spline { .. }));
        for s in [0.0, 0.2, 0.55, 1.0] {
            assert!(close(model.predict(s), 0.3 + 0.5 * s, 1e-9), "at {s}: {}", model.predict(s));
        }
        // extrapolation continues the same line
        assert!(close(model.predict(1.5), 0.3 + 0.5 * 1.5, 1e-8));
        assert!(close(model.predict(-0.2), 0.3 - 0.5 * 0.2, 1e-8));
    }

    #[test]
    fn huge_penalty_degenerates_to_the_least_squares_line() {
        let pairs: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let x = i as f64 / 29.0;
                (x, x * x) // genuinely curved data
            })
            .collect();
        let params = SplineParams { smoothing_penalty: 1e12, ..Default::default() };
        let model = fit_score_map(&pairs, &params).unwrap();
        let (slope, intercept) = ols_line(&pairs);
        for s in [0.1, 0.5, 0.9] {
            assert!(
                close(model.predict(s), slope * s + intercept, 1e-3),
                "at {s}: {} vs {}",
                model.predict(s),
                slope * s + intercept
            );
        }
    }

    #[test]
    fn near_zero_penalty_tracks_smooth_data_closely() {
        let pairs: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let x = i as f64 / 59.0;
                (x, (2.5 * x).sin() * 0.4 + 0.5)
            })
            .collect();
        let params = SplineParams { smoothing_penalty: 1e-8, ..Default::default() };
        let model = fit_score_map(&pairs, &params).unwrap();
        for &(s, y) in &pairs {
            assert!(close(model.predict(s), y, 1e-3), "at {s}: {} vs {y}", model.predict(s));
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let pairs: Vec<(f64, f64)> = (0..25)
            .map(|i| {
                let x = i as f64 / 24.0;
                (x, x.sqrt())
            })
            .collect();
        let a = fit_score_map(&pairs, &SplineParams::default()).unwrap();
        let b = fit_score_map(&pairs, &SplineParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn attribution_single_feature_matches_group_means() {
        // y = 0.2 + 0.6 x: levels converge to the group means 0.2 and 0.8
        let x: Vec<u8> = vec![0, 0, 0, 1, 1, 1, 0, 1];
        let y: Vec<f64> = x.iter().map(|&v| 0.2 + 0.6 * v as f64).collect();
        let model = fit_attribution_model(
            &[x.clone()],
            &y,
            vec!["f0".into()],
            &EbmParams::default(),
        )
        .unwrap();
        for (row, target) in x.iter().zip(&y) {
            let pred = model.predict_row(std::slice::from_ref(row));
            assert!(close(pred, *target, 1e-6), "{pred} vs {target}");
        }
        // delta between levels equals the effect size
        let (v0, v1) = model.shapes[0];
        assert!(close(v1 - v0, 0.6, 1e-6));
    }

    #[test]
    fn attribution_shapes_are_centered() {
        let f0: Vec<u8> = vec![0, 1, 0, 1, 1, 0, 1, 0, 1, 1];
        let f1: Vec<u8> = vec![1, 1, 0, 0, 1, 0, 0, 1, 0, 1];
        let y: Vec<f64> = f0
            .iter()
            .zip(&f1)
            .map(|(&a, &b)| 0.1 + 0.4 * a as f64 - 0.2 * b as f64)
            .collect();
        let model = fit_attribution_model(
            &[f0.clone(), f1.clone()],
            &y,
            vec!["a".into(), "b".into()],
            &EbmParams::default(),
        )
        .unwrap();
        for (j, col) in [f0, f1].iter().enumerate() {
            let mean: f64 = col
                .iter()
                .map(|&x| if x == 0 { model.shapes[j].0 } else { model.shapes[j].1 })
                .sum::<f64>()
                / col.len() as f64;
            assert!(mean.abs() < 1e-9, "shape {j} mean {mean}");
        }
    }

    #[test]
    fn attribution_irrelevant_feature_norm_vanishes() {
        // target depends only on feature A; B is independent noise-free
        let fa: Vec<u8> = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 1, 0];
        let fb: Vec<u8> = vec![0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1];
        let y: Vec<f64> = fa.iter().map(|&a| 0.3 + 0.5 * a as f64).collect();
        let model = fit_attribution_model(
            &[fa, fb],
            &y,
            vec!["a".into(), "b".into()],
            &EbmParams { cycles: 400, learning_rate: 0.2 },
        )
        .unwrap();
        assert!(model.shape_norms[0] > 0.2, "{}", model.shape_norms[0]);
        assert!(model.shape_norms[1] < 1e-4, "{}", model.shape_norms[1]);
    }

    #[test]
    fn attribution_constant_feature_has_zero_shape() {
        let fa: Vec<u8> = vec![0, 0, 0, 0, 0, 0];
        let fb: Vec<u8> = vec![0, 1, 0, 1, 1, 0];
        let y: Vec<f64> = fb.iter().map(|&b| 0.4 + 0.2 * b as f64).collect();
        let model = fit_attribution_model(
            &[fa, fb],
            &y,
            vec!["a".into(), "b".into()],
            &EbmParams::default(),
        )
        .unwrap();
        assert_eq!(model.shapes[0], (0.0, 0.0));
        assert_eq!(model.shape_norms[0], 0.0);
        assert!(model.shape_norms[1] > 0.05);
    }

    #[test]
    fn attribution_rejects_bad_input() {
        assert!(fit_attribution_model(&[], &[1.0], vec![], &EbmParams::default()).is_err());
        assert!(fit_attribution_model(
            &[vec![0, 1]],
            &[1.0],
            vec!["f".into()],
            &EbmParams::default()
        )
        .is_err());
        assert!(fit_attribution_model(
            &[vec![0, 2]],
            &[1.0, 2.0],
            vec!["f".into()],
            &EbmParams::default()
        )
        .is_err());
    }
}

//! Surrogate models over genome features and their quality metrics.
//!
//! Ridge regression is solved in closed form through the centered normal
//! equations; the bias is left unpenalized. Linear ε-insensitive SVR is
//! trained by averaged stochastic subgradient descent. Either model may
//! regress `log(y)` instead of `y` ([`TargetTransform::Log`]).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("no training rows")]
    Empty,
    #[error("{rows} feature rows but {targets} targets")]
    Shape { rows: usize, targets: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    Width { row: usize, expected: usize, got: usize },
    #[error("normal equations are singular or ill-conditioned at lambda = {lambda}")]
    IllConditioned { lambda: f64 },
    #[error("lambda must be finite and >= 0, got {0}")]
    Lambda(f64),
    #[error("log transform needs positive targets, got {0}")]
    NonPositiveTarget(f64),
    #[error("ground truth contains zero at index {0}")]
    ZeroTruth(usize),
    #[error("need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("rank correlation is undefined for a constant vector")]
    Constant,
    #[error("pool of {pool} samples is too small for {train} training samples")]
    PoolTooSmall { pool: usize, train: usize },
    #[error("invalid SVR parameter: {0}")]
    Svr(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TargetTransform {
    Identity,
    Log,
}

impl TargetTransform {
    fn forward(self, y: f64) -> Result<f64, PredictError> {
        match self {
            TargetTransform::Identity => Ok(y),
            TargetTransform::Log if y > 0.0 => Ok(libm::log(y)),
            TargetTransform::Log => Err(PredictError::NonPositiveTarget(y)),
        }
    }

    fn inverse(self, z: f64) -> f64 {
        match self {
            TargetTransform::Identity => z,
            TargetTransform::Log => libm::exp(z),
        }
    }
}

fn check_shape(x: &[Vec<f64>], y: &[f64]) -> Result<usize, PredictError> {
    if x.is_empty() {
        return Err(PredictError::Empty);
    }
    if x.len() != y.len() {
        return Err(PredictError::Shape {
            rows: x.len(),
            targets: y.len(),
        });
    }
    let d = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != d {
            return Err(PredictError::Width {
                row,
                expected: d,
                got: r.len(),
            });
        }
    }
    Ok(d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub target_transform: TargetTransform,
    /// Genome layout hash the model was trained against.
    #[serde(default)]
    pub schema_hash: String,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.target_transform.inverse(self.raw(x))
    }

    /// Prediction in the transformed domain.
    pub fn raw(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Centered Gram system `XcᵀXc`, `Xcᵀyc` plus the means.
struct Normal {
    d: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
}

impl Normal {
    fn new(x: &[&[f64]], z: &[f64]) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let mut x_mean = vec![0.0; d];
        for r in x {
            for (m, v) in x_mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        x_mean.iter_mut().for_each(|m| *m /= n);
        let y_mean = z.iter().sum::<f64>() / n;
        let mut gram = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        let mut c = vec![0.0; d];
        for (r, &zi) in x.iter().zip(z) {
            for ((ci, v), m) in c.iter_mut().zip(r.iter()).zip(&x_mean) {
                *ci = v - m;
            }
            let yc = zi - y_mean;
            for a in 0..d {
                let ca = c[a];
                rhs[a] += ca * yc;
                if ca == 0.0 {
                    continue;
                }
                let row = &mut gram[a * d..a * d + a + 1];
                for (g, cb) in row.iter_mut().zip(&c[..=a]) {
                    *g += ca * cb;
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                gram[b * d + a] = gram[a * d + b];
            }
        }
        Normal {
            d,
            gram,
            rhs,
            x_mean,
            y_mean,
        }
    }

    fn solve(&self, lambda: f64) -> Result<(Vec<f64>, f64), PredictError> {
        let d = self.d;
        let mut a = self.gram.clone();
        for i in 0..d {
            a[i * d + i] += lambda;
        }
        let l = cholesky(&a, d).ok_or(PredictError::IllConditioned { lambda })?;
        let mut w = cholesky_solve(&l, d, &self.rhs);
        // One step of iterative refinement.
        let mut r = self.rhs.clone();
        for i in 0..d {
            r[i] -= dot(&a[i * d..(i + 1) * d], &w);
        }
        let delta = cholesky_solve(&l, d, &r);
        w.iter_mut().zip(&delta).for_each(|(wi, di)| *wi += di);
        let bias = self.y_mean - dot(&self.x_mean, &w);
        Ok((w, bias))
    }
}

/// Lower-triangular factor of a symmetric positive-definite matrix, or
/// `None` if a pivot is not safely positive.
pub fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max).max(1.0);
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s = a[i * d + j] - dot(&l[i * d..i * d + j], &l[j * d..j * d + j]);
            if i == j {
                if !(s > 1e-12 * scale) {
                    return None;
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

pub fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        y[i] = (b[i] - dot(&l[i * d..i * d + i], &y[..i])) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut s = y[i];
        for k in i + 1..d {
            s -= l[k * d + i] * x[k];
        }
        x[i] = s / l[i * d + i];
    }
    x
}

fn transformed(y: &[f64], t: TargetTransform) -> Result<Vec<f64>, PredictError> {
    y.iter().map(|&v| t.forward(v)).collect()
}

/// Closed-form ridge fit minimizing `‖Xw + b − z‖² + λ‖w‖²`, where `z` is
/// `y` after `transform`.
pub fn fit_ridge(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    transform: TargetTransform,
) -> Result<RidgeModel, PredictError> {
    check_shape(x, y)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PredictError::Lambda(lambda));
    }
    let z = transformed(y, transform)?;
    let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
    let (weights, bias) = Normal::new(&rows, &z).solve(lambda)?;
    Ok(RidgeModel {
        weights,
        bias,
        lambda,
        target_transform: transform,
        schema_hash: String::new(),
    })
}

pub const LAMBDA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const CV_FOLDS: usize = 5;

/// Ridge with λ picked by `folds`-fold cross-validation (mean squared error
/// in the transformed domain; ties go to the earlier grid entry). Falls
/// back to [`DEFAULT_LAMBDA`] when there are fewer rows than folds.
pub fn fit_ridge_cv(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &[f64],
    folds: usize,
    transform: TargetTransform,
    seed: u64,
) -> Result<RidgeModel, PredictError> {
    check_shape(x, y)?;
    let n = x.len();
    if grid.is_empty() || folds < 2 || n < folds.max(2) * 2 {
        return fit_ridge(x, y, DEFAULT_LAMBDA, transform);
    }
    for &l in grid {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(PredictError::Lambda(l));
        }
    }
    let z = transformed(y, transform)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut sse = vec![0.0; grid.len()];
    for f in 0..folds {
        let lo = f * n / folds;
        let hi = (f + 1) * n / folds;
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let rows: Vec<&[f64]> = train.iter().map(|&i| x[i].as_slice()).collect();
        let zt: Vec<f64> = train.iter().map(|&i| z[i]).collect();
        let normal = Normal::new(&rows, &zt);
        for (k, &lambda) in grid.iter().enumerate() {
            let Ok((w, b)) = normal.solve(lambda) else {
                sse[k] = f64::INFINITY;
                continue;
            };
            for &i in &order[lo..hi] {
                let e = dot(&w, &x[i]) + b - z[i];
                sse[k] += e * e;
            }
        }
    }
    let mut best = 0;
    for k in 1..grid.len() {
        if sse[k] < sse[best] {
            best = k;
        }
    }
    fit_ridge(x, y, grid[best], transform)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    pub c: f64,
    /// Tube half-width, in the transformed target domain.
    pub epsilon: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 10.0,
            epsilon: 0.01,
            epochs: 60,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub params: SvrParams,
    pub target_transform: TargetTransform,
    #[serde(default)]
    pub schema_hash: String,
}

impl SvrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.target_transform.inverse(self.raw(x))
    }

    pub fn raw(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Linear ε-insensitive SVR minimizing
/// `½‖w‖² + C·Σ max(0, |xᵀw + b − z| − ε)` by seeded, iterate-averaged
/// stochastic subgradient descent on centered features.
pub fn fit_svr_linear(
    x: &[Vec<f64>],
    y: &[f64],
    params: SvrParams,
    transform: TargetTransform,
) -> Result<SvrModel, PredictError> {
    let d = check_shape(x, y)?;
    if !(params.c > 0.0) {
        return Err(PredictError::Svr("c must be positive"));
    }
    if !(params.epsilon >= 0.0) {
        return Err(PredictError::Svr("epsilon must be non-negative"));
    }
    let z = transformed(y, transform)?;
    let n = x.len();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in x {
        mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / nf);
    }
    let centered: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let sq = centered.iter().map(|r| dot(r, r)).sum::<f64>() / nf;
    let eta0 = 0.5 / (sq + 1.0);
    let reg = 1.0 / (params.c * nf);

    let mut w = vec![0.0; d];
    let mut b = z.iter().sum::<f64>() / nf;
    let mut w_avg = vec![0.0; d];
    let mut b_avg = 0.0;
    let mut averaged = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded(params.seed);
    let epochs = params.epochs.max(1);
    let mut t = 0usize;
    for epoch in 0..epochs {
        order.shuffle(&mut r);
        for &i in &order {
            let eta = eta0 / (1.0 + t as f64 / nf);
            t += 1;
            let resid = dot(&w, &centered[i]) + b - z[i];
            let shrink = 1.0 - eta * reg;
            w.iter_mut().for_each(|wi| *wi *= shrink);
            if resid.abs() > params.epsilon {
                let s = eta * resid.signum();
                w.iter_mut().zip(&centered[i]).for_each(|(wi, xi)| *wi -= s * xi);
                b -= s;
            }
            if epoch >= epochs / 2 {
                averaged += 1.0;
                let k = 1.0 / averaged;
                w_avg.iter_mut().zip(&w).for_each(|(a, wi)| *a += (wi - *a) * k);
                b_avg += (b - b_avg) * k;
            }
        }
    }
    let bias = b_avg - dot(&mean, &w_avg);
    Ok(SvrModel {
        weights: w_avg,
        bias,
        params,
        target_transform: transform,
        schema_hash: String::new(),
    })
}

/// Mean absolute percentage error, in percent.
pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<f64, PredictError> {
    if y_true.len() != y_pred.len() {
        return Err(PredictError::Shape {
            rows: y_true.len(),
            targets: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(PredictError::Empty);
    }
    let mut s = 0.0;
    for (i, (t, p)) in y_true.iter().zip(y_pred).enumerate() {
        if *t == 0.0 {
            return Err(PredictError::ZeroTruth(i));
        }
        s += ((t - p) / t).abs();
    }
    Ok(100.0 * s / y_true.len() as f64)
}

/// Kendall τ-b by exhaustive pair counting.
pub fn kendall_tau(y_true: &[f64], y_pred: &[f64]) -> Result<f64, PredictError> {
    if y_true.len() != y_pred.len() {
        return Err(PredictError::Shape {
            rows: y_true.len(),
            targets: y_pred.len(),
        });
    }
    let n = y_true.len();
    if n < 2 {
        return Err(PredictError::TooShort { need: 2, got: n });
    }
    let (mut conc, mut disc, mut only_x, mut only_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = y_true[i].partial_cmp(&y_true[j]).map_or(0, |o| o as i64);
            let dy = y_pred[i].partial_cmp(&y_pred[j]).map_or(0, |o| o as i64);
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => only_x += 1,
                (_, 0) => only_y += 1,
                _ if dx == dy => conc += 1,
                _ => disc += 1,
            }
        }
    }
    // Pairs untied in y_true, and pairs untied in y_pred.
    let untied_true = conc + disc + only_y;
    let untied_pred = conc + disc + only_x;
    if untied_true == 0 || untied_pred == 0 {
        return Err(PredictError::Constant);
    }
    Ok((conc - disc) as f64 / libm::sqrt(untied_true as f64 * untied_pred as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// `lambda: None` picks λ by cross-validation over [`LAMBDA_GRID`].
    Ridge {
        lambda: Option<f64>,
    },
    Svr(SvrParams),
}

impl Default for ModelKind {
    fn default() -> Self {
        ModelKind::Ridge { lambda: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Ridge(RidgeModel),
    Svr(SvrModel),
}

impl Model {
    pub fn fit(
        kind: ModelKind,
        x: &[Vec<f64>],
        y: &[f64],
        transform: TargetTransform,
        seed: u64,
    ) -> Result<Model, PredictError> {
        match kind {
            ModelKind::Ridge { lambda: Some(l) } => fit_ridge(x, y, l, transform).map(Model::Ridge),
            ModelKind::Ridge { lambda: None } => {
                fit_ridge_cv(x, y, &LAMBDA_GRID, CV_FOLDS, transform, seed).map(Model::Ridge)
            }
            ModelKind::Svr(p) => fit_svr_linear(x, y, p, transform).map(Model::Svr),
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Model::Ridge(m) => m.predict(x),
            Model::Svr(m) => m.predict(x),
        }
    }

    pub fn set_schema_hash(&mut self, hash: &str) {
        match self {
            Model::Ridge(m) => m.schema_hash = hash.into(),
            Model::Svr(m) => m.schema_hash = hash.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorEval {
    /// Percent, averaged over trials.
    pub mape: f64,
    pub kendall_tau: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub trials: usize,
}

pub const TRAIN_SIZES: [usize; 4] = [100, 250, 500, 1000];
pub const TRIALS: usize = 10;

/// Learning curve: for each training size, the mean test MAPE and τ over
/// `trials` seeded resamplings. Each trial trains on a random subset of the
/// pool and tests on every remaining sample.
pub fn evaluate_predictor(
    x: &[Vec<f64>],
    y: &[f64],
    sizes: &[usize],
    trials: usize,
    kind: ModelKind,
    transform: TargetTransform,
    seed: u64,
) -> Result<Vec<PredictorEval>, PredictError> {
    check_shape(x, y)?;
    let pool = x.len();
    let mut out = Vec::with_capacity(sizes.len());
    for (si, &size) in sizes.iter().enumerate() {
        if size == 0 || size + 2 > pool {
            return Err(PredictError::PoolTooSmall { pool, train: size });
        }
        let (mut m, mut t) = (0.0, 0.0);
        for trial in 0..trials.max(1) {
            let s = rng::derive(seed, (si * 1000 + trial) as u64);
            let mut idx: Vec<usize> = (0..pool).collect();
            idx.shuffle(&mut rng::seeded(s));
            let (train, test) = idx.split_at(size);
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = Model::fit(kind, &xt, &yt, transform, s)?;
            let truth: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let pred: Vec<f64> = test.iter().map(|&i| model.predict(&x[i])).collect();
            m += mape(&truth, &pred)?;
            t += kendall_tau(&truth, &pred)?;
        }
        let k = trials.max(1) as f64;
        out.push(PredictorEval {
            mape: m / k,
            kendall_tau: t / k,
            n_train: size,
            n_test: pool - size,
            trials: trials.max(1),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn exact_line_at_zero_lambda() {
        let m = fit_ridge(&col(&[1.0, 2.0]), &[2.0, 4.0], 0.0, TargetTransform::Identity).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-12);
        assert!(m.bias.abs() < 1e-12);
    }

    #[test]
    fn centered_closed_form_at_unit_lambda() {
        // Centered x = ±0.5, y = ±1: w = Σxy / (Σx² + λ) = 1 / 1.5.
        let m = fit_ridge(&col(&[1.0, 2.0]), &[2.0, 4.0], 1.0, TargetTransform::Identity).unwrap();
        assert!((m.weights[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.bias - (3.0 - 1.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn huge_lambda_predicts_mean() {
        let x = col(&[1.0, 2.0, 3.0, 7.0]);
        let y = [1.0, 5.0, 2.0, 8.0];
        let m = fit_ridge(&x, &y, 1e9, TargetTransform::Identity).unwrap();
        assert!(m.weights[0].abs() < 1e-6);
        assert!((m.predict(&[100.0]) - 4.0).abs() < 1e-4);
    }

    #[test]
    fn singular_at_zero_lambda() {
        let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        let err = fit_ridge(&x, &[1.0, 2.0, 3.0], 0.0, TargetTransform::Identity).unwrap_err();
        assert_eq!(err, PredictError::IllConditioned { lambda: 0.0 });
    }

    #[test]
    fn log_transform_round_trips_exponential_data() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let y: Vec<f64> = [0.0, 1.0, 2.0, 3.0]
            .iter()
            .map(|v: &f64| libm::exp(2.0 * v + 1.0))
            .collect();
        let m = fit_ridge(&x, &y, 0.0, TargetTransform::Log).unwrap();
        assert!((m.predict(&[1.5]) - libm::exp(4.0)).abs() < 1e-9);
        assert!(fit_ridge(&x, &[1.0, 0.0, 1.0, 1.0], 0.0, TargetTransform::Log).is_err());
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap(), 10.0);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mape(&[0.0, 1.0], &[1.0, 1.0]), Err(PredictError::ZeroTruth(0)));
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[6.0, 5.0, 4.0]).unwrap(), -1.0);
        let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(kendall_tau(&[2.0, 2.0], &[1.0, 3.0]), Err(PredictError::Constant));
    }

    #[test]
    fn svr_huge_epsilon_keeps_zero_weights() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let p = SvrParams {
            epsilon: 1e9,
            ..SvrParams::default()
        };
        let m = fit_svr_linear(&x, &[1.0, 2.0, 3.0, 4.0], p, TargetTransform::Identity).unwrap();
        assert_eq!(m.weights, vec![0.0]);
    }

    #[test]
    fn svr_fits_line_inside_tube() {
        let xs: Vec<f64> = (0..40).map(|i| f64::from(i % 2)).collect();
        let x = col(&xs);
        let y: Vec<f64> = xs.iter().map(|v| 0.5 * v + 1.0).collect();
        let p = SvrParams {
            epsilon: 0.05,
            epochs: 400,
            ..SvrParams::default()
        };
        let m = fit_svr_linear(&x, &y, p, TargetTransform::Identity).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!(
                (m.predict(xi) - yi).abs() <= 0.05 + 1e-2,
                "{} vs {yi}",
                m.predict(xi)
            );
        }
    }

    #[test]
    fn cv_picks_grid_value() {
        let mut r = rng::seeded(1);
        use rand::Rng;
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..5).map(|_| f64::from(r.gen_range(0..2u8))).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 1.0 + v[0] * 2.0 - v[3] + r.gen::<f64>() * 0.1)
            .collect();
        let m = fit_ridge_cv(&x, &y, &LAMBDA_GRID, 5, TargetTransform::Identity, 3).unwrap();
        assert!(LAMBDA_GRID.contains(&m.lambda));
    }

    #[test]
    fn curve_shape_and_pool_check() {
        let mut r = rng::seeded(2);
        use rand::Rng;
        let x: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..6).map(|_| f64::from(r.gen_range(0..2u8))).collect())
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| 10.0 + v.iter().sum::<f64>() + r.gen::<f64>())
            .collect();
        let kind = ModelKind::Ridge { lambda: Some(1.0) };
        let c = evaluate_predictor(&x, &y, &[50, 100], 3, kind, TargetTransform::Identity, 0).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[1].n_train, c[1].n_test), (100, 200));
        assert!(evaluate_predictor(&x, &y, &[1000], 3, kind, TargetTransform::Identity, 0).is_err());
    }
}

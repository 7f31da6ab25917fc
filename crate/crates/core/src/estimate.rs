//! Edge-cost estimation from observed route totals.
//!
//! Two estimators share the edge-indicator model `y = Xβ + ε`:
//!
//! * the Bayesian posterior mean under `β ~ N(μ, R⁻¹)`,
//!   `β̂ = (XᵀX + R)⁻¹(Xᵀy + Rμ)`, with unscaled scatter `(XᵀX + R)⁻¹`
//!   (the noise variance `σ²` is never estimated and stays symbolic);
//! * ridge regression with an unpenalized intercept, penalty chosen by
//!   k-fold cross-validation.
//!
//! `X` is rank-deficient for circuit data (every vertex has degree two), so
//! coefficients are not identified; compare predictions, not coefficients.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{num_edges, Circuit};
use crate::criteria::{Design, PriorSpec};
use crate::error::{Error, Result};
use crate::linalg::cholesky;

/// Observed total costs for a list of driven circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    m: usize,
    circuits: Vec<Circuit>,
    y: Vec<f64>,
}

impl ObservationSet {
    pub fn new(design: &Design, y: Vec<f64>) -> Result<Self> {
        Self::from_parts(design.m(), design.circuits().to_vec(), y)
    }

    /// No observations; estimators fall back to their prior or error out.
    pub fn empty(m: usize) -> Self {
        Self {
            m,
            circuits: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn from_parts(m: usize, circuits: Vec<Circuit>, y: Vec<f64>) -> Result<Self> {
        if circuits.len() != y.len() {
            return Err(Error::Dimension {
                expected: circuits.len(),
                got: y.len(),
            });
        }
        if let Some(c) = circuits.iter().find(|c| c.m() != m) {
            return Err(Error::InvalidInput(format!(
                "circuit {c} does not have {m} vertices"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "observation {i} is not finite ({})",
                y[i]
            )));
        }
        Ok(Self { m, circuits, y })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn circuits(&self) -> &[Circuit] {
        &self.circuits
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn model_matrix(&self) -> DMatrix<f64> {
        let p = num_edges(self.m);
        let mut x = DMatrix::zeros(self.n(), p);
        for (i, c) in self.circuits.iter().enumerate() {
            for s in c.edge_slots() {
                x[(i, s)] = 1.0;
            }
        }
        x
    }

    /// Read the observation CSV (`v1..vm,y`).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let m = headers.len().saturating_sub(1);
        for (i, h) in headers.iter().enumerate() {
            let expected = if i == m { "y".to_string() } else { format!("v{}", i + 1) };
            if h != expected {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("column {} should be {expected:?}, found {h:?}", i + 1),
                });
            }
        }
        let mut circuits = Vec::new();
        let mut y = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| Error::Parse { line: line + 2, msg };
            let seq = rec
                .iter()
                .take(m)
                .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad vertex {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            circuits.push(Circuit::canonicalize(&seq).map_err(|e| bad(e.to_string()))?);
            let v = &rec[m];
            y.push(v.parse::<f64>().map_err(|_| bad(format!("bad cost {v:?}")))?);
        }
        Self::from_parts(m, circuits, y)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.m).map(|i| format!("v{i}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (c, y) in self.circuits.iter().zip(&self.y) {
            let mut row: Vec<String> = c.vertices().iter().map(|v| v.to_string()).collect();
            row.push(format!("{y}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    pub beta_hat: Vec<f64>,
    /// `(XᵀX + R)⁻¹`; the posterior covariance up to the factor `σ²`.
    pub scatter: DMatrix<f64>,
}

/// Posterior mean and scatter of the edge costs.
pub fn posterior_mean(obs: &ObservationSet, prior: &PriorSpec) -> Result<PosteriorEstimate> {
    prior.check_m(obs.m())?;
    let x = obs.model_matrix();
    let y = DVector::from_column_slice(obs.y());
    posterior_from_matrix(&x, &y, &prior.mu, &prior.r_diag)
}

/// Solve `(XᵀX + R) β = Xᵀy + Rμ` for an arbitrary design matrix.
pub fn posterior_from_matrix(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    mu: &[f64],
    r_diag: &[f64],
) -> Result<PosteriorEstimate> {
    let p = x.ncols();
    if mu.len() != p || r_diag.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: mu.len().min(r_diag.len()),
        });
    }
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let mut a = x.tr_mul(x);
    for i in 0..p {
        a[(i, i)] += r_diag[i];
    }
    // Solve for the shift away from μ: (XᵀX + R) δ = Xᵀ(y − Xμ).
    let mu_v = DVector::from_column_slice(mu);
    let resid = y - x * &mu_v;
    let chol = cholesky(a)?;
    let delta = chol.solve(&x.tr_mul(&resid));
    Ok(PosteriorEstimate {
        beta_hat: mu_v.iter().zip(delta.iter()).map(|(m, d)| m + d).collect(),
        scatter: chol.inverse(),
    })
}

/// Predicted total cost of `c` under the posterior mean.
pub fn posterior_predict(c: &Circuit, est: &PosteriorEstimate) -> Result<f64> {
    c.cost(&est.beta_hat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl RidgeFit {
    pub fn predict(&self, c: &Circuit) -> Result<f64> {
        Ok(self.intercept + c.cost(&self.beta)?)
    }
}

/// Ridge regression with an unpenalized intercept on circuit data.
pub fn ridge_fit(obs: &ObservationSet, lambda: f64) -> Result<RidgeFit> {
    if obs.n() == 0 {
        return Err(Error::InvalidInput("ridge regression needs observations".into()));
    }
    ridge_fit_matrix(&obs.model_matrix(), &DVector::from_column_slice(obs.y()), lambda)
}

/// Minimize `‖y − b₀ − Xβ‖² + λ‖β‖²` for an arbitrary design matrix.
pub fn ridge_fit_matrix(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<RidgeFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("penalty must be finite and >= 0, got {lambda}")));
    }
    if y.len() != x.nrows() || x.nrows() == 0 {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let (xc, x_mean) = center_columns(x);
    let y_mean = y.mean();
    let yc = y.add_scalar(-y_mean);
    let p = x.ncols();
    let mut a = xc.tr_mul(&xc);
    for i in 0..p {
        a[(i, i)] += lambda;
    }
    let singular = || {
        Error::Numeric(format!(
            "ridge system is singular at lambda = {lambda}; use a positive penalty"
        ))
    };
    let chol = cholesky(a).map_err(|_| singular())?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    if lo * lo <= 1e-12 * hi * hi {
        return Err(singular());
    }
    let beta = chol.solve(&xc.tr_mul(&yc));
    let intercept = y_mean - x_mean.dot(&beta);
    Ok(RidgeFit {
        intercept,
        beta: beta.iter().copied().collect(),
        lambda,
    })
}

fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (xc, means)
}

/// 100 log-spaced penalties over `[1e-4, 1e2] · (p / n)`.
pub fn default_lambda_grid(p: usize, n: usize) -> Vec<f64> {
    log_grid(1e-4, 1e2, 100)
        .into_iter()
        .map(|l| l * p as f64 / n.max(1) as f64)
        .collect()
}

pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeCv {
    pub lambda: f64,
    pub fit: RidgeFit,
    /// Mean held-out squared error per grid entry.
    pub cv_error: Vec<f64>,
}

/// Fold label of every row after a seeded shuffle.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut label = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        label[row] = pos % folds;
    }
    label
}

/// Ridge regression with the penalty picked by k-fold cross-validation.
///
/// The grid entry with the lowest mean held-out squared error wins (first
/// one on ties); the model is then refit on all rows.
pub fn ridge_cv(obs: &ObservationSet, folds: usize, grid: &[f64], seed: u64) -> Result<RidgeCv> {
    ridge_cv_matrix(&obs.model_matrix(), &DVector::from_column_slice(obs.y()), folds, grid, seed)
}

pub fn ridge_cv_matrix(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<RidgeCv> {
    let n = x.nrows();
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Config(format!("{n} observations cannot fill {folds} folds")));
    }
    if grid.is_empty() || grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Config("penalty grid must be non-empty and strictly positive".into()));
    }
    let labels = fold_assignment(n, folds, seed);
    let mut sse = vec![0.0; grid.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
        let xt = x.select_rows(&train);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let (xtc, x_mean) = center_columns(&xt);
        let y_mean = yt.mean();
        let ytc = yt.add_scalar(-y_mean);

        let mut xs = x.select_rows(&test);
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            col.add_scalar_mut(-x_mean[j]);
        }
        // Dual form: β(λ) = Xcᵀ U (Σ + λ)⁻¹ Uᵀ yc with Xc Xcᵀ = U Σ Uᵀ.
        let k = &xtc * xtc.transpose();
        let eig = SymmetricEigen::new(k);
        let w = eig.eigenvectors.tr_mul(&ytc);
        let g = &xs * xtc.transpose() * &eig.eigenvectors;
        for (li, &lambda) in grid.iter().enumerate() {
            let scaled = DVector::from_iterator(
                w.len(),
                w.iter()
                    .zip(eig.eigenvalues.iter())
                    .map(|(wi, s)| wi / (s.max(0.0) + lambda)),
            );
            let pred = &g * scaled;
            sse[li] += test
                .iter()
                .zip(pred.iter())
                .map(|(&i, p)| (y[i] - y_mean - p).powi(2))
                .sum::<f64>();
        }
    }
    let cv_error: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let best = cv_error
        .iter()
        .enumerate()
        .fold(0, |b, (i, e)| if *e < cv_error[b] { i } else { b });
    let lambda = grid[best];
    let fit = ridge_fit_matrix(x, y, lambda)?;
    Ok(RidgeCv {
        lambda,
        fit,
        cv_error,
    })
}

/// Estimate output file: `{beta_hat: [...], lambda?: number, intercept?: number}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub beta_hat: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
}

impl From<&PosteriorEstimate> for EstimateFile {
    fn from(est: &PosteriorEstimate) -> Self {
        Self {
            beta_hat: est.beta_hat.clone(),
            lambda: None,
            intercept: None,
        }
    }
}

impl From<&RidgeFit> for EstimateFile {
    fn from(fit: &RidgeFit) -> Self {
        Self {
            beta_hat: fit.beta.clone(),
            lambda: Some(fit.lambda),
            intercept: Some(fit.intercept),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::enumerate_all;
    use crate::search::random_design;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noise_free(design: &Design, beta: &[f64]) -> ObservationSet {
        let y = design.circuits().iter().map(|c| c.cost(beta).unwrap()).collect();
        ObservationSet::new(design, y).unwrap()
    }

    fn random_beta(m: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..num_edges(m)).map(|_| rng.random_range(0.1..1.5)).collect()
    }

    #[test]
    fn empty_data_returns_prior_mean() {
        let mu: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let prior = PriorSpec::new(5, mu.clone(), vec![0.7; 10]).unwrap();
        let est = posterior_mean(&ObservationSet::empty(5), &prior).unwrap();
        assert_eq!(est.beta_hat, mu);
    }

    #[test]
    fn noise_free_full_design_predictions() {
        let design = Design::full(4).unwrap();
        let beta = random_beta(4, 1);
        let obs = noise_free(&design, &beta);
        let prior = PriorSpec::isotropic(4, 1e-8).unwrap();
        let est = posterior_mean(&obs, &prior).unwrap();
        for (c, y) in obs.circuits().iter().zip(obs.y()) {
            assert!((posterior_predict(c, &est).unwrap() - y).abs() < 1e-6);
        }
    }

    #[test]
    fn strong_prior_pulls_to_mean() {
        let design = Design::full(5).unwrap();
        let obs = noise_free(&design, &random_beta(5, 2));
        let mu: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let est = posterior_mean(&obs, &PriorSpec::new(5, mu.clone(), vec![1e10; 10]).unwrap()).unwrap();
        for (a, b) in est.beta_hat.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn posterior_residual_identity() {
        let design = random_design(6, 20, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..20).map(|_| rng.random_range(2.0..6.0)).collect();
        let obs = ObservationSet::new(&design, y.clone()).unwrap();
        let mu = random_beta(6, 5);
        let r: Vec<f64> = (0..15).map(|i| 0.01 + 0.1 * i as f64).collect();
        let prior = PriorSpec::new(6, mu.clone(), r.clone()).unwrap();
        let est = posterior_mean(&obs, &prior).unwrap();
        let x = obs.model_matrix();
        let beta = DVector::from_column_slice(&est.beta_hat);
        let mut lhs = x.tr_mul(&x) * &beta - x.tr_mul(&DVector::from_vec(y));
        for i in 0..15 {
            lhs[i] += r[i] * (beta[i] - mu[i]);
        }
        assert!(lhs.amax() < 1e-8);
        assert!((est.scatter.clone() - est.scatter.transpose()).amax() < 1e-10);
    }

    #[test]
    fn posterior_predict_trivia() {
        let c = Circuit::canonicalize(&[1, 3, 2, 5, 4]).unwrap();
        let zero = PosteriorEstimate {
            beta_hat: vec![0.0; 10],
            scatter: DMatrix::identity(10, 10),
        };
        assert_eq!(posterior_predict(&c, &zero).unwrap(), 0.0);
        let mu = random_beta(5, 9);
        let at_mu = PosteriorEstimate {
            beta_hat: mu.clone(),
            scatter: DMatrix::identity(10, 10),
        };
        assert_eq!(posterior_predict(&c, &at_mu).unwrap(), c.cost(&mu).unwrap());
    }

    #[test]
    fn nan_observation_is_rejected() {
        let design = Design::full(4).unwrap();
        let err = ObservationSet::new(&design, vec![1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        assert!(ObservationSet::new(&design, vec![1.0]).is_err());
    }

    #[test]
    fn ridge_limits() {
        let design = random_design(6, 30, 3).unwrap();
        let obs = noise_free(&design, &random_beta(6, 3));
        let fit = ridge_fit(&obs, 1e12).unwrap();
        let mean = obs.y().iter().sum::<f64>() / obs.n() as f64;
        assert!(fit.beta.iter().all(|b| b.abs() < 1e-8));
        assert!((fit.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn ridge_zero_penalty_is_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = DMatrix::from_fn(40, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let truth = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = &x * &truth + DVector::from_fn(40, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal)).add_scalar(2.0);
        let fit = ridge_fit_matrix(&x, &y, 0.0).unwrap();
        // OLS via normal equations on [1, X].
        let mut xa = DMatrix::from_element(40, 5, 1.0);
        xa.view_mut((0, 1), (40, 4)).copy_from(&x);
        let ols = cholesky(xa.tr_mul(&xa)).unwrap().solve(&xa.tr_mul(&y));
        assert!((fit.intercept - ols[0]).abs() < 1e-9);
        for j in 0..4 {
            assert!((fit.beta[j] - ols[j + 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn ridge_zero_penalty_on_circuits_is_singular() {
        let obs = noise_free(&Design::full(5).unwrap(), &random_beta(5, 1));
        let err = ridge_fit(&obs, 0.0).unwrap_err();
        assert!(err.is_numeric(), "{err}");
        assert!(err.to_string().contains("positive penalty"));
    }

    #[test]
    fn ridge_noise_free_roundtrip() {
        let design = Design::full(6).unwrap();
        let obs = noise_free(&design, &random_beta(6, 8));
        let fit = ridge_fit(&obs, 1e-6).unwrap();
        for (c, y) in obs.circuits().iter().zip(obs.y()) {
            assert!((fit.predict(c).unwrap() - y).abs() < 1e-4);
        }
    }

    #[test]
    fn ridge_bayes_bridge() {
        let design = random_design(6, 25, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y = DVector::from_fn(25, |_, _| rng.random_range(2.0..6.0));
        let x = design.model_matrix();
        let c = 0.37;
        let fit = ridge_fit_matrix(&x, &y, c).unwrap();
        let (xc, _) = center_columns(&x);
        let yc = y.add_scalar(-y.mean());
        let post = posterior_from_matrix(&xc, &yc, &[0.0; 15], &[c; 15]).unwrap();
        for (a, b) in fit.beta.iter().zip(&post.beta_hat) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn cv_single_value_grid() {
        let design = random_design(6, 30, 1).unwrap();
        let obs = noise_free(&design, &random_beta(6, 1));
        let cv = ridge_cv(&obs, 10, &[0.5], 1).unwrap();
        assert_eq!(cv.lambda, 0.5);
        assert_eq!(cv.fit, ridge_fit(&obs, 0.5).unwrap());
    }

    #[test]
    fn cv_matches_primal_fold_errors() {
        // Dual-form fold errors against direct primal refits on each fold.
        let design = random_design(6, 24, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = ObservationSet::new(&design, (0..24).map(|_| rng.random_range(2.0..6.0)).collect()).unwrap();
        let grid = [0.01, 0.3, 5.0];
        let cv = ridge_cv(&obs, 4, &grid, 77).unwrap();
        let labels = fold_assignment(24, 4, 77);
        let x = obs.model_matrix();
        for (li, &lambda) in grid.iter().enumerate() {
            let mut sse = 0.0;
            for f in 0..4 {
                let train: Vec<usize> = (0..24).filter(|&i| labels[i] != f).collect();
                let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| obs.y()[i]));
                let fit = ridge_fit_matrix(&x.select_rows(&train), &yt, lambda).unwrap();
                for i in (0..24).filter(|&i| labels[i] == f) {
                    let pred = fit.intercept + x.row(i).iter().zip(&fit.beta).map(|(a, b)| a * b).sum::<f64>();
                    sse += (obs.y()[i] - pred).powi(2);
                }
            }
            assert!((sse / 24.0 - cv.cv_error[li]).abs() < 1e-8);
        }
    }

    #[test]
    fn cv_config_errors() {
        let obs = noise_free(&Design::full(4).unwrap(), &random_beta(4, 1));
        assert!(matches!(ridge_cv(&obs, 10, &[1.0], 0), Err(Error::Config(_))));
        assert!(matches!(ridge_cv(&obs, 1, &[1.0], 0), Err(Error::Config(_))));
        assert!(matches!(ridge_cv(&obs, 2, &[], 0), Err(Error::Config(_))));
    }

    #[test]
    fn cv_prefers_heavy_penalty_on_pure_noise() {
        let m = 6;
        let n = 40;
        let grid = default_lambda_grid(num_edges(m), n);
        let mut hits = 0;
        for trial in 0..100u64 {
            let design = random_design(m, n, trial).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let y = (0..n).map(|_| 5.0 + rng.sample::<f64, _>(StandardNormal)).collect();
            let obs = ObservationSet::new(&design, y).unwrap();
            let cv = ridge_cv(&obs, 10, &grid, trial).unwrap();
            if cv.lambda == *grid.last().unwrap() {
                hits += 1;
            }
        }
        assert!(hits >= 80, "grid maximum chosen in {hits}/100 trials");
    }

    #[test]
    fn cv_prefers_light_penalty_on_strong_signal() {
        let m = 6;
        let n = 40;
        let grid = default_lambda_grid(num_edges(m), n);
        let median = grid[grid.len() / 2];
        let mut hits = 0;
        for trial in 0..100u64 {
            let design = random_design(m, n, trial).unwrap();
            let beta: Vec<f64> = random_beta(m, 500 + trial).iter().map(|b| 10.0 * b).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + trial);
            let y = design
                .circuits()
                .iter()
                .map(|c| c.cost(&beta).unwrap() + 0.01 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let obs = ObservationSet::new(&design, y).unwrap();
            if ridge_cv(&obs, 10, &grid, trial).unwrap().lambda < median {
                hits += 1;
            }
        }
        assert!(hits >= 80, "light penalty chosen in {hits}/100 trials");
    }

    #[test]
    fn grid_shape() {
        let g = default_lambda_grid(190, 49);
        assert_eq!(g.len(), 100);
        assert!((g[0] - 1e-4 * 190.0 / 49.0).abs() < 1e-15);
        assert!((g[99] - 1e2 * 190.0 / 49.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_roundtrip() {
        let design = Design::new(enumerate_all(5).unwrap()).unwrap();
        let obs = noise_free(&design, &random_beta(5, 4));
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("v1,v2,v3,v4,v5,y\n"));
        let back = ObservationSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
        assert!(ObservationSet::read_csv("a,b,y\n1,2,3\n".as_bytes()).is_err());
        assert!(ObservationSet::read_csv("v1,v2,v3,y\n1,2,2,3\n".as_bytes()).is_err());
    }
}

//! Monte Carlo experiments: random delivery instances, congestion noise,
//! estimation, routing, and the design-search efficiency study.
//!
//! Seeding layout, all from [`ScenarioConfig::base_seed`] (`s`):
//!
//! | draw                         | generator                          |
//! |------------------------------|------------------------------------|
//! | instance points              | ChaCha8 `s`, stream 2              |
//! | design search for run size n | [`random_design`] and annealing at `s + n` |
//! | noise for replication r      | ChaCha8 `s`, stream `1000 + r`     |
//! | CV folds for replication r   | `s + r`                            |
//! | insertion order (ARB)        | `s`                                |
//!
//! The instance and the insertion order are fixed per experiment; noise is
//! redrawn per replication and shared across run sizes, so every `n` sees
//! the same realized costs for a given replication.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{edge_slot, num_edges};
use crate::criteria::{full_design_log_det, relative_efficiency_against, Design, PriorSpec};
use crate::error::{Error, Result};
use crate::estimate::{default_lambda_grid, posterior_mean, ridge_cv, ObservationSet};
use crate::routes::{route, Heuristic};
use crate::search::{multi_start, random_design, simulated_annealing_search, Algorithm, SearchConfig};

const INSTANCE_STREAM: u64 = 2;
const NOISE_STREAM_BASE: u64 = 1000;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Normal congestion shocks on the shortest quarter of the edges.
    A,
    /// Noncentral t₃ shocks on every edge, noncentrality `1/β*`.
    B,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "a",
            Scenario::B => "b",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Scenario::A),
            "b" => Ok(Scenario::B),
            _ => Err(Error::Config(format!("unknown scenario {s:?} (expected a or b)"))),
        }
    }
}

/// How the edge costs behind a route were estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Prior mean only; ignores the data.
    Prior,
    /// Ridge regression, penalty by cross-validation.
    Frequentist,
    /// Posterior mean.
    Bayes,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Prior, Method::Frequentist, Method::Bayes];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Prior => "prior",
            Method::Frequentist => "frequentist",
            Method::Bayes => "bayes",
        })
    }
}

/// Which edge costs a finished route is charged with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreAgainst {
    /// The replication's perturbed costs, the ones the observations were drawn from.
    Realized,
    /// The noise-free distances.
    Clean,
}

/// Shock parameters shared by both scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub white_noise_sd: f64,
    pub congestion_mean: f64,
    pub congestion_sd: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            white_noise_sd: 0.1,
            congestion_mean: 0.5,
            congestion_sd: 0.25,
        }
    }
}

/// Experiment settings; unset JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub m: usize,
    pub scenario: Scenario,
    pub noise: NoiseParams,
    pub n_values: Vec<usize>,
    pub replications: usize,
    /// Prior precision is `tau² I`.
    pub tau: f64,
    pub base_seed: u64,
    pub folds: usize,
    pub anneal_iter: usize,
    pub heuristics: Vec<Heuristic>,
    pub score: ScoreAgainst,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 20,
            scenario: Scenario::A,
            noise: NoiseParams::default(),
            n_values: vec![49, 96, 191, 381],
            replications: 100,
            tau: 0.1,
            base_seed: 1,
            folds: 10,
            anneal_iter: 10_000,
            heuristics: vec![Heuristic::Nn, Heuristic::Arb, Heuristic::TwoOpt],
            score: ScoreAgainst::Realized,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m < 4 {
            return bad(format!("m must be >= 4, got {}", self.m));
        }
        let n = &self.noise;
        for (name, v) in [
            ("white_noise_sd", n.white_noise_sd),
            ("congestion_sd", n.congestion_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !n.congestion_mean.is_finite() {
            return bad("congestion_mean must be finite".into());
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values must be non-empty and positive".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.heuristics.is_empty() {
            return bad("at least one heuristic is required".into());
        }
        if self.m > crate::circuit::MAX_ENUMERATE_M && self.heuristics.contains(&Heuristic::Exact) {
            return bad(format!("exact routing is limited to m <= {}", crate::circuit::MAX_ENUMERATE_M));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Delivery zones in the unit square and their pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub points: Vec<(f64, f64)>,
    pub beta_star: Vec<f64>,
}

pub fn generate_instance(m: usize, seed: u64) -> Result<Instance> {
    if m < 3 {
        return Err(Error::InvalidInput(format!("m={m} < 3")));
    }
    let mut rng = stream_rng(seed, INSTANCE_STREAM);
    let points: Vec<(f64, f64)> = (0..m).map(|_| (rng.random(), rng.random())).collect();
    Ok(Instance {
        beta_star: euclidean_costs(&points),
        points,
    })
}

/// Lexicographic vector of pairwise Euclidean distances.
pub fn euclidean_costs(points: &[(f64, f64)]) -> Vec<f64> {
    let m = points.len();
    let mut beta = vec![0.0; num_edges(m)];
    for j in 1..=m {
        for k in j + 1..=m {
            let (a, b) = (points[j - 1], points[k - 1]);
            beta[edge_slot(j, k, m)] = (a.0 - b.0).hypot(a.1 - b.1);
        }
    }
    beta
}

/// Linear-interpolation sample quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Edges strictly below the 25th percentile of `beta`.
pub fn congested_edges(beta: &[f64]) -> Vec<usize> {
    let cut = quantile_sorted(&sorted(beta), 0.25);
    (0..beta.len()).filter(|&i| beta[i] < cut).collect()
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| Error::Config(format!("normal({mean}, {sd}): {e}")))
}

/// Perturbed edge costs for one draw of `scenario`.
pub fn perturb<R: Rng + ?Sized>(
    beta_star: &[f64],
    scenario: Scenario,
    params: &NoiseParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = beta_star.to_vec();
    match scenario {
        Scenario::A => {
            let shock = normal(params.congestion_mean, params.congestion_sd)?;
            for i in congested_edges(beta_star) {
                out[i] += shock.sample(rng);
            }
        }
        Scenario::B => {
            if let Some(i) = beta_star.iter().position(|b| !(*b > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "invalid instance: edge {i} has cost {}, noncentrality 1/cost is undefined",
                    beta_star[i]
                )));
            }
            let chi = ChiSquared::new(3.0).expect("3 degrees of freedom");
            for (o, b) in out.iter_mut().zip(beta_star) {
                *o += noncentral_t3(1.0 / b, rng, &chi);
            }
        }
    }
    let white = normal(0.0, params.white_noise_sd)?;
    for o in &mut out {
        *o += white.sample(rng);
    }
    Ok(out)
}

fn noncentral_t3<R: Rng + ?Sized>(delta: f64, rng: &mut R, chi: &ChiSquared<f64>) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let v = chi.sample(rng);
    (z + delta) / (v / 3.0).sqrt()
}

/// One noncentral t draw with 3 degrees of freedom.
pub fn sample_noncentral_t3<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> f64 {
    noncentral_t3(delta, rng, &ChiSquared::new(3.0).expect("3 degrees of freedom"))
}

pub fn noise_scenario_a(beta_star: &[f64], seed: u64) -> Result<Vec<f64>> {
    perturb(beta_star, Scenario::A, &NoiseParams::default(), &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn noise_scenario_b(beta_star: &[f64], seed: u64) -> Result<Vec<f64>> {
    perturb(beta_star, Scenario::B, &NoiseParams::default(), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Route totals of the design under `perturbed` edge costs.
pub fn simulate_observations(d: &Design, perturbed: &[f64]) -> Result<ObservationSet> {
    let y = d
        .circuits()
        .iter()
        .map(|c| c.cost(perturbed))
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(d, y)
}

/// One row of the results table. `true_cost` is `None` when the
/// estimator failed for that replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub rep: usize,
    pub method: Method,
    pub heuristic: Heuristic,
    pub n: usize,
    pub scenario: Scenario,
    pub true_cost: Option<f64>,
}

/// Everything fixed across the replications of one `(config, n)` cell.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ScenarioConfig,
    pub n: usize,
    pub instance: Instance,
    pub design: Design,
    pub prior: PriorSpec,
    pub grid: Vec<f64>,
}

impl Experiment {
    /// Draw the instance and search an `n`-run design by annealing (one start).
    pub fn prepare(cfg: &ScenarioConfig, n: usize) -> Result<Self> {
        cfg.validate()?;
        let instance = generate_instance(cfg.m, cfg.base_seed)?;
        let prior = PriorSpec::with_mean(instance.beta_star.clone(), cfg.tau * cfg.tau)?;
        let design_seed = cfg.base_seed.wrapping_add(n as u64);
        let d0 = random_design(cfg.m, n, design_seed)?;
        let search = SearchConfig {
            max_iter: cfg.anneal_iter,
            restarts: 1,
            ..SearchConfig::anneal().with_seed(design_seed)
        };
        let design = simulated_annealing_search(&d0, &prior, &search)?.design;
        Ok(Self {
            cfg: cfg.clone(),
            n,
            grid: default_lambda_grid(num_edges(cfg.m), n),
            instance,
            design,
            prior,
        })
    }

    /// Perturbed edge costs of replication `rep`.
    pub fn realized_costs(&self, rep: usize) -> Result<Vec<f64>> {
        let mut rng = stream_rng(self.cfg.base_seed, NOISE_STREAM_BASE + rep as u64);
        perturb(&self.instance.beta_star, self.cfg.scenario, &self.cfg.noise, &mut rng)
    }

    /// Edge-cost estimate of each method for replication `rep`.
    pub fn estimates(&self, rep: usize) -> Result<Vec<(Method, Result<Vec<f64>>)>> {
        let realized = self.realized_costs(rep)?;
        let obs = simulate_observations(&self.design, &realized)?;
        Ok(self.estimates_from(&obs, rep))
    }

    fn estimates_from(&self, obs: &ObservationSet, rep: usize) -> Vec<(Method, Result<Vec<f64>>)> {
        Method::ALL
            .iter()
            .map(|&method| {
                let est = match method {
                    Method::Prior => Ok(self.prior.mu.clone()),
                    Method::Frequentist => {
                        let seed = self.cfg.base_seed.wrapping_add(rep as u64);
                        ridge_cv(obs, self.cfg.folds, &self.grid, seed).map(|cv| cv.fit.beta)
                    }
                    Method::Bayes => posterior_mean(obs, &self.prior).map(|p| p.beta_hat),
                };
                (method, est)
            })
            .collect()
    }

    /// Methods × heuristics results for replication `rep`.
    pub fn run_replication(&self, rep: usize) -> Result<Vec<ReplicationResult>> {
        let realized = self.realized_costs(rep)?;
        let obs = simulate_observations(&self.design, &realized)?;
        let score = match self.cfg.score {
            ScoreAgainst::Realized => &realized,
            ScoreAgainst::Clean => &self.instance.beta_star,
        };
        let mut out = Vec::new();
        for (method, est) in self.estimates_from(&obs, rep) {
            for &heuristic in &self.cfg.heuristics {
                let true_cost = match &est {
                    Ok(beta) => Some(route(heuristic, beta, self.cfg.m, self.cfg.base_seed)?.cost(score)?),
                    Err(_) => None,
                };
                out.push(ReplicationResult {
                    rep,
                    method,
                    heuristic,
                    n: self.n,
                    scenario: self.cfg.scenario,
                    true_cost,
                });
            }
        }
        Ok(out)
    }

    /// All replications, in replication order regardless of thread count.
    pub fn run(&self) -> Result<Vec<ReplicationResult>> {
        let per_rep = (0..self.cfg.replications)
            .into_par_iter()
            .map(|r| self.run_replication(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_rep.into_iter().flatten().collect())
    }
}

/// Build the experiment for `n` and run a single replication.
pub fn run_replication(cfg: &ScenarioConfig, n: usize, rep: usize) -> Result<Vec<ReplicationResult>> {
    Experiment::prepare(cfg, n)?.run_replication(rep)
}

/// Every run size in the config, ordered by `n` then replication.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<ReplicationResult>> {
    cfg.validate()?;
    let mut all = Vec::new();
    for &n in &cfg.n_values {
        all.extend(Experiment::prepare(cfg, n)?.run()?);
    }
    Ok(all)
}

pub fn write_results_csv<W: Write>(results: &[ReplicationResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rep", "method", "heuristic", "n", "scenario", "true_cost"])?;
    for r in results {
        w.write_record([
            r.rep.to_string(),
            r.method.to_string(),
            r.heuristic.to_string(),
            r.n.to_string(),
            r.scenario.to_string(),
            r.true_cost.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Box-plot statistics of one (scenario, n, method, heuristic) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub n: usize,
    pub method: Method,
    pub heuristic: Heuristic,
    pub count: usize,
    pub missing: usize,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

/// Per-cell quantiles, cells in sorted key order.
pub fn summarize(results: &[ReplicationResult]) -> Vec<CellSummary> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<_, (Vec<f64>, usize)> = BTreeMap::new();
    for r in results {
        let e = cells
            .entry((r.scenario, r.n, r.method, r.heuristic))
            .or_default();
        match r.true_cost {
            Some(c) => e.0.push(c),
            None => e.1 += 1,
        }
    }
    cells
        .into_iter()
        .map(|((scenario, n, method, heuristic), (costs, missing))| {
            let s = sorted(&costs);
            let q = |p: f64| (!s.is_empty()).then(|| quantile_sorted(&s, p));
            CellSummary {
                scenario,
                n,
                method,
                heuristic,
                count: s.len(),
                missing,
                min: s.first().copied(),
                q1: q(0.25),
                median: q(0.5),
                q3: q(0.75),
                max: s.last().copied(),
            }
        })
        .collect()
}

/// Median true cost of one cell, if present.
pub fn cell_median(
    summary: &[CellSummary],
    n: usize,
    method: Method,
    heuristic: Heuristic,
) -> Option<f64> {
    summary
        .iter()
        .find(|c| c.n == n && c.method == method && c.heuristic == heuristic)
        .and_then(|c| c.median)
}

/// Settings for the design-search efficiency study.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2Config {
    pub seed: u64,
    pub restarts: usize,
    /// `None` uses the algorithm's default budget.
    pub max_iter: Option<usize>,
    pub precision: f64,
}

impl Default for Table2Config {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 10,
            max_iter: None,
            precision: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Result {
    pub m: usize,
    pub n: usize,
    pub algorithm: String,
    pub trials: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Per-trial relative D-efficiency, in trial order.
    pub efficiencies: Vec<f64>,
}

/// Median relative D-efficiency of `trials` independent best-of-restarts
/// searches. Trial `t` seeds its restarts from `seed + 1000 t`.
pub fn replicate_table2(
    m: usize,
    n: usize,
    algorithm: Algorithm,
    trials: usize,
    cfg: &Table2Config,
) -> Result<Table2Result> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if cfg.restarts > 1000 {
        return Err(Error::Config("restarts must be <= 1000 so trial seeds do not overlap".into()));
    }
    let prior = PriorSpec::isotropic(m, cfg.precision)?;
    let reference = full_design_log_det(&prior)?;
    let efficiencies = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut search = SearchConfig::for_algorithm(algorithm).with_seed(cfg.seed.wrapping_add(1000 * t));
            search.restarts = cfg.restarts;
            if let Some(it) = cfg.max_iter {
                search.max_iter = it;
            }
            let out = multi_start(algorithm, m, n, &prior, &search)?;
            relative_efficiency_against(&out.design, &prior, reference)
        })
        .collect::<Result<Vec<_>>>()?;
    let s = sorted(&efficiencies);
    Ok(Table2Result {
        m,
        n,
        algorithm: algorithm.to_string(),
        trials,
        median: quantile_sorted(&s, 0.5),
        q1: quantile_sorted(&s, 0.25),
        q3: quantile_sorted(&s, 0.75),
        efficiencies,
    })
}

//! Heuristic search for high-efficiency designs of arbitrary run size.
//!
//! Both searches move through designs by swapping two adjacent vertices in
//! one row (positions `2..m`, vertex 1 pinned first), so every intermediate
//! row stays a Hamiltonian circuit. Criterion changes are computed from a
//! maintained inverse of `XᵀX + R` with a rank-two determinant update,
//! which costs `O(m²)` per proposal instead of a fresh factorization.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{num_edges, tour_slots, Circuit};
use crate::criteria::{Design, PriorSpec};
use crate::error::{Error, Result};
use crate::linalg::cholesky;

/// Accepted exchanges between full refactorizations of the tracked inverse.
const REFRESH_EVERY: usize = 256;

/// Minimum log-determinant gain that counts as an improvement.
const IMPROVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Bubble,
    Anneal,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bubble" => Ok(Self::Bubble),
            "anneal" => Ok(Self::Anneal),
            other => Err(Error::Config(format!(
                "unknown search algorithm {other:?} (expected bubble or anneal)"
            ))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bubble => "bubble",
            Self::Anneal => "anneal",
        })
    }
}

/// Annealing temperature `scale / ln(t + 2)` at iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cooling {
    pub scale: f64,
}

impl Default for Cooling {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl Cooling {
    pub fn temperature(&self, t: usize) -> f64 {
        self.scale / ((t + 2) as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Outer passes for bubble sort, proposals for annealing.
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub cooling: Cooling,
    /// Keep the criterion value after every accepted move.
    pub record_history: bool,
}

impl SearchConfig {
    pub fn bubble() -> Self {
        Self {
            max_iter: 100,
            restarts: 10,
            seed: 0,
            cooling: Cooling::default(),
            record_history: false,
        }
    }

    pub fn anneal() -> Self {
        Self {
            max_iter: 10_000,
            ..Self::bubble()
        }
    }

    pub fn for_algorithm(algo: Algorithm) -> Self {
        match algo {
            Algorithm::Bubble => Self::bubble(),
            Algorithm::Anneal => Self::anneal(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if !(self.cooling.scale >= 0.0) {
            return Err(Error::Config("cooling scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub design: Design,
    /// `log det(XᵀX + R)` of `design`.
    pub log_det: f64,
    /// Criterion after each accepted move, when requested.
    pub history: Vec<f64>,
}

/// `n` uniformly random circuits on `m` vertices.
pub fn random_design(m: usize, n: usize, seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(Error::InvalidInput("run count must be >= 1".into()));
    }
    if m < 3 {
        return Err(Error::InvalidInput(format!("m={m} < 3")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let mut tail: Vec<usize> = (2..=m).collect();
            tail.shuffle(&mut rng);
            let mut v = Vec::with_capacity(m);
            v.push(1);
            v.extend(tail);
            Circuit::canonicalize(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    Design::new(rows)
}

/// Running `(XᵀX + R)⁻¹` and `log det(XᵀX + R)` for a design under edit.
pub(crate) struct InformationState {
    p: usize,
    r_diag: Vec<f64>,
    rows: Vec<Vec<usize>>,
    slots: Vec<Vec<usize>>,
    ainv: Vec<f64>,
    log_det: f64,
    since_refresh: usize,
    scratch_u: Vec<f64>,
}

impl InformationState {
    pub(crate) fn new(design: &Design, prior: &PriorSpec) -> Result<Self> {
        prior.check_m(design.m())?;
        let rows: Vec<Vec<usize>> = design.circuits().iter().map(|c| c.vertices().to_vec()).collect();
        let slots = rows.iter().map(|r| tour_slots(r)).collect();
        let p = num_edges(design.m());
        let mut state = Self {
            p,
            r_diag: prior.r_diag.clone(),
            rows,
            slots,
            ainv: vec![0.0; p * p],
            log_det: 0.0,
            since_refresh: 0,
            scratch_u: vec![0.0; p],
        };
        state.refresh()?;
        Ok(state)
    }

    /// Recompute the inverse and log-determinant from scratch.
    pub(crate) fn refresh(&mut self) -> Result<()> {
        let p = self.p;
        let mut a = nalgebra::DMatrix::<f64>::zeros(p, p);
        for (i, r) in self.r_diag.iter().enumerate() {
            a[(i, i)] = *r;
        }
        for s in &self.slots {
            for &i in s {
                for &j in s {
                    a[(i, j)] += 1.0;
                }
            }
        }
        let chol = cholesky(a)?;
        self.log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let inv = chol.inverse();
        for i in 0..p {
            for j in 0..p {
                self.ainv[i * p + j] = inv[(i, j)];
            }
        }
        self.since_refresh = 0;
        Ok(())
    }

    pub(crate) fn log_det(&self) -> f64 {
        self.log_det
    }

    pub(crate) fn n(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    fn quad(&self, u: &[usize], v: &[usize]) -> f64 {
        let p = self.p;
        u.iter()
            .map(|&s| v.iter().map(|&t| self.ainv[s * p + t]).sum::<f64>())
            .sum()
    }

    /// Change in `log det` if row `i`'s edges were replaced by `new_slots`.
    pub(crate) fn exchange_delta(&self, i: usize, new_slots: &[usize]) -> f64 {
        let old = &self.slots[i];
        let a = self.quad(new_slots, new_slots);
        let b = self.quad(new_slots, old);
        let c = self.quad(old, old);
        let ratio = (1.0 + a) * (1.0 - c) + b * b;
        if ratio > 0.0 {
            ratio.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn rank_one(&mut self, slots: &[usize], sign: f64) {
        let p = self.p;
        let u = &mut self.scratch_u;
        u.iter_mut().for_each(|x| *x = 0.0);
        for &s in slots {
            for (k, uk) in u.iter_mut().enumerate() {
                *uk += self.ainv[k * p + s];
            }
        }
        let denom = 1.0 + sign * slots.iter().map(|&s| u[s]).sum::<f64>();
        let scale = sign / denom;
        for k in 0..p {
            let f = scale * u[k];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.ainv[k * p..(k + 1) * p];
            for (a, ul) in row.iter_mut().zip(u.iter()) {
                *a -= f * ul;
            }
        }
    }

    /// Replace row `i` by `order`; `delta` must come from [`Self::exchange_delta`].
    pub(crate) fn apply_exchange(&mut self, i: usize, order: Vec<usize>, new_slots: Vec<usize>, delta: f64) -> Result<()> {
        self.rank_one(&new_slots, 1.0);
        let old = std::mem::replace(&mut self.slots[i], new_slots);
        self.rank_one(&old, -1.0);
        self.rows[i] = order;
        self.log_det += delta;
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.refresh()?;
        }
        Ok(())
    }

    pub(crate) fn design(&self) -> Result<Design> {
        Design::new(
            self.rows
                .iter()
                .map(|r| Circuit::canonicalize(r))
                .collect::<Result<_>>()?,
        )
    }
}

fn swapped(row: &[usize], j: usize) -> Vec<usize> {
    let mut v = row.to_vec();
    v.swap(j, j + 1);
    v
}

/// Greedy adjacent-exchange search.
///
/// Each outer pass visits every row and keeps sweeping positions
/// `2..m` of that row, accepting each swap that raises the criterion,
/// until a sweep accepts nothing. Stops after `max_iter` passes or after a
/// pass with no accepted swap.
pub fn bubble_sort_search(d0: &Design, prior: &PriorSpec, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut state = InformationState::new(d0, prior)?;
    let m = d0.m();
    let mut history = Vec::new();
    if cfg.record_history {
        history.push(state.log_det());
    }
    for _ in 0..cfg.max_iter {
        let mut pass_changed = false;
        for r in 0..state.n() {
            loop {
                let mut sweep_changed = false;
                for j in 1..m - 1 {
                    let order = swapped(state.row(r), j);
                    let slots = tour_slots(&order);
                    let delta = state.exchange_delta(r, &slots);
                    if delta > IMPROVE_TOL {
                        state.apply_exchange(r, order, slots, delta)?;
                        sweep_changed = true;
                        if cfg.record_history {
                            history.push(state.log_det());
                        }
                    }
                }
                if !sweep_changed {
                    break;
                }
                pass_changed = true;
            }
        }
        if !pass_changed {
            break;
        }
    }
    state.refresh()?;
    Ok(SearchOutcome {
        design: state.design()?,
        log_det: state.log_det(),
        history,
    })
}

/// Simulated annealing over adjacent swaps with logarithmic cooling.
///
/// A move that raises the criterion is always taken; one that lowers it by
/// `|Δ|` is taken with probability `exp(Δ / T(t))`. Returns the best design
/// visited.
pub fn simulated_annealing_search(
    d0: &Design,
    prior: &PriorSpec,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut state = InformationState::new(d0, prior)?;
    let m = d0.m();
    let mut rng = search_rng(cfg.seed);
    let mut best_val = state.log_det();
    let mut best_rows = state.rows.clone();
    let mut history = Vec::new();
    if cfg.record_history {
        history.push(best_val);
    }
    if m < 4 {
        // Only one circuit exists; nothing to explore.
        return Ok(SearchOutcome {
            design: state.design()?,
            log_det: best_val,
            history,
        });
    }
    for t in 0..cfg.max_iter {
        let i = rng.random_range(0..state.n());
        let j = rng.random_range(1..m - 1);
        let order = swapped(state.row(i), j);
        let slots = tour_slots(&order);
        let delta = state.exchange_delta(i, &slots);
        let u: f64 = rng.random();
        let accept = if delta >= 0.0 {
            true
        } else {
            let temp = cfg.cooling.temperature(t);
            temp > 0.0 && u < (delta / temp).exp()
        };
        if accept {
            state.apply_exchange(i, order, slots, delta)?;
            if cfg.record_history {
                history.push(state.log_det());
            }
            if state.log_det() > best_val + IMPROVE_TOL {
                best_val = state.log_det();
                best_rows.clone_from(&state.rows);
            }
        }
    }
    let design = Design::new(
        best_rows
            .iter()
            .map(|r| Circuit::canonicalize(r))
            .collect::<Result<_>>()?,
    )?;
    let log_det = crate::criteria::bayes_d_criterion(&design, prior)?;
    Ok(SearchOutcome {
        design,
        log_det,
        history,
    })
}

fn search_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Run one search from `d0` with the chosen algorithm.
pub fn run_search(algo: Algorithm, d0: &Design, prior: &PriorSpec, cfg: &SearchConfig) -> Result<SearchOutcome> {
    match algo {
        Algorithm::Bubble => bubble_sort_search(d0, prior, cfg),
        Algorithm::Anneal => simulated_annealing_search(d0, prior, cfg),
    }
}

/// Best of `cfg.restarts` searches from random designs; restart `r` is
/// seeded with `cfg.seed + r`. Ties go to the lowest restart index.
pub fn multi_start(
    algo: Algorithm,
    m: usize,
    n: usize,
    prior: &PriorSpec,
    cfg: &SearchConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    prior.check_m(m)?;
    let runs = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r);
            let d0 = random_design(m, n, seed)?;
            let run_cfg = SearchConfig {
                seed,
                ..cfg.clone()
            };
            run_search(algo, &d0, prior, &run_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<SearchOutcome> = None;
    for out in runs {
        if best.as_ref().is_none_or(|b| out.log_det > b.log_det) {
            best = Some(out);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

//! Turning edge-cost vectors into routes.
//!
//! Every heuristic reads a lexicographic cost vector of length `C(m, 2)`
//! and returns a canonical [`Circuit`]. Costs may be any finite reals
//! (estimated costs can be negative); only [`nn_bound_check`] needs a metric.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{enumerate_all, CostMatrix, Circuit, MAX_ENUMERATE_M};
use crate::error::{Error, Result};

/// Route construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heuristic {
    /// Nearest neighbor, best of all `m-1` first vertices.
    Nn,
    /// Arbitrary insertion.
    Arb,
    /// 2-opt started from the best nearest-neighbor route.
    TwoOpt,
    /// Brute-force optimum (`m <= 10`).
    Exact,
}

impl Heuristic {
    pub fn id(self) -> &'static str {
        match self {
            Heuristic::Nn => "nn",
            Heuristic::Arb => "arb",
            Heuristic::TwoOpt => "2opt",
            Heuristic::Exact => "exact",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Heuristic::Nn),
            "arb" => Ok(Heuristic::Arb),
            "2opt" => Ok(Heuristic::TwoOpt),
            "exact" => Ok(Heuristic::Exact),
            _ => Err(Error::Config(format!(
                "unknown route algorithm {s:?} (expected nn, arb, 2opt or exact)"
            ))),
        }
    }
}

impl Serialize for Heuristic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Heuristic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Passes allowed to [`two_opt_improve`] when called through [`route`].
pub const DEFAULT_TWO_OPT_PASSES: usize = 1000;

/// Build a route with `heuristic`; `seed` only matters for [`Heuristic::Arb`].
pub fn route(heuristic: Heuristic, beta: &[f64], m: usize, seed: u64) -> Result<Circuit> {
    match heuristic {
        Heuristic::Nn => nn_multi_start(beta, m),
        Heuristic::Arb => arbitrary_insertion_route(beta, m, seed),
        Heuristic::TwoOpt => {
            let start = nn_multi_start(beta, m)?;
            two_opt_improve(&start, beta, DEFAULT_TWO_OPT_PASSES)
        }
        Heuristic::Exact => brute_force_optimal(beta, m),
    }
}

/// Greedy tour from the depot `m`.
///
/// With `first_vertex`, the path is `m, first_vertex, …`; the rest is
/// filled by repeatedly moving to the cheapest unvisited vertex (lowest
/// index on ties).
pub fn nearest_neighbor_route(beta: &[f64], m: usize, first_vertex: Option<usize>) -> Result<Circuit> {
    let cost = CostMatrix::new(beta, m)?;
    if let Some(f) = first_vertex {
        if f == 0 || f >= m {
            return Err(Error::InvalidInput(format!(
                "first vertex must be in 1..={}, got {f}",
                m - 1
            )));
        }
    }
    Circuit::canonicalize(&nn_path(&cost, first_vertex))
}

fn nn_path(cost: &CostMatrix, first: Option<usize>) -> Vec<usize> {
    let m = cost.m();
    let mut visited = vec![false; m + 1];
    let mut path = Vec::with_capacity(m);
    path.push(m);
    visited[m] = true;
    if let Some(f) = first {
        path.push(f);
        visited[f] = true;
    }
    while path.len() < m {
        let last = *path.last().unwrap();
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for v in 1..=m {
            if !visited[v] && (best == 0 || cost.get(last, v) < best_cost) {
                best = v;
                best_cost = cost.get(last, v);
            }
        }
        path.push(best);
        visited[best] = true;
    }
    path
}

/// Nearest neighbor from every first vertex `1..m`; the cheapest tour under
/// `beta` wins, the lowest first vertex on ties.
pub fn nn_multi_start(beta: &[f64], m: usize) -> Result<Circuit> {
    let cost = CostMatrix::new(beta, m)?;
    let (path, _) = nn_all_starts(&cost)
        .into_iter()
        .fold(None, |best: Option<(Vec<usize>, f64)>, (p, c)| match best {
            Some((_, bc)) if bc <= c => best,
            _ => Some((p, c)),
        })
        .expect("m >= 3");
    Circuit::canonicalize(&path)
}

fn nn_all_starts(cost: &CostMatrix) -> Vec<(Vec<usize>, f64)> {
    (1..cost.m())
        .map(|f| {
            let p = nn_path(cost, Some(f));
            let c = cost.tour_cost(&p);
            (p, c)
        })
        .collect()
}

/// Insertion heuristic: a seeded random vertex order, the first three form
/// a triangle and each further vertex goes where it adds the least cost
/// (earliest position on ties).
pub fn arbitrary_insertion_route(beta: &[f64], m: usize, seed: u64) -> Result<Circuit> {
    let cost = CostMatrix::new(beta, m)?;
    let mut order: Vec<usize> = (1..=m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut tour = order[..3].to_vec();
    for &u in &order[3..] {
        let len = tour.len();
        let mut best_pos = 0;
        let mut best_inc = f64::INFINITY;
        for i in 0..len {
            let (a, b) = (tour[i], tour[(i + 1) % len]);
            let inc = cost.get(a, u) + cost.get(u, b) - cost.get(a, b);
            if inc < best_inc {
                best_inc = inc;
                best_pos = i + 1;
            }
        }
        tour.insert(best_pos, u);
    }
    Circuit::canonicalize(&tour)
}

/// Best-improvement 2-opt. Each pass applies the single exchange with the
/// largest cost drop; stops at a local optimum or after `max_passes`.
pub fn two_opt_improve(c: &Circuit, beta: &[f64], max_passes: usize) -> Result<Circuit> {
    Ok(two_opt_trace(c, beta, max_passes)?.0)
}

/// [`two_opt_improve`] plus the tour cost after each pass (starting cost first).
pub fn two_opt_trace(c: &Circuit, beta: &[f64], max_passes: usize) -> Result<(Circuit, Vec<f64>)> {
    let m = c.m();
    let cost = CostMatrix::new(beta, m)?;
    let mut tour = c.vertices().to_vec();
    let mut trace = vec![cost.tour_cost(&tour)];
    let tol = 1e-12;
    for _ in 0..max_passes {
        let mut best = (0, 0, -tol);
        // Replace edges (t[i], t[i+1]) and (t[j], t[j+1]) by (t[i], t[j]) and (t[i+1], t[j+1]).
        for i in 0..m - 2 {
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                let (a, b) = (tour[i], tour[i + 1]);
                let (x, y) = (tour[j], tour[(j + 1) % m]);
                let delta = cost.get(a, x) + cost.get(b, y) - cost.get(a, b) - cost.get(x, y);
                if delta < best.2 {
                    best = (i, j, delta);
                }
            }
        }
        if best.2 >= -tol {
            break;
        }
        tour[best.0 + 1..=best.1].reverse();
        trace.push(cost.tour_cost(&tour));
    }
    Ok((Circuit::canonicalize(&tour)?, trace))
}

/// Exact minimizer over every circuit (lexicographically first on ties).
pub fn brute_force_optimal(beta: &[f64], m: usize) -> Result<Circuit> {
    if m > MAX_ENUMERATE_M {
        return Err(Error::SizeLimit {
            what: format!("brute-force routing for m={m}"),
            count: crate::circuit::num_circuits(m),
            limit: crate::circuit::num_circuits(MAX_ENUMERATE_M),
        });
    }
    let cost = CostMatrix::new(beta, m)?;
    let mut best: Option<(Circuit, f64)> = None;
    for c in enumerate_all(m)? {
        let v = cost.tour_cost(c.vertices());
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((c, v));
        }
    }
    Ok(best.expect("at least one circuit").0)
}

/// Approximation factor `0.5 ⌈log₂ m⌉ + 0.5` of nearest neighbor on metric instances.
pub fn nn_bound(m: usize) -> f64 {
    let ceil_log2 = usize::BITS - (m.max(1) - 1).leading_zeros();
    0.5 * ceil_log2 as f64 + 0.5
}

/// Check the triangle inequality on every triple (relative slack 1e-12).
pub fn check_metric(beta: &[f64], m: usize) -> Result<()> {
    let cost = CostMatrix::new(beta, m)?;
    for i in 1..=m {
        for j in 1..=m {
            for k in 1..=m {
                if i == j || j == k || i == k {
                    continue;
                }
                let direct = cost.get(i, k);
                let via = cost.get(i, j) + cost.get(j, k);
                if direct > via + 1e-12 * direct.abs().max(1.0) {
                    return Err(Error::Precondition(format!(
                        "costs are not metric: c({i},{k}) = {direct} > c({i},{j}) + c({j},{k}) = {via}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Worst ratio, over all `m-1` nearest-neighbor starts, of tour cost to the
/// brute-force optimum. Compare against [`nn_bound`].
pub fn nn_bound_check(beta: &[f64], m: usize) -> Result<f64> {
    check_metric(beta, m)?;
    let cost = CostMatrix::new(beta, m)?;
    let opt = cost.tour_cost(brute_force_optimal(beta, m)?.vertices());
    let worst = nn_all_starts(&cost)
        .into_iter()
        .map(|(_, c)| c)
        .fold(f64::NEG_INFINITY, f64::max);
    if opt <= 0.0 {
        return Ok(if worst <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(worst / opt)
}

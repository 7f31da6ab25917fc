//! Exact construction of optimal fractional designs.
//!
//! Small vertex counts are seeded from a known optimal design (or found by
//! exhaustive search). Larger ones are grown one vertex at a time: every
//! row of the `(m-1)`-vertex design is expanded into its `m-1` cyclic
//! rotations, relabelled `v -> v+1`, and prefixed with vertex 1. When the
//! seed has the full design's per-run moment matrix, so does every design
//! in the chain.

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::circuit::{enumerate_all, num_circuits, num_edges, Circuit};
use crate::criteria::{Design, PriorSpec};
use crate::error::{Error, Result};
use crate::linalg::log_det_spd;

/// Upper bound on the number of candidate designs the exhaustive oracle scores.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

/// Six-run optimal design for five vertices.
pub const TABLE1_M5: [[usize; 5]; 6] = [
    [1, 2, 4, 3, 5],
    [1, 2, 3, 5, 4],
    [1, 2, 5, 4, 3],
    [1, 5, 2, 3, 4],
    [1, 3, 2, 4, 5],
    [1, 3, 5, 2, 4],
];

/// Known optimal seed design for `m` in `{4, 5}`.
///
/// For `m = 5` this is the six-run table above, verbatim. For `m = 4` it is
/// the best six-run multiset found by exhaustive search, which is the full
/// design (three circuits) taken twice.
pub fn base_design(m: usize) -> Result<Design> {
    match m {
        5 => Design::new(
            TABLE1_M5
                .iter()
                .map(|row| Circuit::canonicalize(row))
                .collect::<Result<_>>()?,
        ),
        4 => {
            let mut rows = enumerate_all(4)?;
            rows.extend(enumerate_all(4)?);
            Ok(Design::new(rows)?)
        }
        _ => Err(Error::InvalidInput(format!(
            "no base design for m={m}; use recursive_expand from m=5 or a search algorithm"
        ))),
    }
}

/// Grow a design on `m-1` vertices into one on `m` vertices.
///
/// Row `(a_1, …, a_{m-1})` yields the rotations
/// `(a_1, …, a_{m-1})`, `(a_{m-1}, a_1, …, a_{m-2})`, …, each mapped to
/// `(1, a_1+1, …)`. Output rows are canonicalized; block order follows the
/// input row order.
pub fn recursive_expand(d: &Design) -> Result<Design> {
    let k = d.m();
    let mut rows = Vec::with_capacity(d.n() * k);
    for c in d.circuits() {
        let mut cur = c.vertices().to_vec();
        for _ in 0..k {
            let mut next = Vec::with_capacity(k + 1);
            next.push(1);
            next.extend(cur.iter().map(|v| v + 1));
            rows.push(Circuit::canonicalize(&next)?);
            cur.rotate_right(1);
        }
    }
    Design::new(rows)
}

/// Optimal design for `m >= 4` from the seed chain: the base design for
/// `m <= 5`, otherwise repeated expansion of the five-vertex table.
pub fn half_fraction(m: usize) -> Result<Design> {
    if m <= 5 {
        return base_design(m);
    }
    let mut d = base_design(5)?;
    while d.m() < m {
        d = recursive_expand(&d)?;
    }
    Ok(d)
}

/// Expand `d` repeatedly until it has `m` vertices.
pub fn expand_to(d: Design, m: usize) -> Result<Design> {
    if d.m() > m {
        return Err(Error::InvalidInput(format!(
            "design has {} vertices, cannot shrink to {m}",
            d.m()
        )));
    }
    let mut d = d;
    while d.m() < m {
        d = recursive_expand(&d)?;
    }
    Ok(d)
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Best `n`-subset (without replacement) of all circuits on `m` vertices.
///
/// Ties are broken towards the lexicographically first subset.
pub fn exhaustive_optimal(m: usize, n: usize, prior: &PriorSpec) -> Result<Design> {
    let total = num_circuits(m);
    let count = binomial(total, n as u128);
    exhaustive_search(m, n, prior, count, false)
}

/// Best `n`-run multiset of circuits on `m` vertices (repeats allowed).
pub fn exhaustive_optimal_multiset(m: usize, n: usize, prior: &PriorSpec) -> Result<Design> {
    let total = num_circuits(m);
    let count = binomial(total + n as u128 - 1, n as u128);
    exhaustive_search(m, n, prior, count, true)
}

fn exhaustive_search(
    m: usize,
    n: usize,
    prior: &PriorSpec,
    count: u128,
    with_replacement: bool,
) -> Result<Design> {
    prior.check_m(m)?;
    if n == 0 {
        return Err(Error::InvalidInput("run count must be >= 1".into()));
    }
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::SizeLimit {
            what: format!("exhaustive search over {n}-run designs for m={m}"),
            count,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let all = enumerate_all(m)?;
    if count == 0 {
        return Err(Error::InvalidInput(format!(
            "no {n}-subset of the {} circuits for m={m}",
            all.len()
        )));
    }
    let slots: Vec<Vec<usize>> = all.iter().map(|c| c.edge_slots()).collect();
    let p = num_edges(m);
    let mut base = DMatrix::zeros(p, p);
    for (i, r) in prior.r_diag.iter().enumerate() {
        base[(i, i)] = *r;
    }

    let score = |idx: &[usize]| -> Result<f64> {
        let mut a = base.clone();
        for &i in idx {
            for &s in &slots[i] {
                for &t in &slots[i] {
                    a[(s, t)] += 1.0;
                }
            }
        }
        log_det_spd(a)
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |idx: Vec<usize>| -> Result<()> {
        let v = score(&idx)?;
        let better = match &best {
            None => true,
            Some((b, _)) => v > b + 1e-10 * b.abs().max(1.0),
        };
        if better {
            best = Some((v, idx));
        }
        Ok(())
    };
    if with_replacement {
        for idx in (0..all.len()).combinations_with_replacement(n) {
            consider(idx)?;
        }
    } else {
        for idx in (0..all.len()).combinations(n) {
            consider(idx)?;
        }
    }
    let (_, idx) = best.expect("count > 0");
    Design::new(idx.into_iter().map(|i| all[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::{bayes_d_criterion, relative_d_efficiency, Normalization};
    use crate::criteria::full_moment_matrix;

    fn eps_prior(m: usize) -> PriorSpec {
        PriorSpec::isotropic(m, 1e-6).unwrap()
    }

    #[test]
    fn base_design_m5_is_table() {
        let d = base_design(5).unwrap();
        assert_eq!(d.n(), 6);
        assert_eq!(d.circuits()[0].vertices(), &[1, 2, 4, 3, 5]);
        assert_eq!(d.circuits()[5].vertices(), &[1, 3, 5, 2, 4]);
        // Row 4 is stored reversed in the table; as a cycle it is the same circuit.
        for (row, c) in TABLE1_M5.iter().zip(d.circuits()) {
            assert_eq!(&Circuit::canonicalize(row).unwrap(), c);
        }
        assert_eq!(d.circuits()[3].vertices(), &[1, 4, 3, 2, 5]);
        let eff = relative_d_efficiency(&d, &eps_prior(5)).unwrap();
        assert!((eff - 1.0).abs() < 1e-9, "{eff}");
    }

    #[test]
    fn base_design_m4_matches_exhaustive_multiset() {
        let prior = PriorSpec::isotropic(4, 0.01).unwrap();
        let base = base_design(4).unwrap();
        let best = exhaustive_optimal_multiset(4, 6, &prior).unwrap();
        let a = bayes_d_criterion(&base, &prior).unwrap();
        let b = bayes_d_criterion(&best, &prior).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!((relative_d_efficiency(&base, &eps_prior(4)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn base_design_rejects_other_m() {
        assert!(base_design(6).is_err());
        assert!(base_design(3).is_err());
    }

    #[test]
    fn expand_first_block() {
        let d = base_design(5).unwrap();
        let e = recursive_expand(&d).unwrap();
        assert_eq!(e.n(), 30);
        assert_eq!(e.m(), 6);
        let expected = [
            [1, 2, 3, 5, 4, 6],
            [1, 6, 2, 3, 5, 4],
            [1, 4, 6, 2, 3, 5],
            [1, 5, 4, 6, 2, 3],
            [1, 3, 5, 4, 6, 2],
        ];
        for (row, c) in expected.iter().zip(e.circuits()) {
            assert_eq!(c, &Circuit::canonicalize(row).unwrap());
        }
    }

    #[test]
    fn chain_preserves_full_moment_matrix() {
        let mut d = base_design(5).unwrap();
        for m in [6, 7] {
            d = recursive_expand(&d).unwrap();
            assert_eq!(d.m(), m);
            let closed = full_moment_matrix(m).unwrap().entries;
            let got = d.moment_matrix(Normalization::PerRun).entries;
            assert!((closed - got).abs().max() < 1e-12, "m={m}");
            let eff = relative_d_efficiency(&d, &eps_prior(m)).unwrap();
            assert!(eff >= 1.0 - 1e-9, "m={m} eff={eff}");
        }
        assert_eq!(d.n(), 180);
    }

    #[test]
    fn half_fraction_sizes() {
        assert_eq!(half_fraction(5).unwrap().n(), 6);
        assert_eq!(half_fraction(6).unwrap().n(), 30);
        assert_eq!(half_fraction(7).unwrap().n(), 180);
        let d = expand_to(base_design(5).unwrap(), 7).unwrap();
        assert_eq!(d, half_fraction(7).unwrap());
        assert!(expand_to(half_fraction(6).unwrap(), 5).is_err());
    }

    #[test]
    fn exhaustive_small_cases() {
        let prior = PriorSpec::isotropic(4, 0.01).unwrap();
        assert_eq!(exhaustive_optimal(4, 3, &prior).unwrap(), Design::full(4).unwrap());
        let prior5 = PriorSpec::isotropic(5, 0.01).unwrap();
        let full = exhaustive_optimal(5, 12, &prior5).unwrap();
        assert!((relative_d_efficiency(&full, &prior5).unwrap() - 1.0).abs() < 1e-12);

        let best6 = exhaustive_optimal(5, 6, &prior5).unwrap();
        let a = bayes_d_criterion(&best6, &prior5).unwrap();
        let b = bayes_d_criterion(&base_design(5).unwrap(), &prior5).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn exhaustive_guard() {
        let prior = PriorSpec::isotropic(7, 0.01).unwrap();
        assert!(matches!(
            exhaustive_optimal(7, 10, &prior),
            Err(Error::SizeLimit { .. })
        ));
        let prior4 = PriorSpec::isotropic(4, 0.01).unwrap();
        assert!(exhaustive_optimal(4, 4, &prior4).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }
}

//! Hamiltonian circuits on the complete graph `K_m`.
//!
//! Vertices are labelled `1..=m`. A circuit is stored in canonical form:
//! it starts at vertex 1 and the second vertex is smaller than the last,
//! so every rotation and reversal of the same cycle maps to one value.
//!
//! Edges `(j, k)` with `j < k` are numbered 0-based in lexicographic order
//! `(1,2), (1,3), …, (1,m), (2,3), …, (m-1,m)`. Every vector and matrix
//! indexed by edges in this crate uses that order.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest `m` for which [`enumerate_all`] will materialize every circuit.
pub const MAX_ENUMERATE_M: usize = 10;

/// Number of undirected edges of `K_m`, `C(m, 2)`.
pub const fn num_edges(m: usize) -> usize {
    m * (m - 1) / 2
}

/// Number of distinct Hamiltonian circuits of `K_m`, `(m-1)!/2`.
pub fn num_circuits(m: usize) -> u128 {
    if m < 3 {
        return 0;
    }
    (1..m as u128).product::<u128>() / 2
}

/// Recover `m` from an edge count `p = C(m, 2)`.
pub fn vertices_for_edges(p: usize) -> Result<usize> {
    let mut m = 2;
    while num_edges(m) < p {
        m += 1;
    }
    if num_edges(m) == p && m >= 3 {
        Ok(m)
    } else {
        Err(Error::InvalidInput(format!(
            "{p} is not C(m,2) for any m >= 3"
        )))
    }
}

/// A position in the lexicographic edge order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeIndex {
    pub j: usize,
    pub k: usize,
    pub linear_index: usize,
}

/// Linear index of the edge `{j, k}`; no validation.
#[inline]
pub(crate) fn edge_slot(j: usize, k: usize, m: usize) -> usize {
    let (j, k) = if j < k { (j, k) } else { (k, j) };
    (j - 1) * m - (j - 1) * j / 2 + (k - j - 1)
}

/// Index of the unordered pair `{j, k}` in `K_m`.
pub fn edge_index(j: usize, k: usize, m: usize) -> Result<EdgeIndex> {
    if j == k || j == 0 || k == 0 || j > m || k > m {
        return Err(Error::InvalidEdge(j, k, m));
    }
    let (lo, hi) = if j < k { (j, k) } else { (k, j) };
    Ok(EdgeIndex {
        j: lo,
        k: hi,
        linear_index: edge_slot(lo, hi, m),
    })
}

/// Inverse of [`edge_index`]: the `(j, k)` pair stored at `idx`.
pub fn edge_pair(idx: usize, m: usize) -> Result<(usize, usize)> {
    let mut start = 0;
    for j in 1..m {
        let width = m - j;
        if idx < start + width {
            return Ok((j, j + 1 + idx - start));
        }
        start += width;
    }
    Err(Error::Dimension {
        expected: num_edges(m),
        got: idx + 1,
    })
}

/// Dense symmetric edge-cost lookup built from a lexicographic cost vector.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    m: usize,
    d: Vec<f64>,
}

impl CostMatrix {
    pub fn new(beta: &[f64], m: usize) -> Result<Self> {
        check_len(beta, m)?;
        let mut d = vec![0.0; (m + 1) * (m + 1)];
        for j in 1..=m {
            for k in (j + 1)..=m {
                let c = beta[edge_slot(j, k, m)];
                d[j * (m + 1) + k] = c;
                d[k * (m + 1) + j] = c;
            }
        }
        Ok(Self { m, d })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.d[j * (self.m + 1) + k]
    }

    /// Cost of the closed tour visiting `order` in sequence.
    pub fn tour_cost(&self, order: &[usize]) -> f64 {
        let n = order.len();
        (0..n).map(|i| self.get(order[i], order[(i + 1) % n])).sum()
    }
}

pub(crate) fn check_len(beta: &[f64], m: usize) -> Result<()> {
    let p = num_edges(m);
    if beta.len() != p {
        return Err(Error::Dimension {
            expected: p,
            got: beta.len(),
        });
    }
    Ok(())
}

/// A Hamiltonian circuit in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Circuit {
    vertices: Vec<usize>,
}

impl Circuit {
    /// Canonical representative of the cycle visiting `seq` in order.
    pub fn canonicalize(seq: &[usize]) -> Result<Self> {
        let m = seq.len();
        if m < 3 {
            return Err(Error::InvalidInput(format!(
                "a circuit needs at least 3 vertices, got {m}"
            )));
        }
        let mut seen = vec![false; m + 1];
        for &v in seq {
            if v == 0 || v > m {
                return Err(Error::InvalidInput(format!(
                    "vertex {v} outside 1..={m}"
                )));
            }
            if seen[v] {
                return Err(Error::InvalidInput(format!("vertex {v} appears twice")));
            }
            seen[v] = true;
        }
        Ok(Self {
            vertices: canonical_order(seq),
        })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn m(&self) -> usize {
        self.vertices.len()
    }

    /// The `m` edges of the circuit, closing edge included, as `(j, k)` with `j < k`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.m();
        (0..m).map(move |i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % m];
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        })
    }

    /// Linear indices of the circuit's edges (the support of [`Circuit::encode`]).
    pub fn edge_slots(&self) -> Vec<usize> {
        tour_slots(&self.vertices)
    }

    /// Edge-indicator row of length `C(m, 2)`.
    pub fn encode(&self) -> Vec<f64> {
        let mut x = vec![0.0; num_edges(self.m())];
        for s in self.edge_slots() {
            x[s] = 1.0;
        }
        x
    }

    /// Total cost of the circuit (return edge included) under `beta`.
    pub fn cost(&self, beta: &[f64]) -> Result<f64> {
        check_len(beta, self.m())?;
        Ok(self.edge_slots().into_iter().map(|s| beta[s]).sum())
    }
}

/// Linear edge indices of the closed tour through `order`.
pub(crate) fn tour_slots(order: &[usize]) -> Vec<usize> {
    let m = order.len();
    (0..m)
        .map(|i| edge_slot(order[i], order[(i + 1) % m], m))
        .collect()
}

fn canonical_order(seq: &[usize]) -> Vec<usize> {
    let m = seq.len();
    let start = seq.iter().position(|&v| v == 1).unwrap_or(0);
    let fwd: Vec<usize> = (0..m).map(|i| seq[(start + i) % m]).collect();
    if fwd[1] < fwd[m - 1] {
        fwd
    } else {
        let mut rev = Vec::with_capacity(m);
        rev.push(fwd[0]);
        rev.extend(fwd[1..].iter().rev());
        rev
    }
}

/// Convenience wrapper around [`Circuit::canonicalize`].
pub fn canonicalize(seq: &[usize]) -> Result<Circuit> {
    Circuit::canonicalize(seq)
}

/// Every Hamiltonian circuit of `K_m`, sorted lexicographically.
pub fn enumerate_all(m: usize) -> Result<Vec<Circuit>> {
    if !(3..=MAX_ENUMERATE_M).contains(&m) {
        return Err(Error::SizeLimit {
            what: format!("enumerating all circuits for m={m}"),
            count: num_circuits(m),
            limit: num_circuits(MAX_ENUMERATE_M),
        });
    }
    let mut tail: Vec<usize> = (2..=m).collect();
    let mut out = Vec::with_capacity(num_circuits(m) as usize);
    loop {
        if tail[0] < tail[tail.len() - 1] {
            let mut v = Vec::with_capacity(m);
            v.push(1);
            v.extend_from_slice(&tail);
            out.push(Circuit { vertices: v });
        }
        if !next_permutation(&mut tail) {
            break;
        }
    }
    Ok(out)
}

/// Advance `v` to its next lexicographic permutation; false once exhausted.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.vertices.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let seq = s
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("not a vertex: {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Circuit::canonicalize(&seq)
    }
}

/// Parse the circuit text format: one circuit per line, blank lines and `#` comments skipped.
pub fn parse_circuits(text: &str) -> Result<Vec<Circuit>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let c: Circuit = line.parse().map_err(|e: Error| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if let Some(first) = out.first() {
            let first: &Circuit = first;
            if first.m() != c.m() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {} vertices, got {}", first.m(), c.m()),
                });
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// Render circuits in the text format, one per line with a trailing newline.
pub fn format_circuits<'a>(circuits: impl IntoIterator<Item = &'a Circuit>) -> String {
    let mut s = String::new();
    for c in circuits {
        s.push_str(&c.to_string());
        s.push('\n');
    }
    s
}

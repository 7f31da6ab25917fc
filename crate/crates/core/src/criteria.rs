//! Designs, priors and the Bayesian D-optimality criterion.
//!
//! A design is an ordered multiset of circuits. Its model matrix `X` has one
//! edge-indicator row per circuit. The criterion of a design under a prior
//! with diagonal precision `R` is `log det(XᵀX + R)`; relative efficiency
//! compares the per-run information `XᵀX/n + R` with that of the full design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::circuit::{enumerate_all, num_edges, parse_circuits, Circuit};
use crate::error::{Error, Result};
use crate::linalg::log_det_spd;

/// An ordered list of `n >= 1` circuits on the same vertex count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    m: usize,
    circuits: Vec<Circuit>,
}

impl Design {
    pub fn new(circuits: Vec<Circuit>) -> Result<Self> {
        let Some(first) = circuits.first() else {
            return Err(Error::InvalidInput("a design needs at least one circuit".into()));
        };
        let m = first.m();
        if let Some(bad) = circuits.iter().find(|c| c.m() != m) {
            return Err(Error::InvalidInput(format!(
                "mixed vertex counts in design: {m} and {}",
                bad.m()
            )));
        }
        Ok(Self { m, circuits })
    }

    /// The full design: every circuit of `K_m` exactly once.
    pub fn full(m: usize) -> Result<Self> {
        Self::new(enumerate_all(m)?)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.circuits.len()
    }

    pub fn p(&self) -> usize {
        num_edges(self.m)
    }

    pub fn circuits(&self) -> &[Circuit] {
        &self.circuits
    }

    pub fn into_circuits(self) -> Vec<Circuit> {
        self.circuits
    }

    /// `n × C(m,2)` edge-indicator matrix, row `i` encoding circuit `i`.
    pub fn model_matrix(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n(), self.p());
        for (i, c) in self.circuits.iter().enumerate() {
            for s in c.edge_slots() {
                x[(i, s)] = 1.0;
            }
        }
        x
    }

    /// Raw information matrix `XᵀX`.
    pub fn gram(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut g = DMatrix::zeros(p, p);
        for c in &self.circuits {
            let slots = c.edge_slots();
            for &s in &slots {
                for &t in &slots {
                    g[(s, t)] += 1.0;
                }
            }
        }
        g
    }

    pub fn moment_matrix(&self, normalization: Normalization) -> MomentMatrix {
        let mut entries = self.gram();
        if normalization == Normalization::PerRun {
            entries /= self.n() as f64;
        }
        MomentMatrix {
            entries,
            normalization,
        }
    }

    /// Parse a design from the circuit text format.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(parse_circuits(text)?)
    }

    pub fn to_text(&self) -> String {
        crate::circuit::format_circuits(&self.circuits)
    }
}

/// Normal prior on edge costs: mean `mu`, diagonal precision `r_diag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub m: usize,
    pub mu: Vec<f64>,
    pub r_diag: Vec<f64>,
}

impl PriorSpec {
    pub fn new(m: usize, mu: Vec<f64>, r_diag: Vec<f64>) -> Result<Self> {
        let prior = Self { m, mu, r_diag };
        prior.validate()?;
        Ok(prior)
    }

    /// Zero mean and `R = precision · I`.
    pub fn isotropic(m: usize, precision: f64) -> Result<Self> {
        let p = num_edges(m);
        Self::new(m, vec![0.0; p], vec![precision; p])
    }

    /// Mean `mu` with `R = precision · I`.
    pub fn with_mean(mu: Vec<f64>, precision: f64) -> Result<Self> {
        let m = crate::circuit::vertices_for_edges(mu.len())?;
        let p = mu.len();
        Self::new(m, mu, vec![precision; p])
    }

    pub fn p(&self) -> usize {
        num_edges(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 {
            return Err(Error::InvalidInput(format!("prior m={} < 3", self.m)));
        }
        let p = self.p();
        for (name, v) in [("mu", &self.mu), ("r_diag", &self.r_diag)] {
            if v.len() != p {
                return Err(Error::InvalidInput(format!(
                    "prior {name} has length {}, expected C({},2) = {p}",
                    v.len(),
                    self.m
                )));
            }
        }
        if let Some((i, r)) = self
            .r_diag
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "prior precision r_diag[{i}] = {r} must be finite and > 0"
            )));
        }
        if self.mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("prior mean contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn precision_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.r_diag))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prior: Self = serde_json::from_str(text)?;
        prior.validate()?;
        Ok(prior)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub(crate) fn check_m(&self, m: usize) -> Result<()> {
        if self.m != m {
            return Err(Error::Dimension {
                expected: num_edges(m),
                got: self.p(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `XᵀX / n`
    PerRun,
    /// `XᵀX`
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    pub entries: DMatrix<f64>,
    pub normalization: Normalization,
}

/// `model_matrix` as a free function.
pub fn model_matrix(d: &Design) -> DMatrix<f64> {
    d.model_matrix()
}

/// `log det(XᵀX + R)`.
pub fn bayes_d_criterion(d: &Design, prior: &PriorSpec) -> Result<f64> {
    prior.check_m(d.m())?;
    let mut a = d.gram();
    for (i, r) in prior.r_diag.iter().enumerate() {
        a[(i, i)] += r;
    }
    log_det_spd(a)
}

/// Pairwise edge-overlap matrix: 0 on the diagonal, 2 for disjoint edges,
/// 1 for edges sharing one vertex.
pub fn q_matrix(m: usize) -> Result<DMatrix<f64>> {
    if m < 3 {
        return Err(Error::InvalidInput(format!("q_matrix needs m >= 3, got {m}")));
    }
    let p = num_edges(m);
    let pairs: Vec<(usize, usize)> = (1..m)
        .flat_map(|j| ((j + 1)..=m).map(move |k| (j, k)))
        .collect();
    Ok(DMatrix::from_fn(p, p, |a, b| {
        let (i, j) = pairs[a];
        let (k, l) = pairs[b];
        if a == b {
            0.0
        } else if i != k && i != l && j != k && j != l {
            2.0
        } else {
            1.0
        }
    }))
}

/// Per-run moment matrix of the full design in closed form,
/// `2/(m-1) I + 2/((m-1)(m-2)) Q`, without enumerating circuits.
pub fn full_moment_matrix(m: usize) -> Result<MomentMatrix> {
    let q = q_matrix(m)?;
    let p = num_edges(m);
    let mf = m as f64;
    let diag = 2.0 / (mf - 1.0);
    let off = 2.0 / ((mf - 1.0) * (mf - 2.0));
    let entries = DMatrix::identity(p, p) * diag + q * off;
    Ok(MomentMatrix {
        entries,
        normalization: Normalization::PerRun,
    })
}

/// `log det(M + R)` for a per-run moment matrix `M`.
pub(crate) fn log_det_with_prior(mut m: DMatrix<f64>, prior: &PriorSpec) -> Result<f64> {
    for (i, r) in prior.r_diag.iter().enumerate() {
        m[(i, i)] += r;
    }
    log_det_spd(m)
}

/// `log det(M_f + R)` for the full design.
pub fn full_design_log_det(prior: &PriorSpec) -> Result<f64> {
    log_det_with_prior(full_moment_matrix(prior.m)?.entries, prior)
}

/// Relative D-efficiency against the full design:
/// `(|XᵀX/n + R| / |M_f + R|)^(1/p)`.
pub fn relative_d_efficiency(d: &Design, prior: &PriorSpec) -> Result<f64> {
    prior.check_m(d.m())?;
    let reference = full_design_log_det(prior)?;
    relative_efficiency_against(d, prior, reference)
}

/// As [`relative_d_efficiency`] with a precomputed `log det(M_f + R)`.
pub fn relative_efficiency_against(d: &Design, prior: &PriorSpec, reference: f64) -> Result<f64> {
    prior.check_m(d.m())?;
    let num = log_det_with_prior(d.moment_matrix(Normalization::PerRun).entries, prior)?;
    Ok(((num - reference) / d.p() as f64).exp())
}

//! Shared fixtures for the criterion benchmarks.

use hamdesign::criteria::PriorSpec;
use hamdesign::search::random_design;
use hamdesign::Design;

/// Prior used throughout the efficiency experiments, `R = 0.01 I`.
pub fn table_prior(m: usize) -> PriorSpec {
    PriorSpec::isotropic(m, 0.01).expect("valid prior")
}

pub fn start_design(m: usize, n: usize) -> Design {
    random_design(m, n, 7).expect("valid design")
}

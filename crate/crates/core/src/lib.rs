//! Bayesian D-optimal designs over Hamiltonian circuits.
//!
//! The crate picks which delivery routes to drive (designs), estimates
//! per-edge travel costs from the observed route totals, and turns those
//! estimates into cheap routes with standard TSP heuristics. The `sim`
//! module wires everything into reproducible Monte Carlo experiments.

pub mod circuit;
pub mod construct;
pub mod criteria;
pub mod error;
pub mod estimate;
pub mod linalg;
pub mod routes;
pub mod search;
pub mod sim;

pub use circuit::{canonicalize, edge_index, enumerate_all, Circuit, EdgeIndex};
pub use criteria::{
    bayes_d_criterion, full_moment_matrix, model_matrix, q_matrix, relative_d_efficiency, Design,
    MomentMatrix, Normalization, PriorSpec,
};
pub use error::{Error, Result};
pub use estimate::{
    posterior_mean, posterior_predict, ridge_cv, ridge_fit, ObservationSet, PosteriorEstimate,
    RidgeCv, RidgeFit,
};
pub use routes::{
    arbitrary_insertion_route, brute_force_optimal, nearest_neighbor_route, nn_bound,
    nn_bound_check, two_opt_improve, Heuristic,
};
pub use search::{Algorithm, Cooling, SearchConfig, SearchOutcome};
pub use sim::{Method, ReplicationResult, Scenario, ScenarioConfig};

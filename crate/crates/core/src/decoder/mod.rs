//! Classical decoding substrate: acceptors, token tables, exact path
//! distributions, uniform grammar sampling and the biased conditional
//! estimator.

mod acceptor;
mod counting;
mod estimator;
mod paths;
mod table;

pub use acceptor::{Automaton, Dfa};
pub use counting::{CountTable, MassTable};
pub use estimator::{
    biased_conditional_estimate, estimate_kappa, sample_size_bound, tv_distance, PILOT_DRAWS,
};
pub use paths::{
    biased_conditional_exact, classical_mlp_baseline, enumerate_paths, enumerate_paths_with_budget,
    uniform_sample, BaselineOutcome, PathDistribution, PathEntry, ENUMERATION_BUDGET,
};
pub use table::TokenTable;

//! Statevector simulation of advice-state preparation, amplitude
//! amplification, exponential search and the search/beam decoders.

mod advice;
mod decode;
mod search;

pub use advice::{grover_iterate, prepare_advice, AdviceState};
pub use decode::{
    default_rounds, quantum_beam_decode, quantum_search_decode, run_trials, trial_seed, DecodeMode,
    SearchOutcome, TrialRecord,
};
pub use search::{amplification_rounds, exponential_search, Engine, SearchAttempt, LAMBDA};

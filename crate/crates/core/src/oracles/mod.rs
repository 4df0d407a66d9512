//! Exact conditional laws and conditional-propensity reference filters.

pub mod cme;
pub mod cp;
pub mod isomerization;
pub mod pure_death;

pub use cme::{ex3_cond_at_t_end, ex3_forward_pmf, CmeSolver, StateSpace};
pub use cp::{
    cp_approx_filter, cp_exact_filter, CpOutput, IsomerizationOracle, PureDeathOracle,
    TransitionOracle,
};
pub use isomerization::{ex2_cond_pmf, ex2_obs_prob, ex2_transition, TwoStateKernel};
pub use pure_death::{
    ex1_cond_pmf, ex1_cond_propensity, ex1_transition, ex1_wait_sample, ex1_wait_survival,
};

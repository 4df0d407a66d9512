//! Filters that simulate directly under (approximately) conditioned propensities.

use rand::Rng;

use super::isomerization::ex2_transition;
use super::pure_death::{ex1_transition, ex1_wait_sample};
use crate::error::{contract, Error, Result};
use crate::exec::Exec;
use crate::metrics::{empirical_pmf, esf_log, weights_from_log};
use crate::network::ReactionNetwork;
use crate::observation::SnapshotSeq;
use crate::pmf::{Pmf, State};
use crate::rng::StreamKey;
use crate::simulate::{categorical, exp_sample};

/// Likelihood of a future observation given the current state.
pub trait TransitionOracle: Sync {
    /// `P(V(t_obs) = y | Z(t) = z)`.
    fn obs_likelihood(&self, z: &[i64], t: f64, t_obs: f64, y: &[i64]) -> f64;
}

/// `S -> 0` at rate `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureDeathOracle {
    pub c: f64,
}

impl TransitionOracle for PureDeathOracle {
    fn obs_likelihood(&self, z: &[i64], t: f64, t_obs: f64, y: &[i64]) -> f64 {
        ex1_transition(z[0], y[0], self.c, t_obs - t)
    }
}

/// `S1 <-> S2` with `S2` observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsomerizationOracle {
    pub c: [f64; 2],
}

impl TransitionOracle for IsomerizationOracle {
    fn obs_likelihood(&self, z: &[i64], t: f64, t_obs: f64, y: &[i64]) -> f64 {
        ex2_transition([z[0], z[1]], z[0] + z[1] - y[0], self.c, t_obs - t)
    }
}

/// Query-time states with log weights.
#[derive(Debug, Clone)]
pub struct CpOutput {
    pub states: Vec<State>,
    pub log_weights: Vec<f64>,
}

impl CpOutput {
    pub fn estimate(&self) -> Result<Pmf> {
        let w = weights_from_log(&self.log_weights)?;
        let dim = self.states.first().map(Vec::len).unwrap_or(0);
        empirical_pmf(self.states.iter().zip(w), dim, |s| s.to_vec())
    }

    pub fn esf(&self) -> Result<f64> {
        esf_log(&self.log_weights)
    }
}

fn check(
    net: &ReactionNetwork,
    mu0: &Pmf,
    snaps: &SnapshotSeq,
    t_query: f64,
    n_s: usize,
) -> Result<()> {
    if mu0.dim() != net.n_species() {
        return contract("initial law has wrong dimension");
    }
    if !(t_query >= 0.0 && t_query <= snaps.last().t) {
        return contract(format!(
            "query time {t_query} outside [0, {}]",
            snaps.last().t
        ));
    }
    if n_s == 0 {
        return contract("need at least one particle");
    }
    Ok(())
}

/// One path under propensities `b_j = a_j h(z + nu_j) / h(z)` frozen at the
/// latest jump, with `h` the likelihood of the next snapshot. The weight is
/// the likelihood ratio back to the network's law times the snapshot indicators.
fn cp_approx_path<R: Rng + ?Sized, O: TransitionOracle + ?Sized>(
    net: &ReactionNetwork,
    oracle: &O,
    z0: &[i64],
    snaps: &SnapshotSeq,
    t_query: f64,
    rng: &mut R,
) -> (State, f64) {
    let m = net.n_reactions();
    let mut z = z0.to_vec();
    let mut t = 0.0;
    let mut lw = 0.0;
    let mut mark: Option<State> = None;
    let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
    let mut next = z.clone();
    for snap in snaps.iter() {
        loop {
            let h = oracle.obs_likelihood(&z, t, snap.t, &snap.y);
            if !(h > 0.0) {
                return (mark.unwrap_or_else(|| z.clone()), f64::NEG_INFINITY);
            }
            net.propensities_into(&z, &mut a);
            for j in 0..m {
                b[j] = if a[j] > 0.0 {
                    next.copy_from_slice(&z);
                    net.fire(j, &mut next);
                    a[j] * oracle.obs_likelihood(&next, t, snap.t, &snap.y) / h
                } else {
                    0.0
                };
            }
            let a0: f64 = a.iter().sum();
            let b0: f64 = b.iter().sum();
            let te = if b0 > 0.0 {
                t + exp_sample(rng, b0)
            } else {
                f64::INFINITY
            };
            if mark.is_none() && t_query < te.min(snap.t) {
                mark = Some(z.clone());
            }
            if te > snap.t {
                lw -= (a0 - b0) * (snap.t - t);
                t = snap.t;
                break;
            }
            let j = categorical(rng, &b, b0);
            lw += -(a0 - b0) * (te - t) + (a[j] / b[j]).ln();
            net.fire(j, &mut z);
            t = te;
        }
        if net.observe(&z) != snap.y {
            lw = f64::NEG_INFINITY;
        }
        if mark.is_none() && t_query <= t {
            mark = Some(z.clone());
        }
    }
    (mark.unwrap_or(z), lw)
}

/// Conditional-propensity filter with the held-constant approximation.
#[allow(clippy::too_many_arguments)]
pub fn cp_approx_filter<O: TransitionOracle>(
    net: &ReactionNetwork,
    oracle: &O,
    mu0: &Pmf,
    snaps: &SnapshotSeq,
    t_query: f64,
    n_s: usize,
    key: StreamKey,
    exec: Exec,
) -> Result<CpOutput> {
    check(net, mu0, snaps, t_query, n_s)?;
    let sampler = mu0.sampler();
    let runs = exec.map(n_s, |i| {
        let mut rng = key.rng(i as u64);
        let z0 = sampler.sample(&mut rng).clone();
        cp_approx_path(net, oracle, &z0, snaps, t_query, &mut rng)
    });
    let (states, log_weights): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
        return Err(Error::AllRejected);
    }
    Ok(CpOutput {
        states,
        log_weights,
    })
}

/// Exact conditioned simulation of `S -> 0` at rate `c`. Every snapshot is hit
/// by construction; the only weight is the likelihood of the first snapshot
/// from the sampled start state.
pub fn cp_exact_filter(
    c: f64,
    mu0: &Pmf,
    snaps: &SnapshotSeq,
    t_query: f64,
    n_s: usize,
    key: StreamKey,
    exec: Exec,
) -> Result<CpOutput> {
    if mu0.dim() != 1 || snaps.iter().any(|s| s.y.len() != 1) {
        return contract("pure death oracle needs one observed species");
    }
    if !(t_query >= 0.0 && t_query <= snaps.last().t) {
        return contract(format!(
            "query time {t_query} outside [0, {}]",
            snaps.last().t
        ));
    }
    let sampler = mu0.sampler();
    let first = &snaps.as_slice()[0];
    let runs = exec.map(n_s, |i| {
        let mut rng = key.rng(i as u64);
        let x0 = sampler.sample(&mut rng)[0];
        let lw = ex1_transition(x0, first.y[0], c, first.t).ln();
        if lw == f64::NEG_INFINITY {
            return (vec![x0], lw);
        }
        let (mut x, mut t) = (x0, 0.0);
        let mut mark = None;
        for snap in snaps.iter() {
            let target = snap.y[0];
            loop {
                let s = ex1_wait_sample(x, target, c, t, snap.t, rng.random::<f64>());
                let te = (t + s).min(snap.t);
                if mark.is_none() && t_query < te {
                    mark = Some(x);
                }
                if x == target {
                    t = snap.t;
                    break;
                }
                x -= 1;
                t = te;
            }
            if mark.is_none() && t_query <= t {
                mark = Some(x);
            }
        }
        (vec![mark.unwrap_or(x)], lw)
    });
    let (states, log_weights): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    if log_weights.iter().all(|w| *w == f64::NEG_INFINITY) {
        return Err(Error::AllRejected);
    }
    Ok(CpOutput {
        states,
        log_weights,
    })
}

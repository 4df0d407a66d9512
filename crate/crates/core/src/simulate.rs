//! Exact forward simulation (direct-method SSA) and the prediction/correction
//! baseline filter.

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::exec::Exec;
use crate::network::ReactionNetwork;
use crate::observation::SnapshotSeq;
use crate::pmf::{Pmf, State};
use crate::rng::StreamKey;

/// A reaction firing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub reaction: u32,
}

/// A sample path on `[start, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub initial_state: State,
    pub start: f64,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl Path {
    /// State at time `t` (right-continuous).
    pub fn state_at(&self, net: &ReactionNetwork, t: f64) -> State {
        let mut z = self.initial_state.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            net.fire(e.reaction as usize, &mut z);
        }
        z
    }

    pub fn terminal_state(&self, net: &ReactionNetwork) -> State {
        self.state_at(net, f64::INFINITY)
    }

    pub fn counts(&self, m: usize) -> Vec<u64> {
        let mut k = vec![0u64; m];
        for e in &self.events {
            k[e.reaction as usize] += 1;
        }
        k
    }
}

#[inline]
pub(crate) fn exp_sample<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

/// Index `j` with probability `w[j] / total`.
#[inline]
pub(crate) fn categorical<R: Rng + ?Sized>(rng: &mut R, w: &[f64], total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (j, &x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return j;
        }
    }
    // rounding: last reaction with positive weight
    w.iter().rposition(|&x| x > 0.0).unwrap_or(w.len() - 1)
}

/// Direct-method SSA step loop from `z` at time `t` until `t_end`, calling
/// `on_event` after each firing.
pub(crate) fn run_ssa<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    z: &mut [i64],
    mut t: f64,
    t_end: f64,
    rng: &mut R,
    a: &mut [f64],
    mut on_event: impl FnMut(f64, usize, &[i64]),
) {
    loop {
        net.propensities_into(z, a);
        let a0: f64 = a.iter().sum();
        if a0 <= 0.0 {
            return;
        }
        t += exp_sample(rng, a0);
        if t > t_end {
            return;
        }
        let j = categorical(rng, a, a0);
        net.fire(j, z);
        on_event(t, j, z);
    }
}

/// Exact SSA sample path from `z0` on `[0, horizon]`.
pub fn ssa_path<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    z0: &[i64],
    horizon: f64,
    rng: &mut R,
) -> Result<Path> {
    net.check_state(z0)?;
    if z0.iter().any(|&x| x < 0) {
        return contract("initial state must be nonnegative");
    }
    if !(horizon > 0.0) {
        return contract(format!("horizon {horizon} must be positive"));
    }
    let mut z = z0.to_vec();
    let mut a = vec![0.0; net.n_reactions()];
    let mut events = Vec::new();
    run_ssa(net, &mut z, 0.0, horizon, rng, &mut a, |t, j, _| {
        events.push(Event {
            time: t,
            reaction: j as u32,
        })
    });
    Ok(Path {
        initial_state: z0.to_vec(),
        start: 0.0,
        events,
        horizon,
    })
}

/// States at each checkpoint (ascending, all `>= t`) of an SSA run from `z` at `t`.
pub(crate) fn ssa_checkpoints<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    z: &[i64],
    t: f64,
    checkpoints: &[f64],
    rng: &mut R,
) -> Vec<State> {
    let mut z = z.to_vec();
    let mut a = vec![0.0; net.n_reactions()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut now = t;
    let mut pending: Option<(f64, usize)> = None;
    for &cp in checkpoints {
        loop {
            let (te, j) = match pending.take() {
                Some(p) => p,
                None => {
                    net.propensities_into(&z, &mut a);
                    let a0: f64 = a.iter().sum();
                    if a0 <= 0.0 {
                        (f64::INFINITY, 0)
                    } else {
                        let te = now + exp_sample(rng, a0);
                        (te, categorical(rng, &a, a0))
                    }
                }
            };
            if te > cp {
                pending = Some((te, j));
                break;
            }
            net.fire(j, &mut z);
            now = te;
        }
        out.push(z.clone());
    }
    out
}

/// Output of the prediction/correction filter.
#[derive(Debug, Clone)]
pub struct NaiveOutput {
    pub estimate: Pmf,
    /// Indicator weights, one per simulated path.
    pub weights: Vec<f64>,
}

/// Prediction/correction baseline: unconditioned SSA paths weighted by the
/// indicator that every snapshot is matched.
///
/// Returns [`Error::AllRejected`] when no path matches the observations.
pub fn naive_filter(
    net: &ReactionNetwork,
    mu0: &Pmf,
    snaps: &SnapshotSeq,
    t_query: f64,
    n_s: usize,
    key: StreamKey,
    exec: Exec,
) -> Result<NaiveOutput> {
    if mu0.dim() != net.n_species() {
        return contract("initial law has wrong dimension");
    }
    if !(t_query >= 0.0 && t_query <= snaps.last().t) {
        return contract(format!(
            "query time {t_query} outside [0, {}]",
            snaps.last().t
        ));
    }
    // checkpoints: snapshot times plus the query time
    let mut checkpoints: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let q_pos = checkpoints.partition_point(|&t| t < t_query);
    let query_is_snapshot = checkpoints.get(q_pos) == Some(&t_query);
    if !query_is_snapshot {
        checkpoints.insert(q_pos, t_query);
    }
    let sampler = mu0.sampler();
    let runs = exec.map(n_s, |i| {
        let mut rng = key.rng(i as u64);
        let z0 = sampler.sample(&mut rng).clone();
        let states = ssa_checkpoints(net, &z0, 0.0, &checkpoints, &mut rng);
        let mut snap_states = states
            .iter()
            .enumerate()
            .filter(|(k, _)| query_is_snapshot || *k != q_pos);
        let ok = snaps.iter().all(|s| {
            let (_, z) = snap_states.next().expect("one state per snapshot");
            net.observe(z) == s.y
        });
        (states[q_pos].clone(), if ok { 1.0 } else { 0.0 })
    });
    let weights: Vec<f64> = runs.iter().map(|(_, w)| *w).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllRejected);
    }
    let estimate = Pmf::normalized(net.n_species(), runs.into_iter().filter(|(_, w)| *w > 0.0))?;
    Ok(NaiveOutput { estimate, weights })
}

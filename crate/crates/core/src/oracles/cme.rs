//! Master equation on a finite reachable state space, integrated with RK4.

use std::collections::{HashMap, VecDeque};

use crate::error::{contract, Error, Result};
use crate::network::library::dimerization;
use crate::network::ReactionNetwork;
use crate::observation::{Snapshot, SnapshotSeq};
use crate::pmf::{Pmf, State};

/// Default cap on the RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// States reachable from an initial support, with outgoing jump rates.
#[derive(Debug, Clone)]
pub struct StateSpace {
    states: Vec<State>,
    index: HashMap<State, usize>,
    out: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
    observed: Vec<usize>,
}

impl StateSpace {
    /// Breadth-first enumeration; fails beyond `max_states`.
    pub fn enumerate<'a, I>(net: &ReactionNetwork, starts: I, max_states: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a State>,
    {
        let mut states: Vec<State> = Vec::new();
        let mut index = HashMap::new();
        let mut queue = VecDeque::new();
        for s in starts {
            net.check_state(s)?;
            if !index.contains_key(s) {
                index.insert(s.clone(), states.len());
                states.push(s.clone());
                queue.push_back(states.len() - 1);
            }
        }
        let m = net.n_reactions();
        let mut out = Vec::new();
        let mut exit = Vec::new();
        while let Some(i) = queue.pop_front() {
            let mut edges = Vec::new();
            let mut total = 0.0;
            for j in 0..m {
                let a = net.propensity_of(j, &states[i]);
                if a <= 0.0 {
                    continue;
                }
                let mut next = states[i].clone();
                net.fire(j, &mut next);
                let k = match index.get(&next) {
                    Some(&k) => k,
                    None => {
                        if states.len() >= max_states {
                            return contract(format!(
                                "reachable state space exceeds {max_states} states"
                            ));
                        }
                        index.insert(next.clone(), states.len());
                        states.push(next);
                        queue.push_back(states.len() - 1);
                        states.len() - 1
                    }
                };
                edges.push((k, a));
                total += a;
            }
            if out.len() <= i {
                out.resize(i + 1, Vec::new());
                exit.resize(i + 1, 0.0);
            }
            out[i] = edges;
            exit[i] = total;
        }
        Ok(StateSpace {
            states,
            index,
            out,
            exit,
            observed: net.observed().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn index_of(&self, z: &[i64]) -> Option<usize> {
        self.index.get(z).copied()
    }

    fn max_exit(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    /// Dense probability vector for `pmf`; fails if it leaves the space.
    pub fn vector(&self, pmf: &Pmf) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.len()];
        for (z, p) in pmf.iter() {
            let i = self
                .index_of(z)
                .ok_or_else(|| Error::Contract(format!("state {z:?} not enumerated")))?;
            v[i] += p;
        }
        Ok(v)
    }

    pub fn to_pmf(&self, v: &[f64]) -> Result<Pmf> {
        Pmf::normalized(
            self.states[0].len(),
            self.states
                .iter()
                .cloned()
                .zip(v.iter().map(|p| p.max(0.0))),
        )
    }

    fn indicator(&self, y: &[i64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|z| {
                if self.observed.iter().zip(y).all(|(&i, &v)| z[i] == v) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `dp/dt = p Q`.
    fn forward_rhs(&self, p: &[f64], out: &mut [f64]) {
        for (o, (&pi, &e)) in out.iter_mut().zip(p.iter().zip(&self.exit)) {
            *o = -pi * e;
        }
        for (i, edges) in self.out.iter().enumerate() {
            let pi = p[i];
            if pi != 0.0 {
                for &(k, a) in edges {
                    out[k] += pi * a;
                }
            }
        }
    }

    /// `dh/ds = Q h` in time-to-go.
    fn backward_rhs(&self, h: &[f64], out: &mut [f64]) {
        for (i, edges) in self.out.iter().enumerate() {
            let s: f64 = edges.iter().map(|&(k, a)| a * h[k]).sum();
            out[i] = s - self.exit[i] * h[i];
        }
    }

    fn rk4(&self, v: &mut [f64], duration: f64, step: f64, backward: bool) {
        if duration <= 0.0 {
            return;
        }
        let cap = if self.max_exit() > 0.0 {
            1.0 / self.max_exit()
        } else {
            f64::INFINITY
        };
        let n_steps = (duration / step.min(cap)).ceil().max(1.0) as usize;
        let h = duration / n_steps as f64;
        let n = v.len();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
        );
        let f = |x: &[f64], o: &mut [f64]| {
            if backward {
                self.backward_rhs(x, o)
            } else {
                self.forward_rhs(x, o)
            }
        };
        for _ in 0..n_steps {
            f(v, &mut k1);
            for i in 0..n {
                tmp[i] = v[i] + 0.5 * h * k1[i];
            }
            f(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = v[i] + 0.5 * h * k2[i];
            }
            f(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = v[i] + h * k3[i];
            }
            f(&tmp, &mut k4);
            for i in 0..n {
                v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }

    /// Propagate a distribution forward by `duration`.
    pub fn forward(&self, p: &mut [f64], duration: f64, step: f64) {
        self.rk4(p, duration, step, false)
    }

    /// Propagate a terminal function backward by `duration`.
    pub fn backward(&self, h: &mut [f64], duration: f64, step: f64) {
        self.rk4(h, duration, step, true)
    }
}

/// Master-equation oracle for an arbitrary network with a finite reachable set.
#[derive(Debug, Clone)]
pub struct CmeSolver {
    space: StateSpace,
    step: f64,
}

impl CmeSolver {
    pub fn new(net: &ReactionNetwork, mu0: &Pmf, max_states: usize) -> Result<Self> {
        let starts: Vec<State> = mu0.iter().map(|(z, _)| z.clone()).collect();
        Ok(CmeSolver {
            space: StateSpace::enumerate(net, &starts, max_states)?,
            step: DEFAULT_STEP,
        })
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Unconditional law at time `t`.
    pub fn forward_pmf(&self, mu0: &Pmf, t: f64) -> Result<Pmf> {
        let mut p = self.space.vector(mu0)?;
        self.space.forward(&mut p, t, self.step);
        self.space.to_pmf(&p)
    }

    /// Law at `t_query` given every snapshot, by forward-backward recursion.
    pub fn conditional(&self, mu0: &Pmf, snaps: &SnapshotSeq, t_query: f64) -> Result<Pmf> {
        if !(t_query >= 0.0 && t_query <= snaps.last().t) {
            return contract(format!(
                "query time {t_query} outside [0, {}]",
                snaps.last().t
            ));
        }
        let sp = &self.space;
        let mut alpha = sp.vector(mu0)?;
        let mut t = 0.0;
        for s in snaps.iter().filter(|s| s.t <= t_query) {
            sp.forward(&mut alpha, s.t - t, self.step);
            for (a, ind) in alpha.iter_mut().zip(sp.indicator(&s.y)) {
                *a *= ind;
            }
            t = s.t;
        }
        sp.forward(&mut alpha, t_query - t, self.step);
        let mut beta = vec![1.0; sp.len()];
        let mut s_time = snaps.last().t;
        for s in snaps.iter().rev().filter(|s| s.t > t_query) {
            sp.backward(&mut beta, s_time - s.t, self.step);
            for (b, ind) in beta.iter_mut().zip(sp.indicator(&s.y)) {
                *b *= ind;
            }
            s_time = s.t;
        }
        sp.backward(&mut beta, s_time - t_query, self.step);
        let post: Vec<f64> = alpha
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a * b).max(0.0))
            .collect();
        let total: f64 = post.iter().sum();
        if !(total > 1e-300) {
            return Err(Error::OutsideSupport(
                "observations have probability zero".into(),
            ));
        }
        sp.to_pmf(&post)
    }

    /// Probability of matching every snapshot.
    pub fn observation_probability(&self, mu0: &Pmf, snaps: &SnapshotSeq) -> Result<f64> {
        let sp = &self.space;
        let mut alpha = sp.vector(mu0)?;
        let mut t = 0.0;
        for s in snaps.iter() {
            sp.forward(&mut alpha, s.t - t, self.step);
            for (a, ind) in alpha.iter_mut().zip(sp.indicator(&s.y)) {
                *a *= ind;
            }
            t = s.t;
        }
        Ok(alpha.iter().sum())
    }
}

const EX3_MAX_STATES: usize = 1_000_000;

/// Law of the dimerization network at `t` from `z0`.
pub fn ex3_forward_pmf(z0: [i64; 3], c: [f64; 4], t: f64) -> Result<Pmf> {
    let net = dimerization(c);
    let mu0 = Pmf::point_mass(z0.to_vec());
    CmeSolver::new(&net, &mu0, EX3_MAX_STATES)?.forward_pmf(&mu0, t)
}

/// Law of the dimerization network at `T` given `Z3(T) = y_t_end`.
pub fn ex3_cond_at_t_end(z0: [i64; 3], y_t_end: i64, c: [f64; 4], t_end: f64) -> Result<Pmf> {
    let net = dimerization(c);
    let mu0 = Pmf::point_mass(z0.to_vec());
    let snaps = SnapshotSeq::new(
        vec![Snapshot {
            t: t_end,
            y: vec![y_t_end],
        }],
        1,
    )?;
    CmeSolver::new(&net, &mu0, EX3_MAX_STATES)?.conditional(&mu0, &snaps, t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::library::*;
    use crate::oracles::isomerization::ex2_cond_pmf;
    use crate::oracles::pure_death::ex1_cond_pmf;

    /// exp(A t) by scaling and squaring of a Taylor series.
    fn expm(a: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
        let n = a.len();
        let norm = a
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            * t;
        let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
        let scale = t / 2f64.powi(squarings);
        let mul = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum())
                        .collect()
                })
                .collect()
        };
        let mut result: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut term = result.clone();
        for k in 1..30 {
            term = mul(&term, a)
                .into_iter()
                .map(|r| r.into_iter().map(|v| v * scale / k as f64).collect())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    result[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            result = mul(&result, &result);
        }
        result
    }

    #[test]
    fn tiny_dimerization_matches_matrix_exponential() {
        let net = dimerization([0.5, 1.0, 0.1, 1.0]);
        let mu0 = Pmf::point_mass(vec![1, 1, 0]);
        let solver = CmeSolver::new(&net, &mu0, 100).unwrap();
        let sp = solver.space();
        assert!(sp.len() <= 6);
        let n = sp.len();
        let mut q = vec![vec![0.0; n]; n];
        for (i, z) in sp.states().iter().enumerate() {
            for j in 0..4 {
                let a = net.propensity_of(j, z);
                if a > 0.0 {
                    let mut w = z.clone();
                    net.fire(j, &mut w);
                    let k = sp.index_of(&w).unwrap();
                    q[i][k] += a;
                    q[i][i] -= a;
                }
            }
        }
        let e = expm(&q, 1.0);
        let i0 = sp.index_of(&[1, 1, 0]).unwrap();
        let p = solver.forward_pmf(&mu0, 1.0).unwrap();
        for (k, z) in sp.states().iter().enumerate() {
            assert!((p.prob(z) - e[i0][k]).abs() < 1e-8, "{z:?}");
        }
    }

    #[test]
    fn mass_conserved_for_dimerization() {
        let net = dimerization([0.5, 1.0, 0.1, 1.0]);
        let mu0 = Pmf::point_mass(vec![20, 20, 20]);
        let solver = CmeSolver::new(&net, &mu0, 1_000_000).unwrap();
        assert!(solver
            .space()
            .states()
            .iter()
            .all(|z| z[0] + z[1] + 2 * z[2] == 80));
        assert_eq!(solver.space().len(), 1681);
        let mut p = solver.space().vector(&mu0).unwrap();
        solver.space().forward(&mut p, 1.0, DEFAULT_STEP);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert_eq!(
            ex3_forward_pmf([20, 20, 20], [0.5, 1.0, 0.1, 1.0], 0.0)
                .unwrap()
                .prob(&[20, 20, 20]),
            1.0
        );
    }

    #[test]
    fn step_halving_is_converged() {
        let a = ex3_cond_at_t_end([20, 20, 20], 24, [0.5, 1.0, 0.1, 1.0], 1.0).unwrap();
        let net = dimerization([0.5, 1.0, 0.1, 1.0]);
        let mu0 = Pmf::point_mass(vec![20, 20, 20]);
        let snaps = SnapshotSeq::single(1.0, vec![24]).unwrap();
        let b = CmeSolver::new(&net, &mu0, 1_000_000)
            .unwrap()
            .with_step(DEFAULT_STEP / 2.0)
            .conditional(&mu0, &snaps, 1.0)
            .unwrap();
        assert!(crate::metrics::tve(&a, &b).unwrap() < 1e-8);
        assert!(a.iter().all(|(z, _)| z[2] == 24));
    }

    #[test]
    fn forward_backward_matches_closed_forms() {
        let net = pure_death(2.0);
        let mu0 = Pmf::point_mass(vec![30]);
        let snaps = SnapshotSeq::single(0.5, vec![12]).unwrap();
        let cme = CmeSolver::new(&net, &mu0, 100)
            .unwrap()
            .conditional(&mu0, &snaps, 0.2)
            .unwrap();
        let exact = ex1_cond_pmf(30, 12, 2.0, 0.2, 0.5).unwrap();
        assert!(crate::metrics::tve(&cme, &exact).unwrap() < 1e-8);

        let net = isomerization(1.0, 1.5);
        let mu0 = Pmf::point_mass(vec![10, 0]);
        let snaps = SnapshotSeq::single(1.0, vec![4]).unwrap();
        let cme = CmeSolver::new(&net, &mu0, 100)
            .unwrap()
            .conditional(&mu0, &snaps, 0.7)
            .unwrap();
        let exact = ex2_cond_pmf([10, 0], 4, [1.0, 1.5], 0.7, 1.0).unwrap();
        assert!(crate::metrics::tve(&cme, &exact).unwrap() < 1e-8);
    }

    #[test]
    fn multi_snapshot_bayes() {
        // pure death: the later snapshot makes earlier ones irrelevant given X(0.5)
        let net = pure_death(1.0);
        let mu0 = Pmf::point_mass(vec![15]);
        let snaps = SnapshotSeq::new(
            vec![
                Snapshot {
                    t: 0.5,
                    y: vec![10],
                },
                Snapshot { t: 1.0, y: vec![6] },
            ],
            1,
        )
        .unwrap();
        let solver = CmeSolver::new(&net, &mu0, 100).unwrap();
        let got = solver.conditional(&mu0, &snaps, 0.8).unwrap();
        let exact: Pmf = Pmf::from_pairs(
            1,
            ex1_cond_pmf(10, 6, 1.0, 0.3, 0.5)
                .unwrap()
                .iter()
                .map(|(z, p)| (z.clone(), p)),
        )
        .unwrap();
        assert!(crate::metrics::tve(&got, &exact).unwrap() < 1e-8);
        assert!(matches!(
            solver.conditional(&mu0, &SnapshotSeq::single(1.0, vec![16]).unwrap(), 0.5),
            Err(Error::OutsideSupport(_))
        ));
    }
}

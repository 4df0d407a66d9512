//! `S1 <-> S2` with `S2` observed: independent two-state walkers.

use super::pure_death::binomial_pmf;
use crate::error::{contract, Error, Result};
use crate::pmf::Pmf;

/// Two-state chain with rate `c1` for 1 -> 2 and `c2` for 2 -> 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateKernel {
    pub c1: f64,
    pub c2: f64,
}

impl TwoStateKernel {
    pub fn new(c1: f64, c2: f64) -> Self {
        TwoStateKernel { c1, c2 }
    }

    pub fn rate_matrix(&self) -> [[f64; 2]; 2] {
        [[-self.c1, self.c1], [self.c2, -self.c2]]
    }

    /// Transition matrix `P(t) = exp(Q t)`.
    pub fn transition(&self, t: f64) -> [[f64; 2]; 2] {
        let s = self.c1 + self.c2;
        if s == 0.0 {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        let decay = -(-s * t).exp_m1();
        let p11 = 1.0 - self.c1 * decay / s;
        let p21 = self.c2 * decay / s;
        [[p11, 1.0 - p11], [p21, 1.0 - p21]]
    }
}

/// `P(Z1(dt) = zt1 | Z(0) = z0)`.
pub fn ex2_transition(z0: [i64; 2], zt1: i64, c: [f64; 2], dt: f64) -> f64 {
    let p = TwoStateKernel::new(c[0], c[1]).transition(dt);
    (0..=z0[0].min(zt1))
        .map(|k| binomial_pmf(k, z0[0], p[0][0]) * binomial_pmf(zt1 - k, z0[1], p[1][0]))
        .sum()
}

/// `P(Y(T) = y_t_end | Z(0) = z0)` with `Y = Z2`.
pub fn ex2_obs_prob(z0: [i64; 2], y_t_end: i64, c: [f64; 2], t_end: f64) -> f64 {
    ex2_transition(z0, z0[0] + z0[1] - y_t_end, c, t_end)
}

/// Law of `Z(t)` given `Z(0) = z0` and `Z2(T) = y_t_end`.
pub fn ex2_cond_pmf(z0: [i64; 2], y_t_end: i64, c: [f64; 2], t: f64, t_end: f64) -> Result<Pmf> {
    if !(t >= 0.0 && t <= t_end && t_end > 0.0) {
        return contract(format!("need 0 <= t = {t} <= T = {t_end}"));
    }
    let n = z0[0] + z0[1];
    let norm = ex2_obs_prob(z0, y_t_end, c, t_end);
    if !(norm > 0.0) {
        return Err(Error::OutsideSupport(format!(
            "Y(T) = {y_t_end} has probability zero"
        )));
    }
    Pmf::normalized(
        2,
        (0..=n).map(|z1| {
            let p = ex2_transition(z0, z1, c, t)
                * ex2_transition([z1, n - z1], n - y_t_end, c, t_end - t);
            (vec![z1, n - z1], p)
        }),
    )
}

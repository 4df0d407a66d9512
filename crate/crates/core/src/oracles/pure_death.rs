//! `S -> 0` at rate `c`: every molecule survives independently.

use statrs::function::gamma::ln_gamma;

use crate::error::{contract, Error, Result};
use crate::pmf::Pmf;

/// `P(X = k)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf(k: i64, n: i64, p: f64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let (nf, kf) = (n as f64, k as f64);
    (ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
        + kf * p.ln()
        + (nf - kf) * (-p).ln_1p())
    .exp()
}

/// `P(X(t + dt) = x2 | X(t) = x1)`.
pub fn ex1_transition(x1: i64, x2: i64, c: f64, dt: f64) -> f64 {
    binomial_pmf(x2, x1, (-c * dt).exp())
}

/// Law of `X(t)` given `X(0) = x0` and `X(T) = xT`.
pub fn ex1_cond_pmf(x0: i64, x_t_end: i64, c: f64, t: f64, t_end: f64) -> Result<Pmf> {
    if x_t_end > x0 || x_t_end < 0 {
        return Err(Error::OutsideSupport(format!(
            "{x_t_end} molecules cannot remain from {x0}"
        )));
    }
    if !(t >= 0.0 && t <= t_end && t_end > 0.0) {
        return contract(format!("need 0 <= t = {t} <= T = {t_end}"));
    }
    let d = x0 - x_t_end;
    let p = (-(-c * t).exp_m1()) / (-(-c * t_end).exp_m1());
    Pmf::normalized(1, (0..=d).map(|k| (vec![x0 - k], binomial_pmf(k, d, p))))
}

/// Propensity of the death reaction conditioned on reaching `x_t_end` at `t_end`.
pub fn ex1_cond_propensity(x: i64, x_t_end: i64, c: f64, t: f64, t_end: f64) -> f64 {
    if x <= x_t_end {
        return 0.0;
    }
    c * (x - x_t_end) as f64 / (-(-c * (t_end - t)).exp_m1())
}

/// Waiting time to the next conditioned death from `x` at `t`, by inversion of
/// its survival function at the uniform `u`. Infinite once the target is met.
pub fn ex1_wait_sample(x: i64, x_t_end: i64, c: f64, t: f64, t_end: f64, u: f64) -> f64 {
    let d = x - x_t_end;
    if d <= 0 {
        return f64::INFINITY;
    }
    let e = (-c * (t_end - t)).exp();
    -((e + (1.0 - u).powf(1.0 / d as f64) * (1.0 - e)).ln()) / c
}

/// Survival function of [`ex1_wait_sample`].
pub fn ex1_wait_survival(x: i64, x_t_end: i64, c: f64, t: f64, t_end: f64, s: f64) -> f64 {
    let d = x - x_t_end;
    if d <= 0 {
        return 1.0;
    }
    let e = (-c * (t_end - t)).exp();
    (((-c * s).exp() - e) / (1.0 - e)).max(0.0).powi(d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_edge_cases() {
        assert_eq!(ex1_transition(5, 5, 2.0, 0.0), 1.0);
        assert_eq!(ex1_transition(5, 4, 2.0, 0.0), 0.0);
        assert!((ex1_transition(1, 0, 2.0, 0.3) - (1.0 - (-0.6f64).exp())).abs() < 1e-15);
        let s: f64 = (0..=40).map(|k| ex1_transition(40, k, 1.3, 0.4)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_endpoints() {
        assert_eq!(ex1_cond_pmf(10, 4, 1.0, 1.0, 1.0).unwrap().prob(&[4]), 1.0);
        assert_eq!(ex1_cond_pmf(10, 4, 1.0, 0.0, 1.0).unwrap().prob(&[10]), 1.0);
        assert!(matches!(
            ex1_cond_pmf(3, 4, 1.0, 0.5, 1.0),
            Err(Error::OutsideSupport(_))
        ));
    }

    #[test]
    fn conditional_matches_bayes_quotient() {
        let (x0, xt, c, tt) = (3, 1, 1.0, 2.0);
        let t = tt / 2.0;
        let pmf = ex1_cond_pmf(x0, xt, c, t, tt).unwrap();
        let norm = ex1_transition(x0, xt, c, tt);
        for x in xt..=x0 {
            let bayes = ex1_transition(x0, x, c, t) * ex1_transition(x, xt, c, tt - t) / norm;
            assert!((pmf.prob(&[x]) - bayes).abs() < 1e-12);
        }
    }

    #[test]
    fn chapman_kolmogorov() {
        for x2 in 0..=12 {
            let direct = ex1_transition(12, x2, 0.7, 0.9);
            let composed: f64 = (x2..=12)
                .map(|m| ex1_transition(12, m, 0.7, 0.4) * ex1_transition(m, x2, 0.7, 0.5))
                .sum();
            assert!((direct - composed).abs() < 1e-10);
        }
    }

    #[test]
    fn wait_time_boundaries() {
        assert_eq!(ex1_cond_propensity(4, 4, 2.0, 0.1, 0.5), 0.0);
        assert_eq!(ex1_wait_sample(4, 4, 2.0, 0.1, 0.5, 0.3), f64::INFINITY);
        assert!(ex1_wait_sample(6, 4, 2.0, 0.1, 0.5, 1e-12) < 1e-9);
        assert!((ex1_wait_sample(6, 4, 2.0, 0.1, 0.5, 1.0 - 1e-15) - 0.4).abs() < 1e-6);
    }
}

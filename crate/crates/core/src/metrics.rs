//! Weight diagnostics and distribution errors.

use statrs::function::gamma::ln_gamma;

use crate::error::{contract, Error, Result};
use crate::pmf::{Pmf, State};

/// Effective sample fraction `(sum w)^2 / (N sum w^2)`.
pub fn esf(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return contract("no weights");
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return contract(format!("invalid weight {w}"));
    }
    let max = weights.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::AllRejected);
    }
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), w| {
        let v = w / max;
        (s + v, s2 + v * v)
    });
    Ok((s * s / (weights.len() as f64 * s2)).min(1.0))
}

/// Weights `exp(log_w - max log_w)`; fails if every log weight is `-inf`.
pub fn weights_from_log(log_w: &[f64]) -> Result<Vec<f64>> {
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return contract("log weight is NaN or +inf");
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllRejected);
    }
    Ok(log_w.iter().map(|v| (v - max).exp()).collect())
}

/// [`esf`] of weights given in log space.
pub fn esf_log(log_w: &[f64]) -> Result<f64> {
    esf(&weights_from_log(log_w)?)
}

/// Normalized weighted histogram of projected states.
pub fn empirical_pmf<'a, I, F>(items: I, dim: usize, project: F) -> Result<Pmf>
where
    I: IntoIterator<Item = (&'a State, f64)>,
    F: Fn(&[i64]) -> State,
{
    Pmf::normalized(dim, items.into_iter().map(|(s, w)| (project(s), w)))
}

/// Total variation error as an unhalved L1 distance, in `[0, 2]`.
pub fn tve(estimate: &Pmf, oracle: &Pmf) -> Result<f64> {
    if estimate.dim() != oracle.dim() {
        return contract(format!(
            "pmf dimensions {} and {} differ",
            estimate.dim(),
            oracle.dim()
        ));
    }
    let mut sum: f64 = estimate
        .iter()
        .map(|(s, p)| (p - oracle.prob(s)).abs())
        .sum();
    sum += oracle
        .iter()
        .filter(|(s, _)| estimate.prob(s) == 0.0)
        .map(|(_, p)| p)
        .sum::<f64>();
    Ok(sum)
}

/// Sample mean and the half-width of its normal 95% interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.959963984540054 * (var / n).sqrt())
}

/// `ln P(Poisson(mu) = k)`.
#[inline]
pub fn poisson_ln_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_gamma(k as f64 + 1.0)
}

/// Exhaustive comparison of Poisson and indicator weights on a truncated lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWeightDiagnostic {
    pub mean_poisson: f64,
    pub mean_indicator: f64,
    pub esf_poisson: f64,
    pub esf_indicator: f64,
    pub rho_bar: f64,
    pub bound_ok: bool,
}

/// Per-coordinate truncation keeping Poisson tail mass far below `1e-10`.
pub fn poisson_truncation(mean: f64) -> u64 {
    (mean + 12.0 * mean.sqrt() + 10.0).ceil() as u64
}

fn lattice(bounds: &[u64]) -> impl Iterator<Item = Vec<u64>> + '_ {
    let total: u64 = bounds.iter().map(|b| b + 1).product();
    (0..total).map(move |mut idx| {
        bounds
            .iter()
            .map(|b| {
                let v = idx % (b + 1);
                idx /= b + 1;
                v
            })
            .collect()
    })
}

/// Effective sample fractions of the Poisson weight and the indicator weight
/// for `R'' = C R' + d`, where `R = (R', R'')` is Poisson with means
/// `(m_free, m_slaved)`. `c` has one row per slaved coordinate.
pub fn poisson_weight_diagnostic(
    m_free: &[f64],
    m_slaved: &[f64],
    c: &[Vec<i64>],
    d: &[i64],
) -> Result<PoissonWeightDiagnostic> {
    let m2 = m_slaved.len();
    if m2 == 0 || c.len() != m2 || d.len() != m2 || c.iter().any(|r| r.len() != m_free.len()) {
        return contract("diagnostic needs one row of C and one entry of d per slaved mean");
    }
    if m_free.iter().chain(m_slaved).any(|m| !(*m > 0.0)) {
        return contract("Poisson means must be positive");
    }
    let b_free: Vec<u64> = m_free.iter().map(|&m| poisson_truncation(m)).collect();
    let b_slaved: Vec<u64> = m_slaved.iter().map(|&m| poisson_truncation(m)).collect();
    let ln_p = |k: &[u64], m: &[f64]| -> f64 {
        k.iter().zip(m).map(|(&k, &m)| poisson_ln_pmf(k, m)).sum()
    };
    let target = |kf: &[u64]| -> Option<Vec<u64>> {
        (0..m2)
            .map(|r| {
                let v: i64 = c[r]
                    .iter()
                    .zip(kf)
                    .map(|(&a, &k)| a * k as i64)
                    .sum::<i64>()
                    + d[r];
                u64::try_from(v).ok()
            })
            .collect()
    };
    let (mut e_p, mut e_p2, mut rho_bar) = (0.0, 0.0, 0.0f64);
    for kf in lattice(&b_free) {
        let rho = target(&kf)
            .map(|ks| ln_p(&ks, m_slaved).exp())
            .unwrap_or(0.0);
        let pf = ln_p(&kf, m_free).exp();
        e_p += pf * rho;
        e_p2 += pf * rho * rho;
        rho_bar = rho_bar.max(rho);
    }
    // independent double sum over the joint lattice
    let mut e_i = 0.0;
    let slaved_lattice: Vec<(Vec<u64>, f64)> = lattice(&b_slaved)
        .map(|ks| {
            let p = ln_p(&ks, m_slaved).exp();
            (ks, p)
        })
        .collect();
    for kf in lattice(&b_free) {
        let pf = ln_p(&kf, m_free).exp();
        let t = target(&kf);
        for (ks, ps) in &slaved_lattice {
            if t.as_deref() == Some(ks.as_slice()) {
                e_i += pf * ps;
            }
        }
    }
    if !(e_p > 0.0) {
        return Err(Error::OutsideSupport(
            "constraint has probability zero".into(),
        ));
    }
    let esf_poisson = e_p * e_p / e_p2;
    let esf_indicator = e_i;
    Ok(PoissonWeightDiagnostic {
        mean_poisson: e_p,
        mean_indicator: e_i,
        esf_poisson,
        esf_indicator,
        rho_bar,
        bound_ok: esf_poisson >= esf_indicator / rho_bar * (1.0 - 1e-12),
    })
}

//! Resampling of weighted particles.

use rand::Rng;

use super::{Particle, WeightedEnsemble};
use crate::error::Result;
use crate::metrics::weights_from_log;
use crate::rng::StreamKey;

/// `n` indices drawn independently with probability proportional to `weights`.
pub fn resample_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut acc = 0.0;
    let cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

/// `n` indices from a single uniform offset on an evenly spaced grid.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let u0 = rng.random::<f64>();
    let mut out = Vec::with_capacity(n);
    let (mut i, mut acc) = (0, weights.first().copied().unwrap_or(0.0));
    for k in 0..n {
        let u = (k as f64 + u0) / n as f64 * total;
        while acc <= u && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
    }
    out
}

/// How particles are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleScheme {
    #[default]
    Multinomial,
    Systematic,
}

impl ResampleScheme {
    pub fn indices<R: Rng + ?Sized>(self, weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
        match self {
            ResampleScheme::Multinomial => resample_indices(weights, n, rng),
            ResampleScheme::Systematic => systematic_indices(weights, n, rng),
        }
    }
}

pub(crate) fn resample_particles(
    particles: &[Particle],
    scheme: ResampleScheme,
    key: StreamKey,
) -> Result<Vec<Particle>> {
    let w = weights_from_log(&particles.iter().map(|p| p.log_weight).collect::<Vec<_>>())?;
    let idx = scheme.indices(&w, particles.len(), &mut key.rng(0));
    Ok(idx
        .into_iter()
        .map(|i| {
            let mut p = particles[i].clone();
            p.log_weight = 0.0;
            p.log_poisson = 0.0;
            p.log_girsanov = 0.0;
            p
        })
        .collect())
}

/// Draw `N_s` particles with replacement in proportion to weight; all output
/// weights are one.
pub fn resample(ens: &WeightedEnsemble, key: StreamKey) -> Result<WeightedEnsemble> {
    Ok(WeightedEnsemble::new(resample_particles(
        ens.particles(),
        ResampleScheme::Multinomial,
        key,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_weight_copies_one_particle() {
        let mut w = vec![0.0; 50];
        w[0] = 1.0;
        let idx = resample_indices(&w, 50, &mut StreamKey::new(1).rng(0));
        assert!(idx.iter().all(|&i| i == 0));
    }

    #[test]
    fn systematic_counts_stay_within_one_of_expectation() {
        let w = [0.5, 1.5, 3.0, 0.0, 5.0];
        let n = 37;
        for r in 0..200 {
            let idx = systematic_indices(&w, n, &mut StreamKey::new(4).rng(r));
            assert!(idx.windows(2).all(|p| p[0] <= p[1]));
            for (i, wi) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&j| j == i).count() as f64;
                assert!(
                    (c - n as f64 * wi / 10.0).abs() < 1.0 + 1e-9,
                    "particle {i}: {c}"
                );
            }
        }
    }

    #[test]
    fn systematic_keeps_equal_weights() {
        let idx = systematic_indices(&[1.0; 8], 8, &mut StreamKey::new(2).rng(0));
        assert_eq!(idx, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn multiplicities_match_multinomial_mean() {
        let w = [1.0, 2.0, 3.0, 4.0];
        let n = 40;
        let reps = 2000;
        let key = StreamKey::new(9);
        let mut totals = [0.0f64; 4];
        for r in 0..reps {
            for i in resample_indices(&w, n, &mut key.rng(r)) {
                totals[i] += 1.0;
            }
        }
        for (i, t) in totals.iter().enumerate() {
            let p = w[i] / 10.0;
            let mean = t / reps as f64;
            let sd = (n as f64 * p * (1.0 - p) / reps as f64).sqrt();
            assert!(
                (mean - n as f64 * p).abs() < 3.0 * sd,
                "particle {i}: {mean}"
            );
        }
    }
}

//! Joint rejection sampling of the start state and the free reaction counts.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::Particle;
use crate::error::{contract, Error, Result};
use crate::intensity::{positivity_floor, IntensityGrid};
use crate::metrics::poisson_ln_pmf;
use crate::network::ReactionNetwork;
use crate::pmf::{Pmf, PmfSampler, State};
use crate::split::ObservationSplit;

/// Where proposal intensities come from during one interval.
#[derive(Debug, Clone)]
pub(crate) enum IntensitySource {
    Shared(Arc<IntensityGrid>),
    /// Constant intensity `max(a(z), floor)` at the particle's start state.
    PerParticle {
        floor: Vec<f64>,
        horizon: f64,
    },
}

impl IntensitySource {
    pub(crate) fn per_particle(net: &ReactionNetwork, horizon: f64) -> Self {
        IntensitySource::PerParticle {
            floor: positivity_floor(net),
            horizon,
        }
    }

    pub(crate) fn grid_for(&self, net: &ReactionNetwork, z: &[i64]) -> Result<Arc<IntensityGrid>> {
        match self {
            IntensitySource::Shared(g) => Ok(g.clone()),
            IntensitySource::PerParticle { floor, horizon } => {
                let rates: Vec<f64> = (0..net.n_reactions())
                    .map(|j| net.propensity_of(j, z).max(floor[j]))
                    .collect();
                Ok(Arc::new(IntensityGrid::constant(&rates, *horizon)?))
            }
        }
    }

    /// Cell width, if every particle shares the same mesh.
    pub(crate) fn dt(&self) -> f64 {
        match self {
            IntensitySource::Shared(g) => g.dt(),
            IntensitySource::PerParticle { horizon, .. } => *horizon,
        }
    }

    pub(crate) fn n_cells(&self) -> usize {
        match self {
            IntensitySource::Shared(g) => g.n_cells(),
            IntensitySource::PerParticle { .. } => 1,
        }
    }
}

/// Law of the interval start state.
pub(crate) enum Ancestors<'a> {
    Law(PmfSampler),
    /// Uniform choice; the ancestor's weight is carried along.
    Uniform(&'a [Particle]),
    /// Choice proportional to weight; unit inherited weight.
    Proportional {
        particles: &'a [Particle],
        cdf: Vec<f64>,
    },
}

impl<'a> Ancestors<'a> {
    pub(crate) fn proportional(particles: &'a [Particle]) -> Result<Self> {
        let w = crate::metrics::weights_from_log(
            &particles.iter().map(|p| p.log_weight).collect::<Vec<_>>(),
        )?;
        let mut acc = 0.0;
        let cdf = w
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Ok(Ancestors::Proportional { particles, cdf })
    }

    /// Start state, parent particle and inherited log weight.
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> (&State, Option<&'a Particle>, f64) {
        match self {
            Ancestors::Law(s) => (s.sample(rng), None, 0.0),
            Ancestors::Uniform(ps) => {
                let p = &ps[rng.random_range(0..ps.len())];
                (&p.state, Some(p), p.log_weight)
            }
            Ancestors::Proportional { particles, cdf } => {
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                let i = cdf.partition_point(|&c| c <= u).min(particles.len() - 1);
                let p = &particles[i];
                (&p.state, Some(p), 0.0)
            }
        }
    }

    /// Distribution the ancestors represent.
    pub(crate) fn law(&self, mu0: Option<&Pmf>) -> Result<Pmf> {
        match self {
            Ancestors::Law(_) => Ok(mu0.expect("law ancestors come with their pmf").clone()),
            Ancestors::Uniform(ps) | Ancestors::Proportional { particles: ps, .. } => {
                let w = crate::metrics::weights_from_log(
                    &ps.iter().map(|p| p.log_weight).collect::<Vec<_>>(),
                )?;
                let dim = ps[0].state.len();
                Pmf::normalized(dim, ps.iter().map(|p| p.state.clone()).zip(w))
            }
        }
    }
}

/// Free counts drawn from their Poisson proposal and the slaved counts they
/// imply, if admissible, with `log W`.
#[inline]
fn try_counts<R: Rng + ?Sized>(
    split: &ObservationSplit,
    grid: &IntensityGrid,
    dy: &[i64],
    rng: &mut R,
    k_free: &mut [u64],
) -> Option<(Vec<u64>, f64)> {
    for (k, &j) in k_free.iter_mut().zip(split.free()) {
        let mu = grid.mass_from(j, 0);
        *k = Poisson::new(mu).expect("positive mean").sample(rng) as u64;
    }
    let k_slaved = split.slaved_counts_unchecked(dy, k_free)?;
    let log_w = split
        .slaved()
        .iter()
        .zip(&k_slaved)
        .map(|(&j, &k)| poisson_ln_pmf(k, grid.mass_from(j, 0)))
        .sum();
    Some((split.assemble(k_free, &k_slaved), log_w))
}

pub(crate) struct DrawCtx<'a> {
    pub net: &'a ReactionNetwork,
    pub split: &'a ObservationSplit,
    pub source: &'a IntensitySource,
    pub y: &'a [i64],
    pub max_rejects: u64,
    pub interval: Option<usize>,
    pub keep_events: bool,
}

/// Draw one particle for the interval, redrawing the ancestor on every rejection.
pub(crate) fn draw_particle<R: Rng + ?Sized>(
    ctx: &DrawCtx<'_>,
    anc: &Ancestors<'_>,
    rng: &mut R,
) -> Result<Particle> {
    let mut k_free = vec![0u64; ctx.split.n_free()];
    let mut dy = vec![0i64; ctx.y.len()];
    let obs = ctx.net.observed();
    let mut rejections = 0u64;
    loop {
        let (start, parent, inherited) = anc.pick(rng);
        for ((d, &y), &i) in dy.iter_mut().zip(ctx.y).zip(obs) {
            *d = y - start[i];
        }
        let grid = ctx.source.grid_for(ctx.net, start)?;
        if let Some((counts, log_poisson)) = try_counts(ctx.split, &grid, &dy, rng, &mut k_free) {
            return Ok(Particle {
                z0: start.clone(),
                state: start.clone(),
                k_rem: counts.clone(),
                counts,
                events: match parent {
                    Some(p) => p.events.clone(),
                    None => ctx.keep_events.then(Vec::new),
                },
                log_poisson,
                log_girsanov: 0.0,
                log_weight: inherited + log_poisson,
                mark: parent.and_then(|p| p.mark.clone()),
                rejections,
                cell: 0,
                grid: Some(grid),
            });
        }
        rejections += 1;
        if rejections >= ctx.max_rejects {
            return Err(Error::TargetUnreachable {
                attempts: rejections,
                interval: ctx.interval,
            });
        }
    }
}

/// Result of [`draw_initial_and_counts`].
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub z0: State,
    /// Full count vector, reaction order.
    pub counts: Vec<u64>,
    pub log_poisson: f64,
    pub rejections: u64,
}

/// Sample `(z0, K')` from `mu0` and the Poisson proposal jointly until the
/// slaved counts reaching `y` are nonnegative integers.
pub fn draw_initial_and_counts<R: Rng + ?Sized>(
    net: &ReactionNetwork,
    mu0: &Pmf,
    split: &ObservationSplit,
    grid: &IntensityGrid,
    y: &[i64],
    rng: &mut R,
    max_rejects: u64,
) -> Result<Draw> {
    if mu0.dim() != net.n_species()
        || y.len() != net.n_observed()
        || grid.n_reactions() != net.n_reactions()
    {
        return contract("initial law, observation and grid must match the network");
    }
    let source = IntensitySource::Shared(Arc::new(grid.clone()));
    let ctx = DrawCtx {
        net,
        split,
        source: &source,
        y,
        max_rejects,
        interval: None,
        keep_events: false,
    };
    let p = draw_particle(&ctx, &Ancestors::Law(mu0.sampler()), rng)?;
    Ok(Draw {
        z0: p.z0,
        counts: p.counts,
        log_poisson: p.log_poisson,
        rejections: p.rejections,
    })
}

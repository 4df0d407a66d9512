//! Proposal paths that hit every snapshot exactly, with Poisson and Girsanov
//! importance weights.

mod bridge;
mod draw;
mod filter;
mod resample;

use std::io::Write;
use std::sync::Arc;

pub use bridge::{girsanov_log_weight, interpolate};
pub use draw::{draw_initial_and_counts, Draw};
pub use filter::{
    filter_snapshots, target_interval, two_stage, FilterOutput, IntensityPlan, IntervalReport,
    TargetingOptions, TwoStageMode,
};
pub use resample::{resample, resample_indices, systematic_indices, ResampleScheme};

use crate::error::Result;
use crate::intensity::IntensityGrid;
use crate::metrics::{empirical_pmf, esf_log, weights_from_log};
use crate::pmf::{Pmf, State};
use crate::simulate::Event;

/// Default cap on joint rejections per particle.
pub const DEFAULT_MAX_REJECTS: u64 = 1_000_000;

/// One weighted proposal path.
#[derive(Debug, Clone)]
pub struct Particle {
    /// State at the start of the current interval.
    pub z0: State,
    /// Reaction counts drawn for the current interval.
    pub counts: Vec<u64>,
    /// Current state; the snapshot value's observed block once the interval ends.
    pub state: State,
    /// Full history in global time, when requested.
    pub events: Option<Vec<Event>>,
    /// `log W` for the current interval.
    pub log_poisson: f64,
    /// `log L` accumulated since the interval start or the last resampling.
    pub log_girsanov: f64,
    /// Total log weight, including weight inherited from the ancestor.
    pub log_weight: f64,
    /// State at the query time once it has been passed.
    pub mark: Option<State>,
    /// Joint rejections spent drawing this particle.
    pub rejections: u64,
    pub(crate) k_rem: Vec<u64>,
    pub(crate) cell: usize,
    pub(crate) grid: Option<Arc<IntensityGrid>>,
}

impl Particle {
    /// Zero weight: some reaction fired where its propensity vanishes.
    pub fn is_rejected(&self) -> bool {
        self.log_weight == f64::NEG_INFINITY
    }

    /// Proposal intensity of the current interval; absent for unconditioned paths.
    pub fn grid(&self) -> Option<&IntensityGrid> {
        self.grid.as_deref()
    }
}

/// Particles with importance weights kept in log space.
#[derive(Debug, Clone)]
pub struct WeightedEnsemble {
    particles: Vec<Particle>,
}

impl WeightedEnsemble {
    pub fn new(particles: Vec<Particle>) -> Self {
        WeightedEnsemble { particles }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn into_particles(self) -> Vec<Particle> {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight).collect()
    }

    /// Weights rescaled so the largest equals one.
    pub fn weights(&self) -> Result<Vec<f64>> {
        weights_from_log(&self.log_weights())
    }

    /// Weights summing to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let mut w = self.weights()?;
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        Ok(w)
    }

    /// Overall effective sample fraction.
    pub fn esf(&self) -> Result<f64> {
        esf_log(&self.log_weights())
    }

    pub fn esf_poisson(&self) -> Result<f64> {
        esf_log(
            &self
                .particles
                .iter()
                .map(|p| p.log_poisson)
                .collect::<Vec<_>>(),
        )
    }

    pub fn esf_girsanov(&self) -> Result<f64> {
        esf_log(
            &self
                .particles
                .iter()
                .map(|p| p.log_girsanov)
                .collect::<Vec<_>>(),
        )
    }

    /// Weighted distribution of the states recorded at the query time.
    pub fn estimate(&self) -> Result<Pmf> {
        self.estimate_projected(|s| s.to_vec())
    }

    pub fn estimate_projected<F: Fn(&[i64]) -> State>(&self, project: F) -> Result<Pmf> {
        let w = self.weights()?;
        let dim = self
            .particles
            .first()
            .map(|p| project(&p.state).len())
            .unwrap_or(0);
        let marks = self
            .particles
            .iter()
            .map(|p| {
                p.mark
                    .as_ref()
                    .ok_or_else(|| crate::Error::Contract("query time not reached".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        empirical_pmf(marks.into_iter().zip(w), dim, project)
    }

    /// Weighted distribution of the current states.
    pub fn terminal_estimate(&self) -> Result<Pmf> {
        let w = self.weights()?;
        let dim = self.particles.first().map(|p| p.state.len()).unwrap_or(0);
        empirical_pmf(self.particles.iter().map(|p| &p.state).zip(w), dim, |s| {
            s.to_vec()
        })
    }

    /// Columns: particle id, terminal state, log weights.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "particle,state,log_poisson,log_girsanov,log_weight")?;
        for (i, p) in self.particles.iter().enumerate() {
            let s: Vec<String> = p.state.iter().map(|v| v.to_string()).collect();
            writeln!(
                w,
                "{i},{},{},{},{}",
                s.join(" "),
                p.log_poisson,
                p.log_girsanov,
                p.log_weight
            )?;
        }
        Ok(())
    }
}

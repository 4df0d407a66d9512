use std::collections::BTreeMap;

use crate::error::{contract, Result};

/// Integer lattice state.
pub type State = Vec<i64>;

/// Sparse probability mass function over integer states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Pmf {
    dim: usize,
    entries: BTreeMap<State, f64>,
}

pub const PMF_SUM_TOL: f64 = 1e-9;

impl Pmf {
    pub fn point_mass(state: State) -> Self {
        let dim = state.len();
        let mut entries = BTreeMap::new();
        entries.insert(state, 1.0);
        Pmf { dim, entries }
    }

    /// Build from (state, probability) pairs; repeated states accumulate.
    /// Fails unless the masses are nonnegative and sum to one.
    pub fn from_pairs<I: IntoIterator<Item = (State, f64)>>(dim: usize, pairs: I) -> Result<Self> {
        let pmf = Self::accumulate(dim, pairs)?;
        let total = pmf.total();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return contract(format!("pmf sums to {total}, expected 1"));
        }
        Ok(pmf)
    }

    /// Build from nonnegative weights and rescale to unit mass.
    pub fn normalized<I: IntoIterator<Item = (State, f64)>>(dim: usize, pairs: I) -> Result<Self> {
        let mut pmf = Self::accumulate(dim, pairs)?;
        let total = pmf.total();
        if !(total > 0.0) || !total.is_finite() {
            return Err(crate::Error::AllRejected);
        }
        for p in pmf.entries.values_mut() {
            *p /= total;
        }
        Ok(pmf)
    }

    fn accumulate<I: IntoIterator<Item = (State, f64)>>(dim: usize, pairs: I) -> Result<Self> {
        let mut entries: BTreeMap<State, f64> = BTreeMap::new();
        for (s, p) in pairs {
            if s.len() != dim {
                return contract(format!(
                    "state {s:?} has dimension {}, expected {dim}",
                    s.len()
                ));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return contract(format!("invalid mass {p} at {s:?}"));
            }
            if p > 0.0 {
                *entries.entry(s).or_insert(0.0) += p;
            }
        }
        Ok(Pmf { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prob(&self, state: &[i64]) -> f64 {
        self.entries.get(state).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, f64)> {
        self.entries.iter().map(|(s, p)| (s, *p))
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (s, p) in self.iter() {
            for (mi, &si) in m.iter_mut().zip(s) {
                *mi += p * si as f64;
            }
        }
        m
    }

    /// Marginal on the given coordinates.
    pub fn project(&self, coords: &[usize]) -> Pmf {
        let mut entries: BTreeMap<State, f64> = BTreeMap::new();
        for (s, p) in self.iter() {
            let key: State = coords.iter().map(|&c| s[c]).collect();
            *entries.entry(key).or_insert(0.0) += p;
        }
        Pmf {
            dim: coords.len(),
            entries,
        }
    }

    /// Columns: state (space separated), probability.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "state,probability")?;
        for (s, p) in self.iter() {
            let s: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{p:.12e}", s.join(" "))?;
        }
        Ok(())
    }

    /// Cumulative table for categorical sampling.
    pub fn sampler(&self) -> PmfSampler {
        let mut states = Vec::with_capacity(self.len());
        let mut cdf = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for (s, p) in self.iter() {
            acc += p;
            states.push(s.clone());
            cdf.push(acc);
        }
        PmfSampler { states, cdf }
    }
}

/// Inverse-CDF sampler over a fixed pmf.
#[derive(Debug, Clone)]
pub struct PmfSampler {
    states: Vec<State>,
    cdf: Vec<f64>,
}

impl PmfSampler {
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> &State {
        let total = *self.cdf.last().expect("empty pmf");
        let u = rng.random::<f64>() * total;
        let idx = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.states.len() - 1);
        &self.states[idx]
    }
}

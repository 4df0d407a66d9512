//! Mass-action reaction networks.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// A reaction network with mass-action kinetics and a set of observed species.
///
/// Reaction `j` consumes `reactants[j]` and produces `products[j]`; its state
/// change is `products[j] - reactants[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionNetwork {
    n_species: usize,
    reactants: Vec<Vec<u32>>,
    stoich: Vec<Vec<i64>>,
    rates: Vec<f64>,
    observed: Vec<usize>,
}

impl ReactionNetwork {
    /// `reactants[j]` and `products[j]` are per-species multiplicities of reaction `j`.
    pub fn new(
        n_species: usize,
        reactants: Vec<Vec<u32>>,
        products: Vec<Vec<u32>>,
        rates: Vec<f64>,
        observed: Vec<usize>,
    ) -> Result<Self> {
        if n_species == 0 {
            return contract("network needs at least one species");
        }
        let m = rates.len();
        if m == 0 {
            return contract("network needs at least one reaction");
        }
        if reactants.len() != m || products.len() != m {
            return contract(format!(
                "{} reactant rows, {} product rows, {} rate constants",
                reactants.len(),
                products.len(),
                m
            ));
        }
        for (j, (r, p)) in reactants.iter().zip(&products).enumerate() {
            if r.len() != n_species || p.len() != n_species {
                return contract(format!("reaction {j} does not list {n_species} species"));
            }
        }
        if let Some((j, c)) = rates
            .iter()
            .enumerate()
            .find(|(_, c)| !(**c >= 0.0) || !c.is_finite())
        {
            return contract(format!(
                "rate constant {c} of reaction {j} is not a nonnegative real"
            ));
        }
        let mut seen = vec![false; n_species];
        for &i in &observed {
            if i >= n_species {
                return contract(format!("observed species {i} out of range"));
            }
            if seen[i] {
                return contract(format!("observed species {i} listed twice"));
            }
            seen[i] = true;
        }
        let stoich = reactants
            .iter()
            .zip(&products)
            .map(|(r, p)| {
                r.iter()
                    .zip(p)
                    .map(|(&a, &b)| b as i64 - a as i64)
                    .collect()
            })
            .collect();
        Ok(ReactionNetwork {
            n_species,
            reactants,
            stoich,
            rates,
            observed,
        })
    }

    /// Build from state-change vectors alone, treating every negative entry as a
    /// first-order-per-molecule reactant requirement.
    pub fn from_stoichiometry(
        stoich: Vec<Vec<i64>>,
        rates: Vec<f64>,
        observed: Vec<usize>,
    ) -> Result<Self> {
        let n = stoich.first().map(Vec::len).unwrap_or(0);
        let reactants = stoich
            .iter()
            .map(|v| v.iter().map(|&x| (-x).max(0) as u32).collect())
            .collect();
        let products = stoich
            .iter()
            .map(|v| v.iter().map(|&x| x.max(0) as u32).collect())
            .collect();
        Self::new(n, reactants, products, rates, observed)
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_reactions(&self) -> usize {
        self.rates.len()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// State change of reaction `j`.
    pub fn change(&self, j: usize) -> &[i64] {
        &self.stoich[j]
    }

    pub fn reactant_orders(&self, j: usize) -> &[u32] {
        &self.reactants[j]
    }

    /// Rows of the stoichiometry restricted to the observed species (n2 x m).
    pub fn observed_stoich(&self) -> Vec<Vec<i64>> {
        self.observed
            .iter()
            .map(|&i| self.stoich.iter().map(|col| col[i]).collect())
            .collect()
    }

    /// Observed block of a state.
    pub fn observe(&self, z: &[i64]) -> Vec<i64> {
        self.observed.iter().map(|&i| z[i]).collect()
    }

    pub fn check_state(&self, z: &[i64]) -> Result<()> {
        if z.len() != self.n_species {
            return contract(format!(
                "state has dimension {}, network has {} species",
                z.len(),
                self.n_species
            ));
        }
        Ok(())
    }

    /// Mass-action propensity of reaction `j`; zero whenever some reactant count
    /// is below its multiplicity, including at negative counts.
    #[inline]
    pub fn propensity_of(&self, j: usize, z: &[i64]) -> f64 {
        let mut a = self.rates[j];
        for (&zi, &o) in z.iter().zip(&self.reactants[j]) {
            if o == 0 {
                continue;
            }
            let o = o as i64;
            if zi < o {
                return 0.0;
            }
            for k in 0..o {
                a *= (zi - k) as f64;
            }
        }
        a
    }

    /// All propensities at `z`, written into `out`.
    #[inline]
    pub fn propensities_into(&self, z: &[i64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.propensity_of(j, z);
        }
    }

    pub fn propensity(&self, z: &[i64]) -> Result<Vec<f64>> {
        self.check_state(z)?;
        let mut out = vec![0.0; self.n_reactions()];
        self.propensities_into(z, &mut out);
        Ok(out)
    }

    /// Propensity polynomial evaluated at a real-valued state (reaction-rate
    /// equations). Negative falling-factorial factors are clamped to zero.
    pub fn propensity_real(&self, j: usize, z: &[f64]) -> f64 {
        let mut a = self.rates[j];
        for (&zi, &o) in z.iter().zip(&self.reactants[j]) {
            for k in 0..o {
                a *= (zi - k as f64).max(0.0);
            }
        }
        a
    }

    /// Smallest positive value the propensity of reaction `j` takes on the lattice.
    pub fn min_positive_propensity(&self, j: usize) -> f64 {
        let z: Vec<i64> = self.reactants[j].iter().map(|&o| o as i64).collect();
        self.propensity_of(j, &z)
    }

    /// Apply reaction `j` to `z` in place.
    #[inline]
    pub fn fire(&self, j: usize, z: &mut [i64]) {
        for (zi, d) in z.iter_mut().zip(&self.stoich[j]) {
            *zi += d;
        }
    }

    /// `z0 + nu * counts`.
    pub fn apply_counts(&self, z0: &[i64], counts: &[u64]) -> Vec<i64> {
        let mut z = z0.to_vec();
        for (j, &k) in counts.iter().enumerate() {
            for (zi, d) in z.iter_mut().zip(&self.stoich[j]) {
                *zi += d * k as i64;
            }
        }
        z
    }
}

/// Networks used throughout the tests and experiments.
pub mod library {
    use super::ReactionNetwork;

    /// `S -> 0` with rate `c`, species observed.
    pub fn pure_death(c: f64) -> ReactionNetwork {
        ReactionNetwork::new(1, vec![vec![1]], vec![vec![0]], vec![c], vec![0]).unwrap()
    }

    /// `S1 -> S2`, `S2 -> S1`; `S2` observed.
    pub fn isomerization(c1: f64, c2: f64) -> ReactionNetwork {
        ReactionNetwork::new(
            2,
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![0, 1], vec![1, 0]],
            vec![c1, c2],
            vec![1],
        )
        .unwrap()
    }

    /// `S1 <-> S2`, `S1 + S2 <-> S3`; `S3` observed.
    pub fn dimerization(c: [f64; 4]) -> ReactionNetwork {
        ReactionNetwork::new(
            3,
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0], vec![0, 0, 1]],
            vec![vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 1], vec![1, 1, 0]],
            c.to_vec(),
            vec![2],
        )
        .unwrap()
    }

    /// `0 -> S` with constant rate `c`, species observed.
    pub fn immigration(c: f64) -> ReactionNetwork {
        ReactionNetwork::new(1, vec![vec![0]], vec![vec![1]], vec![c], vec![0]).unwrap()
    }
}

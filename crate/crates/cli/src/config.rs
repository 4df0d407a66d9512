//! Experiment configuration document.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use snapfilter::{
    IntensityPlan, Method, OracleKind, Pmf, ReactionNetwork, ResampleScheme, Snapshot, SnapshotSeq,
    TargetingOptions, TwoStageMode,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub name: Option<String>,
    pub network: NetworkSpec,
    /// Point-mass initial state, in species order.
    #[serde(default)]
    pub initial_state: Option<Vec<i64>>,
    /// General initial law; mutually exclusive with `initial_state`.
    #[serde(default)]
    pub initial_distribution: Option<Vec<WeightedState>>,
    /// Single observation case.
    #[serde(default)]
    pub snapshots: Option<Vec<Snapshot>>,
    /// Several named observation cases sharing everything else.
    #[serde(default)]
    pub cases: Option<Vec<CaseSpec>>,
    pub query_time: f64,
    #[serde(default)]
    pub oracle: OracleSpec,
    pub methods: Vec<MethodSpec>,
    pub trials: TrialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub species: Vec<String>,
    pub reactions: Vec<ReactionSpec>,
    pub observed: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    /// Species name to multiplicity; absent species have multiplicity 0.
    #[serde(default)]
    pub reactants: BTreeMap<String, u32>,
    #[serde(default)]
    pub products: BTreeMap<String, u32>,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedState {
    pub state: Vec<i64>,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub name: String,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSpec {
    #[default]
    Auto,
    PureDeath,
    Isomerization,
    Cme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Naive,
    Targeting,
    TwoStage,
    CpExact,
    CpApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityKind {
    Rre,
    Mc,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageMode {
    Common,
    PerParticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub kind: MethodKind,
    /// Row label; derived from the other fields when absent.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub intensity: Option<IntensityKind>,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Paths for the Monte Carlo intensity.
    #[serde(default)]
    pub mc_paths: Option<usize>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub mode: Option<StageMode>,
    #[serde(default)]
    pub resample_every: Option<f64>,
    #[serde(default)]
    pub resample_scheme: Option<SchemeSpec>,
    /// Zero-based reaction indices.
    #[serde(default)]
    pub free_reactions: Option<Vec<usize>>,
    #[serde(default)]
    pub max_rejects: Option<u64>,
    /// Particle count override.
    #[serde(default, rename = "N_s")]
    pub n_s: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSpec {
    #[serde(rename = "N_s")]
    pub n_s: usize,
    #[serde(rename = "N_r")]
    pub n_r: usize,
    #[serde(default)]
    pub seed: u64,
}

/// One observation case ready to run.
#[derive(Debug, Clone)]
pub struct Case {
    pub name: String,
    pub snaps: SnapshotSeq,
}

pub const DEFAULT_MC_PATHS: usize = 1000;

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn network(&self) -> snapfilter::Result<ReactionNetwork> {
        let spec = &self.network;
        let index = |name: &str| spec.species.iter().position(|s| s == name);
        let mut reactants = Vec::new();
        let mut products = Vec::new();
        for (j, r) in spec.reactions.iter().enumerate() {
            let mut a = vec![0u32; spec.species.len()];
            let mut b = vec![0u32; spec.species.len()];
            for (side, out) in [(&r.reactants, &mut a), (&r.products, &mut b)] {
                for (name, &mult) in side {
                    let i = index(name).ok_or_else(|| {
                        snapfilter::Error::Contract(format!(
                            "reaction {j} names unknown species {name:?}"
                        ))
                    })?;
                    out[i] = mult;
                }
            }
            reactants.push(a);
            products.push(b);
        }
        let observed = spec
            .observed
            .iter()
            .map(|name| {
                index(name).ok_or_else(|| {
                    snapfilter::Error::Contract(format!("unknown observed species {name:?}"))
                })
            })
            .collect::<snapfilter::Result<Vec<_>>>()?;
        let rates = spec.reactions.iter().map(|r| r.rate).collect();
        ReactionNetwork::new(spec.species.len(), reactants, products, rates, observed)
    }

    pub fn initial_law(&self) -> snapfilter::Result<Pmf> {
        match (&self.initial_state, &self.initial_distribution) {
            (Some(z), None) => Ok(Pmf::point_mass(z.clone())),
            (None, Some(d)) => Pmf::from_pairs(
                self.network.species.len(),
                d.iter().map(|w| (w.state.clone(), w.p)),
            ),
            _ => Err(snapfilter::Error::Contract(
                "give exactly one of initial_state and initial_distribution".into(),
            )),
        }
    }

    /// Raw snapshot lists per case, before ordering checks.
    pub fn raw_cases(&self) -> snapfilter::Result<Vec<(String, Vec<Snapshot>)>> {
        match (&self.snapshots, &self.cases) {
            (Some(s), None) => Ok(vec![("main".into(), s.clone())]),
            (None, Some(cs)) if !cs.is_empty() => Ok(cs
                .iter()
                .map(|c| (c.name.clone(), c.snapshots.clone()))
                .collect()),
            _ => Err(snapfilter::Error::Contract(
                "give exactly one of snapshots and a non-empty cases list".into(),
            )),
        }
    }

    pub fn cases(&self, n_observed: usize) -> snapfilter::Result<Vec<Case>> {
        self.raw_cases()?
            .into_iter()
            .map(|(name, s)| {
                Ok(Case {
                    name,
                    snaps: SnapshotSeq::new(s, n_observed)?,
                })
            })
            .collect()
    }

    pub fn oracle_kind(&self) -> OracleKind {
        match self.oracle {
            OracleSpec::Auto => OracleKind::Auto,
            OracleSpec::PureDeath => OracleKind::PureDeath,
            OracleSpec::Isomerization => OracleKind::Isomerization,
            OracleSpec::Cme => OracleKind::Cme,
        }
    }
}

impl MethodSpec {
    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = match self.kind {
            MethodKind::Naive => "naive".to_string(),
            MethodKind::CpExact => "cp_exact".to_string(),
            MethodKind::CpApprox => "cp_approx".to_string(),
            MethodKind::Targeting => {
                let i = match self.intensity.unwrap_or(IntensityKind::Rre) {
                    IntensityKind::Rre => "rre",
                    IntensityKind::Mc => "mc",
                    IntensityKind::Optimized => "optimized",
                };
                format!("targeting_{i}")
            }
            MethodKind::TwoStage => {
                let m = match self.mode.unwrap_or(StageMode::Common) {
                    StageMode::Common => "common",
                    StageMode::PerParticle => "per_particle",
                };
                format!("two_stage_{m}_t0={}", self.t0.unwrap_or(f64::NAN))
            }
        };
        if let Some(ds) = self.resample_every {
            s.push_str(&format!("_resample={ds}"));
        }
        if let Some(n) = self.n_s {
            s.push_str(&format!("_N={n}"));
        }
        s
    }

    fn dt(&self) -> snapfilter::Result<f64> {
        self.dt
            .ok_or_else(|| snapfilter::Error::Contract(format!("method {} needs dt", self.label())))
    }

    fn options(&self, plan: IntensityPlan) -> TargetingOptions {
        let mut o = TargetingOptions::new(plan);
        o.resample_every = self.resample_every;
        o.resample_scheme = match self.resample_scheme {
            Some(SchemeSpec::Systematic) => ResampleScheme::Systematic,
            _ => ResampleScheme::Multinomial,
        };
        if let Some(m) = self.max_rejects {
            o.max_rejects = m;
        }
        o
    }

    pub fn method(&self) -> snapfilter::Result<Method> {
        Ok(match self.kind {
            MethodKind::Naive => Method::Naive,
            MethodKind::CpExact => Method::CpExact,
            MethodKind::CpApprox => Method::CpApprox,
            MethodKind::Targeting => {
                let dt = self.dt()?;
                let plan = match self.intensity.unwrap_or(IntensityKind::Rre) {
                    IntensityKind::Rre => IntensityPlan::Rre { dt },
                    IntensityKind::Mc => IntensityPlan::MonteCarlo {
                        dt,
                        n_paths: self.mc_paths.unwrap_or(DEFAULT_MC_PATHS),
                    },
                    IntensityKind::Optimized => IntensityPlan::Optimized { dt },
                };
                Method::Targeting(self.options(plan))
            }
            MethodKind::TwoStage => {
                let t0 = self.t0.ok_or_else(|| {
                    snapfilter::Error::Contract(format!("method {} needs t0", self.label()))
                })?;
                let (mode, plan) = match self.mode.unwrap_or(StageMode::Common) {
                    StageMode::Common => (TwoStageMode::CommonMean, IntensityPlan::MeanPropensity),
                    StageMode::PerParticle => {
                        (TwoStageMode::PerParticle, IntensityPlan::PerParticle)
                    }
                };
                Method::TwoStage {
                    t0,
                    mode,
                    opts: self.options(plan),
                }
            }
        })
    }
}

/// File-name-safe version of a label.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "network": {
            "species": ["A", "B"],
            "reactions": [
                {"reactants": {"A": 2}, "products": {"B": 1}, "rate": 0.5},
                {"products": {"A": 1}, "rate": 3.0}
            ],
            "observed": ["B"]
        },
        "initial_distribution": [{"state": [1, 0], "p": 0.25}, {"state": [2, 0], "p": 0.75}],
        "snapshots": [{"t": 1.0, "y": [1]}],
        "query_time": 0.5,
        "methods": [
            {"kind": "targeting", "intensity": "mc", "dt": 0.1, "resample_every": 0.2, "N_s": 50},
            {"kind": "two_stage", "t0": 0.9, "mode": "per_particle"}
        ],
        "trials": {"N_s": 10, "N_r": 2}
    }"#;

    #[test]
    fn parses_a_full_document() {
        let cfg: Config = serde_json::from_str(DOC).unwrap();
        let net = cfg.network().unwrap();
        assert_eq!(net.change(0), &[-2, 1]);
        assert_eq!(net.change(1), &[1, 0]);
        assert_eq!(net.observed(), &[1]);
        assert_eq!(cfg.initial_law().unwrap().prob(&[2, 0]), 0.75);
        assert_eq!(cfg.raw_cases().unwrap()[0].0, "main");
        assert_eq!(cfg.trials.seed, 0);
        assert_eq!(cfg.methods[0].label(), "targeting_mc_resample=0.2_N=50");
        assert_eq!(cfg.methods[1].label(), "two_stage_per_particle_t0=0.9");
        match cfg.methods[0].method().unwrap() {
            Method::Targeting(o) => {
                assert_eq!(o.resample_every, Some(0.2));
                assert!(matches!(
                    o.intensity,
                    IntensityPlan::MonteCarlo {
                        n_paths: DEFAULT_MC_PATHS,
                        ..
                    }
                ));
            }
            _ => panic!("wrong method"),
        }
        assert!(matches!(
            cfg.methods[1].method().unwrap(),
            Method::TwoStage {
                mode: TwoStageMode::PerParticle,
                ..
            }
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = DOC.replace("\"query_time\"", "\"query_tme\"");
        assert!(serde_json::from_str::<Config>(&bad).is_err());
        let bad = DOC.replace("\"dt\": 0.1,", "\"dt\": 0.1, \"step\": 1,");
        assert!(serde_json::from_str::<Config>(&bad).is_err());
    }

    #[test]
    fn targeting_needs_dt() {
        let mut cfg: Config = serde_json::from_str(DOC).unwrap();
        cfg.methods[0].dt = None;
        assert!(cfg.methods[0].method().is_err());
    }

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("rare y=7"), "rare_y_7");
    }
}

//! Replicate-trial harness comparing filters against an exact conditional law.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::error::{contract, Error, Result};
use crate::exec::Exec;
use crate::metrics::{esf, mean_ci, tve};
use crate::network::library::{isomerization, pure_death};
use crate::network::ReactionNetwork;
use crate::observation::SnapshotSeq;
use crate::oracles::{
    cp_approx_filter, cp_exact_filter, ex1_cond_pmf, ex1_transition, ex2_cond_pmf, ex2_obs_prob,
    CmeSolver, IsomerizationOracle, PureDeathOracle,
};
use crate::pmf::{Pmf, State};
use crate::rng::StreamKey;
use crate::simulate::naive_filter;
use crate::split::ObservationSplit;
use crate::targeting::{filter_snapshots, two_stage, TargetingOptions, TwoStageMode};

/// Default cap on the state space enumerated by the master-equation oracle.
pub const DEFAULT_MAX_STATES: usize = 2_000_000;

/// Which exact solution supplies the reference law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleKind {
    /// Closed form when the network is recognised, master equation otherwise.
    #[default]
    Auto,
    PureDeath,
    Isomerization,
    Cme,
}

/// A filtering method under comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Naive,
    Targeting(TargetingOptions),
    TwoStage {
        t0: f64,
        mode: TwoStageMode,
        opts: TargetingOptions,
    },
    CpExact,
    CpApprox,
}

/// Recognised closed-form models.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Model {
    PureDeath(f64),
    Isomerization([f64; 2]),
    Other,
}

fn recognise(net: &ReactionNetwork) -> Model {
    let r = net.rates();
    if r.len() == 1 && *net == pure_death(r[0]) {
        Model::PureDeath(r[0])
    } else if r.len() == 2 && *net == isomerization(r[0], r[1]) {
        Model::Isomerization([r[0], r[1]])
    } else {
        Model::Other
    }
}

/// A filtering problem with its exact answer.
#[derive(Debug, Clone)]
pub struct Problem {
    pub net: ReactionNetwork,
    pub split: ObservationSplit,
    pub mu0: Pmf,
    pub snaps: SnapshotSeq,
    pub t_query: f64,
    /// Exact law at the query time given every snapshot.
    pub oracle: Pmf,
    /// Probability of matching every snapshot.
    pub obs_prob: f64,
    model: Model,
}

impl Problem {
    pub fn new(
        net: ReactionNetwork,
        free: Option<&[usize]>,
        mu0: Pmf,
        snaps: SnapshotSeq,
        t_query: f64,
        kind: OracleKind,
    ) -> Result<Self> {
        let split = ObservationSplit::build(&net, free)?;
        if mu0.dim() != net.n_species() {
            return contract("initial law has wrong dimension");
        }
        if !(t_query >= 0.0 && t_query <= snaps.last().t) {
            return contract(format!(
                "query time {t_query} outside [0, {}]",
                snaps.last().t
            ));
        }
        let model = recognise(&net);
        let closed = |m: Model| -> Result<Option<(Pmf, f64)>> {
            let single = snaps.len() == 1 && mu0.len() == 1;
            let z0 = mu0
                .iter()
                .next()
                .map(|(z, _)| z.clone())
                .unwrap_or_default();
            let s = &snaps.as_slice()[0];
            match m {
                Model::PureDeath(c) if single => Ok(Some((
                    ex1_cond_pmf(z0[0], s.y[0], c, t_query, s.t)?,
                    ex1_transition(z0[0], s.y[0], c, s.t),
                ))),
                Model::Isomerization(c) if single => {
                    let z = [z0[0], z0[1]];
                    Ok(Some((
                        ex2_cond_pmf(z, s.y[0], c, t_query, s.t)?,
                        ex2_obs_prob(z, s.y[0], c, s.t),
                    )))
                }
                _ => Ok(None),
            }
        };
        let wanted = match kind {
            OracleKind::Auto => model,
            OracleKind::PureDeath if matches!(model, Model::PureDeath(_)) => model,
            OracleKind::Isomerization if matches!(model, Model::Isomerization(_)) => model,
            OracleKind::Cme => Model::Other,
            _ => return contract(format!("oracle {kind:?} does not apply to this network")),
        };
        let (oracle, obs_prob) = match closed(wanted)? {
            Some(v) => v,
            None => {
                let solver = CmeSolver::new(&net, &mu0, DEFAULT_MAX_STATES)?;
                (
                    solver.conditional(&mu0, &snaps, t_query)?,
                    solver.observation_probability(&mu0, &snaps)?,
                )
            }
        };
        Ok(Problem {
            net,
            split,
            mu0,
            snaps,
            t_query,
            oracle,
            obs_prob,
            model,
        })
    }

    /// Single-snapshot horizon and observation.
    fn single(&self) -> Result<(f64, &[i64])> {
        if self.snaps.len() != 1 {
            return contract("method needs exactly one snapshot");
        }
        let s = &self.snaps.as_slice()[0];
        Ok((s.t, &s.y))
    }
}

/// Result of one filter run.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub estimate: Pmf,
    pub esf: f64,
    pub esf_poisson: Option<f64>,
    pub esf_girsanov: Option<f64>,
}

/// Run `method` once on `problem` with `n_s` particles.
pub fn run_once(
    problem: &Problem,
    method: &Method,
    n_s: usize,
    key: StreamKey,
    exec: Exec,
) -> Result<TrialOutcome> {
    let p = problem;
    match method {
        Method::Naive => {
            let out = naive_filter(&p.net, &p.mu0, &p.snaps, p.t_query, n_s, key, exec)?;
            Ok(TrialOutcome {
                estimate: out.estimate,
                esf: esf(&out.weights)?,
                esf_poisson: None,
                esf_girsanov: None,
            })
        }
        Method::Targeting(opts) => {
            let out = filter_snapshots(
                &p.net, &p.split, &p.mu0, &p.snaps, p.t_query, n_s, opts, key, exec,
            )?;
            let rep = out.reports.last().expect("one report per interval");
            Ok(TrialOutcome {
                estimate: out.estimate()?,
                esf: out.final_ensemble().esf()?,
                esf_poisson: Some(rep.esf_poisson),
                esf_girsanov: Some(rep.esf_girsanov),
            })
        }
        Method::TwoStage { t0, mode, opts } => {
            let (horizon, y) = p.single()?;
            let out = two_stage(
                &p.net, &p.split, &p.mu0, *t0, horizon, *mode, y, p.t_query, n_s, opts, key, exec,
            )?;
            let rep = &out.reports[0];
            Ok(TrialOutcome {
                estimate: out.estimate()?,
                esf: out.final_ensemble().esf()?,
                esf_poisson: Some(rep.esf_poisson),
                esf_girsanov: Some(rep.esf_girsanov),
            })
        }
        Method::CpExact => {
            let Model::PureDeath(c) = p.model else {
                return contract(
                    "exact conditional propensities are only available for pure death",
                );
            };
            let out = cp_exact_filter(c, &p.mu0, &p.snaps, p.t_query, n_s, key, exec)?;
            Ok(TrialOutcome {
                estimate: out.estimate()?,
                esf: out.esf()?,
                esf_poisson: None,
                esf_girsanov: None,
            })
        }
        Method::CpApprox => {
            let out = match p.model {
                Model::PureDeath(c) => cp_approx_filter(
                    &p.net,
                    &PureDeathOracle { c },
                    &p.mu0,
                    &p.snaps,
                    p.t_query,
                    n_s,
                    key,
                    exec,
                )?,
                Model::Isomerization(c) => cp_approx_filter(
                    &p.net,
                    &IsomerizationOracle { c },
                    &p.mu0,
                    &p.snaps,
                    p.t_query,
                    n_s,
                    key,
                    exec,
                )?,
                Model::Other => {
                    return contract("conditional propensities need a closed-form transition law")
                }
            };
            Ok(TrialOutcome {
                estimate: out.estimate()?,
                esf: out.esf()?,
                esf_poisson: None,
                esf_girsanov: None,
            })
        }
    }
}

/// Per-state mean estimate with a 95% half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct StateStat {
    pub state: State,
    pub oracle: f64,
    pub mean: f64,
    pub ci: f64,
}

/// Aggregate over replicate trials. ESF means and TVE statistics use the
/// successful trials only.
#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub n_trials: usize,
    pub n_success: usize,
    pub tves: Vec<f64>,
    pub tve_mean: f64,
    pub tve_ci: f64,
    pub esf: f64,
    pub esf_poisson: Option<f64>,
    pub esf_girsanov: Option<f64>,
    /// Mean wall-clock seconds per trial.
    pub seconds_per_trial: f64,
    pub distribution: Vec<StateStat>,
}

impl TrialSummary {
    pub fn success_fraction(&self) -> f64 {
        self.n_success as f64 / self.n_trials as f64
    }
}

fn mean_opt(v: &[Option<f64>]) -> Option<f64> {
    let xs: Vec<f64> = v.iter().flatten().copied().collect();
    (!xs.is_empty() && xs.len() == v.len()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Run `n_r` independent trials. Trial `r` uses the stream `key.derive(r)`.
/// Trials whose particles are all rejected count as failures; every other
/// error aborts the run.
pub fn run_trials(
    problem: &Problem,
    method: &Method,
    n_s: usize,
    n_r: usize,
    key: StreamKey,
    exec: Exec,
) -> Result<TrialSummary> {
    if n_r == 0 || n_s == 0 {
        return contract("need at least one trial and one particle");
    }
    let start = Instant::now();
    let mut outcomes = Vec::with_capacity(n_r);
    for r in 0..n_r {
        match run_once(problem, method, n_s, key.derive(r as u64), exec) {
            Ok(o) => outcomes.push(o),
            Err(Error::AllRejected) => {}
            Err(e) => return Err(e),
        }
    }
    let seconds_per_trial = start.elapsed().as_secs_f64() / n_r as f64;
    let tves = outcomes
        .iter()
        .map(|o| tve(&o.estimate, &problem.oracle))
        .collect::<Result<Vec<_>>>()?;
    let (tve_mean, tve_ci) = mean_ci(&tves);
    let esfs: Vec<f64> = outcomes.iter().map(|o| o.esf).collect();
    let esf_mean = if esfs.is_empty() {
        f64::NAN
    } else {
        esfs.iter().sum::<f64>() / esfs.len() as f64
    };
    let mut states: BTreeMap<State, f64> =
        problem.oracle.iter().map(|(s, p)| (s.clone(), p)).collect();
    for o in &outcomes {
        for (s, _) in o.estimate.iter() {
            states.entry(s.clone()).or_insert(0.0);
        }
    }
    let distribution = states
        .into_iter()
        .map(|(state, oracle)| {
            let vals: Vec<f64> = outcomes.iter().map(|o| o.estimate.prob(&state)).collect();
            let (mean, ci) = mean_ci(&vals);
            StateStat {
                state,
                oracle,
                mean,
                ci,
            }
        })
        .collect();
    Ok(TrialSummary {
        n_trials: n_r,
        n_success: outcomes.len(),
        tve_mean,
        tve_ci,
        tves,
        esf: esf_mean,
        esf_poisson: mean_opt(&outcomes.iter().map(|o| o.esf_poisson).collect::<Vec<_>>()),
        esf_girsanov: mean_opt(&outcomes.iter().map(|o| o.esf_girsanov).collect::<Vec<_>>()),
        seconds_per_trial,
        distribution,
    })
}

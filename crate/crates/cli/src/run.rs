//! Replicate-trial execution and artifact writing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use snapfilter::experiment::{run_trials, Problem};
use snapfilter::{Exec, ObservationSplit, StreamKey};

use crate::config::{slug, Config};

/// One row of `results.csv`.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub case: String,
    pub method: String,
    pub n_s: usize,
    pub n_r: usize,
    pub n_success: usize,
    pub tve_mean: f64,
    pub tve_ci: f64,
    pub esf_poisson: Option<f64>,
    pub esf_girsanov: Option<f64>,
    pub esf: f64,
    pub seconds_per_trial: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistRow {
    pub method: String,
    pub state: String,
    pub oracle: f64,
    pub estimate: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseSummary {
    pub name: String,
    pub observation_probability: f64,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: Option<String>,
    pub seed: u64,
    pub query_time: f64,
    pub cases: Vec<CaseSummary>,
}

impl Summary {
    /// Rows whose every trial was all-rejected.
    pub fn failed_rows(&self) -> Vec<&ResultRow> {
        self.cases
            .iter()
            .flat_map(|c| &c.rows)
            .filter(|r| r.n_success == 0)
            .collect()
    }
}

pub const RESULTS_HEADER: &str =
    "case,method,N_s,N_r,n_success,tve_mean,tve_ci,esf_poisson,esf_girsanov,esf,seconds_per_trial";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn write_results(path: &Path, summary: &Summary) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RESULTS_HEADER}")?;
    for c in &summary.cases {
        for r in &c.rows {
            writeln!(
                w,
                "{},{},{},{},{},{:.6},{:.6},{},{},{:.6},{:.6}",
                r.case,
                r.method,
                r.n_s,
                r.n_r,
                r.n_success,
                r.tve_mean,
                r.tve_ci,
                opt(r.esf_poisson),
                opt(r.esf_girsanov),
                r.esf,
                r.seconds_per_trial
            )?;
        }
    }
    w.flush()
}

fn write_dist(path: &Path, rows: &[DistRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,state,oracle,estimate,ci")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.10e},{:.10e},{:.10e}",
            r.method, r.state, r.oracle, r.estimate, r.ci
        )?;
    }
    w.flush()
}

/// Run every method on every case and write `results.csv`, `dist_<case>.csv`
/// and `summary.json` under `out`.
pub fn run(
    cfg: &Config,
    out: &Path,
    seed: u64,
    mut progress: impl FnMut(&str),
) -> anyhow::Result<Summary> {
    let net = cfg.network()?;
    let mu0 = cfg.initial_law()?;
    let cases = cfg.cases(net.n_observed())?;
    let methods = cfg
        .methods
        .iter()
        .map(|m| Ok((m.label(), m.method()?)))
        .collect::<snapfilter::Result<Vec<_>>>()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let root = StreamKey::new(seed);
    let mut summary = Summary {
        name: cfg.name.clone(),
        seed,
        query_time: cfg.query_time,
        cases: vec![],
    };
    for (ci, case) in cases.iter().enumerate() {
        progress(&format!(
            "case {}: computing the exact conditional law",
            case.name
        ));
        let base = Problem::new(
            net.clone(),
            None,
            mu0.clone(),
            case.snaps.clone(),
            cfg.query_time,
            cfg.oracle_kind(),
        )?;
        let mut rows = Vec::new();
        let mut dist = Vec::new();
        for (mi, ((label, method), spec)) in methods.iter().zip(&cfg.methods).enumerate() {
            let mut problem = base.clone();
            if let Some(free) = &spec.free_reactions {
                problem.split = ObservationSplit::build(&net, Some(free))?;
            }
            let n_s = spec.n_s.unwrap_or(cfg.trials.n_s);
            let key = root.derive(ci as u64).derive(mi as u64);
            let s = run_trials(&problem, method, n_s, cfg.trials.n_r, key, Exec::Parallel)
                .with_context(|| format!("case {}, method {label}", case.name))?;
            progress(&format!(
                "case {}: {label}: TVE {:.4} ± {:.4}, ESF {:.3}, {}/{} trials usable",
                case.name, s.tve_mean, s.tve_ci, s.esf, s.n_success, s.n_trials
            ));
            for st in &s.distribution {
                let state = st
                    .state
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                dist.push(DistRow {
                    method: label.clone(),
                    state,
                    oracle: st.oracle,
                    estimate: st.mean,
                    ci: st.ci,
                });
            }
            rows.push(ResultRow {
                case: case.name.clone(),
                method: label.clone(),
                n_s,
                n_r: s.n_trials,
                n_success: s.n_success,
                tve_mean: s.tve_mean,
                tve_ci: s.tve_ci,
                esf_poisson: s.esf_poisson,
                esf_girsanov: s.esf_girsanov,
                esf: s.esf,
                seconds_per_trial: s.seconds_per_trial,
            });
        }
        write_dist(&out.join(format!("dist_{}.csv", slug(&case.name))), &dist)?;
        summary.cases.push(CaseSummary {
            name: case.name.clone(),
            observation_probability: base.obs_prob,
            rows,
        });
    }
    write_results(&out.join("results.csv"), &summary)?;
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(out.join("summary.json"), json + "\n")?;
    Ok(summary)
}

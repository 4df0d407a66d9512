//! Static checks on a configuration. No simulation is performed.

use snapfilter::network::library::pure_death;
use snapfilter::{ObservationSplit, Pmf, ReactionNetwork, Snapshot};

use crate::config::{Config, MethodKind};

/// Upper bound on the number of free-count vectors tried per reachability check.
const SEARCH_BUDGET: f64 = 1e6;

/// Some nonnegative integer count vector moves the observed block by `dy`.
/// Free counts are searched over a box, so a `false` is exact only when there
/// are no free reactions.
pub fn reachable(split: &ObservationSplit, dy: &[i64]) -> bool {
    let m1 = split.n_free();
    if m1 == 0 {
        return matches!(split.slaved_counts(dy, &[]), Ok(Some(_)));
    }
    let spread = dy.iter().map(|d| d.unsigned_abs()).max().unwrap_or(0);
    let side = (SEARCH_BUDGET.powf(1.0 / m1 as f64).floor() as u64).clamp(1, 2 * spread + 50);
    let mut k = vec![0u64; m1];
    loop {
        if matches!(split.slaved_counts(dy, &k), Ok(Some(_))) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == m1 {
                return false;
            }
            k[i] += 1;
            if k[i] <= side {
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

fn check_snapshots(
    net: &ReactionNetwork,
    name: &str,
    snaps: &[Snapshot],
    issues: &mut Vec<String>,
) {
    if snaps.is_empty() {
        issues.push(format!("case {name}: no snapshots"));
    }
    for (l, s) in snaps.iter().enumerate() {
        if !(s.t >= 0.0) || !s.t.is_finite() {
            issues.push(format!(
                "case {name}: snapshot {l} has invalid time {}",
                s.t
            ));
        }
        if s.y.len() != net.n_observed() {
            issues.push(format!(
                "case {name}: snapshot {l} has {} values, expected {}",
                s.y.len(),
                net.n_observed()
            ));
        }
        if s.y.iter().any(|&v| v < 0) {
            issues.push(format!("case {name}: snapshot {l} has a negative count"));
        }
    }
    for (l, w) in snaps.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            issues.push(format!(
                "case {name}: snapshots {l} (t={}) and {} (t={}) are out of order",
                w[0].t,
                l + 1,
                w[1].t
            ));
        }
    }
}

fn check_reachability(
    net: &ReactionNetwork,
    split: &ObservationSplit,
    mu0: &Pmf,
    name: &str,
    snaps: &[Snapshot],
    issues: &mut Vec<String>,
) {
    let obs = net.observed();
    let mut prev: Option<&Snapshot> = None;
    for (l, s) in snaps.iter().enumerate() {
        let ok = match prev {
            None if s.t == 0.0 => mu0.iter().any(|(z, _)| net.observe(z) == s.y),
            None => mu0.iter().take(1000).any(|(z, _)| {
                let dy: Vec<i64> = s.y.iter().zip(obs).map(|(y, &i)| y - z[i]).collect();
                reachable(split, &dy)
            }),
            Some(p) => {
                let dy: Vec<i64> = s.y.iter().zip(&p.y).map(|(a, b)| a - b).collect();
                reachable(split, &dy)
            }
        };
        if !ok {
            let from = match prev {
                Some(p) => format!("{:?} at t={}", p.y, p.t),
                None => "the initial law".to_string(),
            };
            issues.push(format!(
                "case {name}: observation {:?} at t={} (snapshot {l}) cannot be reached from {from}: no nonnegative integer reaction counts",
                s.y, s.t
            ));
        }
        prev = Some(s);
    }
}

/// Every problem found in `cfg`.
pub fn validate(cfg: &Config) -> Vec<String> {
    let mut issues = Vec::new();
    let spec = &cfg.network;
    if spec.species.is_empty() {
        issues.push("network: no species".into());
    }
    for (i, s) in spec.species.iter().enumerate() {
        if spec.species[..i].contains(s) {
            issues.push(format!("network: species {s:?} listed twice"));
        }
    }
    if spec.reactions.is_empty() {
        issues.push("network: no reactions".into());
    }
    for (j, r) in spec.reactions.iter().enumerate() {
        if !(r.rate > 0.0) || !r.rate.is_finite() {
            issues.push(format!(
                "reaction {j}: rate {} is not positive and finite",
                r.rate
            ));
        }
        for name in r.reactants.keys().chain(r.products.keys()) {
            if !spec.species.contains(name) {
                issues.push(format!("reaction {j}: unknown species {name:?}"));
            }
        }
    }
    for name in &spec.observed {
        if !spec.species.contains(name) {
            issues.push(format!("network: unknown observed species {name:?}"));
        }
    }
    if spec.observed.is_empty() {
        issues.push("network: no observed species".into());
    }
    if cfg.methods.is_empty() {
        issues.push("methods: empty method list".into());
    }
    if cfg.trials.n_s == 0 || cfg.trials.n_r == 0 {
        issues.push("trials: N_s and N_r must be positive".into());
    }
    if !issues.is_empty() {
        return issues;
    }
    let net = match cfg.network() {
        Ok(n) => n,
        Err(e) => {
            issues.push(format!("network: {e}"));
            return issues;
        }
    };
    let mu0 = match cfg.initial_law() {
        Ok(p) if p.dim() == net.n_species() => Some(p),
        Ok(p) => {
            issues.push(format!(
                "initial law: dimension {} for {} species",
                p.dim(),
                net.n_species()
            ));
            None
        }
        Err(e) => {
            issues.push(format!("initial law: {e}"));
            None
        }
    };
    if let Some(p) = &mu0 {
        if p.iter().any(|(z, _)| z.iter().any(|&v| v < 0)) {
            issues.push("initial law: negative count".into());
        }
    }
    let cases = match cfg.raw_cases() {
        Ok(c) => c,
        Err(e) => {
            issues.push(format!("observations: {e}"));
            vec![]
        }
    };
    let mut checked: Vec<Vec<usize>> = Vec::new();
    let mut horizon_min = f64::INFINITY;
    for (name, snaps) in &cases {
        check_snapshots(&net, name, snaps, &mut issues);
        if let Some(last) = snaps.last() {
            horizon_min = horizon_min.min(last.t);
            if !(cfg.query_time >= 0.0 && cfg.query_time <= last.t) {
                issues.push(format!(
                    "case {name}: query time {} outside [0, {}]",
                    cfg.query_time, last.t
                ));
            }
        }
    }
    for (i, m) in cfg.methods.iter().enumerate() {
        let label = m.label();
        let split = match ObservationSplit::build(&net, m.free_reactions.as_deref()) {
            Ok(s) => Some(s),
            Err(e) => {
                issues.push(format!("method {i} ({label}): {e}"));
                None
            }
        };
        if let Err(e) = m.method() {
            issues.push(format!("method {i} ({label}): {e}"));
        }
        let gridded = matches!(m.kind, MethodKind::Targeting);
        if gridded {
            match m.dt {
                Some(dt) if dt > 0.0 && dt.is_finite() => {
                    if let Some(ds) = m.resample_every {
                        let r = ds / dt;
                        if !(ds > 0.0)
                            || r.round() < 1.0
                            || (r - r.round()).abs() > 1e-9 * r.max(1.0)
                        {
                            issues.push(format!("method {i} ({label}): resample_every {ds} is not a multiple of dt {dt}"));
                        }
                    }
                }
                Some(dt) => issues.push(format!("method {i} ({label}): dt {dt} must be positive")),
                None => {}
            }
        }
        if m.kind == MethodKind::TwoStage {
            if let Some(t0) = m.t0 {
                if !(t0 >= 0.0 && t0 < horizon_min) {
                    issues.push(format!(
                        "method {i} ({label}): t0 {t0} outside [0, {horizon_min})"
                    ));
                }
            }
            if cases.iter().any(|(_, s)| s.len() != 1) {
                issues.push(format!(
                    "method {i} ({label}): two-stage runs need exactly one snapshot per case"
                ));
            }
        }
        if m.kind == MethodKind::CpExact && net != pure_death(net.rates()[0]) {
            issues.push(format!(
                "method {i} ({label}): exact conditional propensities need the pure death network"
            ));
        }
        if m.n_s == Some(0) {
            issues.push(format!("method {i} ({label}): N_s must be positive"));
        }
        if let (Some(split), Some(mu0)) = (&split, &mu0) {
            if checked.iter().any(|f| f == split.free()) {
                continue;
            }
            checked.push(split.free().to_vec());
            for (name, snaps) in &cases {
                if snaps.iter().all(|s| s.y.len() == net.n_observed()) {
                    check_reachability(&net, split, mu0, name, snaps, &mut issues);
                }
            }
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;
    use snapfilter::network::library::{dimerization, isomerization};

    #[test]
    fn no_free_reactions_is_exact() {
        let net = snapfilter::network::library::pure_death(1.0);
        let split = ObservationSplit::build(&net, None).unwrap();
        assert!(reachable(&split, &[-5]));
        assert!(reachable(&split, &[0]));
        assert!(!reachable(&split, &[3]));
    }

    #[test]
    fn free_reactions_are_searched() {
        let iso = isomerization(1.0, 1.5);
        let split = ObservationSplit::build(&iso, Some(&[0])).unwrap();
        assert!(reachable(&split, &[7]));
        assert!(reachable(&split, &[-40]));
        let dim = dimerization([0.5, 1.0, 0.1, 1.0]);
        let split = ObservationSplit::build(&dim, None).unwrap();
        assert!(reachable(&split, &[4]));
        assert!(reachable(&split, &[-3]));
    }
}

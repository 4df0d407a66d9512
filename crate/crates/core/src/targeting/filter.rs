//! Interval propagation, multi-snapshot recursion and the two-stage variant.

use std::sync::Arc;

use rand::Rng;

use super::bridge::{cell_events, thin_cell};
use super::draw::{draw_particle, Ancestors, DrawCtx, IntensitySource};
use super::resample::{resample_particles, ResampleScheme};
use super::{Particle, WeightedEnsemble, DEFAULT_MAX_REJECTS};
use crate::error::{contract, Error, Result};
use crate::exec::Exec;
use crate::intensity::{
    lambda1_from_mc, lambda1_from_rre, lambda2_optimize, positivity_floor, IntensityGrid,
};
use crate::metrics::esf_log;
use crate::network::ReactionNetwork;
use crate::observation::SnapshotSeq;
use crate::pmf::Pmf;
use crate::rng::StreamKey;
use crate::simulate::{run_ssa, Event, Path};
use crate::split::ObservationSplit;

const TAG_DRAW: u64 = 0;
const TAG_RESAMPLE: u64 = 1 << 32;
const TAG_MC: u64 = 1 << 33;
const TAG_SSA: u64 = 1 << 34;
const TAG_TARGET: u64 = 1 << 35;

/// How the proposal intensity of each interval is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum IntensityPlan {
    /// Propensity along the reaction-rate equations from the mean start state.
    Rre { dt: f64 },
    /// Forward Monte Carlo estimate of the mean propensity.
    MonteCarlo { dt: f64, n_paths: usize },
    /// Reaction-rate grid shifted to meet the observation constraint on average.
    Optimized { dt: f64 },
    /// A given grid; its horizon must equal the interval length.
    Fixed(IntensityGrid),
    /// Constant grid at the mean propensity of the start law.
    MeanPropensity,
    /// Constant per-particle intensity at the floored propensity of its start state.
    PerParticle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetingOptions {
    pub intensity: IntensityPlan,
    /// Resampling period. Must be a multiple of the grid mesh.
    pub resample_every: Option<f64>,
    pub resample_scheme: ResampleScheme,
    pub max_rejects: u64,
    /// Keep full event histories on every particle.
    pub keep_events: bool,
}

impl TargetingOptions {
    pub fn new(intensity: IntensityPlan) -> Self {
        TargetingOptions {
            intensity,
            resample_every: None,
            resample_scheme: ResampleScheme::Multinomial,
            max_rejects: DEFAULT_MAX_REJECTS,
            keep_events: false,
        }
    }
}

/// Intensity used after the unconditioned stage of [`two_stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoStageMode {
    CommonMean,
    PerParticle,
}

/// Diagnostics for one inter-snapshot interval.
#[derive(Debug, Clone)]
pub struct IntervalReport {
    pub t_start: f64,
    pub t_end: f64,
    pub esf: f64,
    /// ESF of the Poisson weights; 0 when every one vanishes.
    pub esf_poisson: f64,
    /// ESF of the Girsanov weights; 0 when every one vanishes.
    pub esf_girsanov: f64,
    pub mean_rejections: f64,
    pub resamplings: usize,
    /// Shared grid, absent for per-particle intensities.
    pub grid: Option<IntensityGrid>,
}

/// Ensembles at the end of every interval, with diagnostics.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub ensembles: Vec<WeightedEnsemble>,
    pub reports: Vec<IntervalReport>,
}

impl FilterOutput {
    pub fn final_ensemble(&self) -> &WeightedEnsemble {
        self.ensembles.last().expect("at least one interval")
    }

    /// Weighted estimate of the conditional law at the query time.
    pub fn estimate(&self) -> Result<Pmf> {
        self.final_ensemble().estimate()
    }
}

struct Scratch {
    a: Vec<f64>,
    in_cell: Vec<u64>,
    buf: Vec<(f64, u32)>,
}

impl Scratch {
    fn new(m: usize) -> Self {
        Scratch {
            a: vec![0.0; m],
            in_cell: vec![0; m],
            buf: Vec::new(),
        }
    }
}

/// Continue the bridge of `p` up to (not including) cell `to_cell`,
/// accumulating the Girsanov log weight and the query-time mark.
fn advance<R: Rng + ?Sized>(
    p: &mut Particle,
    net: &ReactionNetwork,
    t_origin: f64,
    to_cell: usize,
    query: Option<f64>,
    rng: &mut R,
    s: &mut Scratch,
) {
    let grid = p.grid.clone().expect("targeted particles carry a grid");
    let m = net.n_reactions();
    let n = grid.n_cells();
    net.propensities_into(&p.state, &mut s.a);
    let mut a0: f64 = s.a.iter().sum();
    let mut lg = 0.0;
    while p.cell < to_cell {
        let c = p.cell;
        thin_cell(&grid, c, &mut p.k_rem, rng, &mut s.in_cell);
        cell_events(&grid, c, &s.in_cell, rng, &mut s.buf);
        let lam: f64 = (0..m).map(|i| grid.value(i, c)).sum();
        let mut cur = c as f64 * grid.dt();
        for &(te, j) in &s.buf {
            if let Some(q) = query {
                if p.mark.is_none() && q < te {
                    p.mark = Some(p.state.clone());
                }
            }
            let j = j as usize;
            lg += (lam - a0) * (te - cur) + s.a[j].ln() - grid.value(j, c).ln();
            net.fire(j, &mut p.state);
            if let Some(ev) = p.events.as_mut() {
                ev.push(Event {
                    time: t_origin + te,
                    reaction: j as u32,
                });
            }
            net.propensities_into(&p.state, &mut s.a);
            a0 = s.a.iter().sum();
            cur = te;
        }
        let end = if c + 1 == n {
            grid.horizon()
        } else {
            (c + 1) as f64 * grid.dt()
        };
        lg += (lam - a0) * (end - cur);
        p.cell += 1;
    }
    if p.cell == n && p.mark.is_none() && query.is_some() {
        p.mark = Some(p.state.clone());
    }
    p.log_girsanov += lg;
    p.log_weight += lg;
}

struct IntervalSpec<'a> {
    net: &'a ReactionNetwork,
    split: &'a ObservationSplit,
    y: &'a [i64],
    t_start: f64,
    t_end: f64,
    query: f64,
    n_s: usize,
    opts: &'a TargetingOptions,
    interval: usize,
}

fn build_source(
    spec: &IntervalSpec<'_>,
    plan: &IntensityPlan,
    law: &Pmf,
    key: StreamKey,
    exec: Exec,
) -> Result<IntensitySource> {
    let net = spec.net;
    let horizon = spec.t_end - spec.t_start;
    let shared = |g: IntensityGrid| Ok(IntensitySource::Shared(Arc::new(g)));
    match plan {
        IntensityPlan::Rre { dt } => shared(lambda1_from_rre(net, &law.mean(), horizon, *dt)?),
        IntensityPlan::MonteCarlo { dt, n_paths } => shared(lambda1_from_mc(
            net,
            law,
            horizon,
            *dt,
            *n_paths,
            key.derive(TAG_MC),
            exec,
        )?),
        IntensityPlan::Optimized { dt } => {
            let mean = law.mean();
            let g1 = lambda1_from_rre(net, &mean, horizon, *dt)?;
            let dy: Vec<f64> = spec
                .y
                .iter()
                .zip(net.observed())
                .map(|(&y, &i)| y as f64 - mean[i])
                .collect();
            shared(lambda2_optimize(net, spec.split, &g1, &dy)?.grid)
        }
        IntensityPlan::Fixed(g) => {
            if (g.horizon() - horizon).abs() > 1e-9 * horizon.max(1.0) {
                return contract(format!(
                    "fixed grid spans {} but the interval has length {horizon}",
                    g.horizon()
                ));
            }
            shared(g.clone())
        }
        IntensityPlan::MeanPropensity => {
            let floor = positivity_floor(net);
            let rates: Vec<f64> = (0..net.n_reactions())
                .map(|j| {
                    law.iter()
                        .map(|(z, p)| p * net.propensity_of(j, z))
                        .sum::<f64>()
                        .max(floor[j])
                })
                .collect();
            shared(IntensityGrid::constant(&rates, horizon)?)
        }
        IntensityPlan::PerParticle => Ok(IntensitySource::per_particle(net, horizon)),
    }
}

fn segment_bounds(source: &IntensitySource, resample_every: Option<f64>) -> Result<Vec<usize>> {
    let n = source.n_cells();
    let Some(ds) = resample_every else {
        return Ok(vec![n]);
    };
    let ratio = ds / source.dt();
    let k = ratio.round();
    if !(ds > 0.0) || k < 1.0 || (k - ratio).abs() > 1e-9 * ratio.max(1.0) {
        return contract(format!(
            "resampling period {ds} is not a multiple of the mesh {}",
            source.dt()
        ));
    }
    let k = k as usize;
    Ok((1..)
        .map(|i| i * k)
        .take_while(|&b| b < n)
        .chain([n])
        .collect())
}

fn run_interval(
    spec: &IntervalSpec<'_>,
    anc: &Ancestors<'_>,
    source: IntensitySource,
    key: StreamKey,
    exec: Exec,
) -> Result<(Vec<Particle>, IntervalReport)> {
    let net = spec.net;
    let m = net.n_reactions();
    let bounds = segment_bounds(&source, spec.opts.resample_every)?;
    let query = (spec.query >= spec.t_start && spec.query <= spec.t_end)
        .then_some(spec.query - spec.t_start);
    let ctx = DrawCtx {
        net,
        split: spec.split,
        source: &source,
        y: spec.y,
        max_rejects: spec.opts.max_rejects,
        interval: Some(spec.interval),
        keep_events: spec.opts.keep_events,
    };
    let draw_key = key.derive(TAG_DRAW);
    let mut particles = exec.try_map(spec.n_s, |i| {
        let mut rng = draw_key.rng(i as u64);
        let mut p = draw_particle(&ctx, anc, &mut rng)?;
        advance(
            &mut p,
            net,
            spec.t_start,
            bounds[0],
            query,
            &mut rng,
            &mut Scratch::new(m),
        );
        Ok::<_, Error>(p)
    })?;
    for (s, &b) in bounds.iter().enumerate().skip(1) {
        particles = resample_particles(
            &particles,
            spec.opts.resample_scheme,
            key.derive(TAG_RESAMPLE + s as u64),
        )?;
        let seg_key = key.derive(s as u64);
        particles = exec.map_vec(particles, |i, mut p| {
            let mut rng = seg_key.rng(i as u64);
            advance(
                &mut p,
                net,
                spec.t_start,
                b,
                query,
                &mut rng,
                &mut Scratch::new(m),
            );
            p
        });
    }
    debug_assert!(particles.iter().all(|p| net.observe(&p.state) == spec.y));
    let lw: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let report = IntervalReport {
        t_start: spec.t_start,
        t_end: spec.t_end,
        esf: esf_log(&lw)?,
        esf_poisson: esf_log(&particles.iter().map(|p| p.log_poisson).collect::<Vec<_>>())
            .unwrap_or(0.0),
        esf_girsanov: esf_log(&particles.iter().map(|p| p.log_girsanov).collect::<Vec<_>>())
            .unwrap_or(0.0),
        mean_rejections: particles.iter().map(|p| p.rejections as f64).sum::<f64>()
            / particles.len() as f64,
        resamplings: bounds.len() - 1,
        grid: match &source {
            IntensitySource::Shared(g) => Some((**g).clone()),
            IntensitySource::PerParticle { .. } => None,
        },
    };
    Ok((particles, report))
}

fn check_common(
    net: &ReactionNetwork,
    split: &ObservationSplit,
    mu0: &Pmf,
    n_s: usize,
) -> Result<()> {
    if mu0.dim() != net.n_species() {
        return contract("initial law has wrong dimension");
    }
    if split.n_reactions() != net.n_reactions() || split.n_observed() != net.n_observed() {
        return contract("split was built for a different network");
    }
    if n_s == 0 {
        return contract("need at least one particle");
    }
    Ok(())
}

/// Targeting filter over a sequence of snapshots. Each interval starts from the
/// previous weighted ensemble (resampled first when a resampling period is
/// set) and targets the next snapshot. The estimate is the law at `t_query`.
#[allow(clippy::too_many_arguments)]
pub fn filter_snapshots(
    net: &ReactionNetwork,
    split: &ObservationSplit,
    mu0: &Pmf,
    snaps: &SnapshotSeq,
    t_query: f64,
    n_s: usize,
    opts: &TargetingOptions,
    key: StreamKey,
    exec: Exec,
) -> Result<FilterOutput> {
    check_common(net, split, mu0, n_s)?;
    if snaps.iter().any(|s| s.y.len() != net.n_observed()) {
        return contract("snapshot dimension does not match the observed species");
    }
    if !(t_query >= 0.0 && t_query <= snaps.last().t) {
        return contract(format!(
            "query time {t_query} outside [0, {}]",
            snaps.last().t
        ));
    }
    let mut snap_list = snaps.as_slice();
    let mut law0 = mu0.clone();
    if snap_list[0].t == 0.0 {
        let y0 = &snap_list[0].y;
        law0 = Pmf::normalized(
            mu0.dim(),
            mu0.iter()
                .filter(|(z, _)| &net.observe(z) == y0)
                .map(|(z, p)| (z.clone(), p)),
        )
        .map_err(|_| Error::OutsideSupport(format!("initial law gives no mass to {y0:?}")))?;
        snap_list = &snap_list[1..];
        if snap_list.is_empty() {
            return contract("need a snapshot after time 0");
        }
    }
    let offset = snaps.len() - snap_list.len();
    let mut ensembles: Vec<WeightedEnsemble> = Vec::with_capacity(snap_list.len());
    let mut reports = Vec::with_capacity(snap_list.len());
    let mut t_prev = 0.0;
    for (l, snap) in snap_list.iter().enumerate() {
        let prev = ensembles.last().map(|e| e.particles());
        let anc = match prev {
            None => Ancestors::Law(law0.sampler()),
            Some(ps) if opts.resample_every.is_some() => Ancestors::proportional(ps)?,
            Some(ps) => Ancestors::Uniform(ps),
        };
        let spec = IntervalSpec {
            net,
            split,
            y: &snap.y,
            t_start: t_prev,
            t_end: snap.t,
            query: t_query,
            n_s,
            opts,
            interval: l + offset,
        };
        let ikey = key.derive(l as u64);
        let law = anc.law(Some(&law0))?;
        let source = build_source(&spec, &opts.intensity, &law, ikey, exec)?;
        let (ps, rep) = run_interval(&spec, &anc, source, ikey, exec)?;
        drop(anc);
        ensembles.push(WeightedEnsemble::new(ps));
        reports.push(rep);
        t_prev = snap.t;
    }
    Ok(FilterOutput { ensembles, reports })
}

/// Targeting from `mu0` at time 0 to the single observation `y` at `horizon`.
#[allow(clippy::too_many_arguments)]
pub fn target_interval(
    net: &ReactionNetwork,
    split: &ObservationSplit,
    mu0: &Pmf,
    y: &[i64],
    horizon: f64,
    t_query: f64,
    n_s: usize,
    opts: &TargetingOptions,
    key: StreamKey,
    exec: Exec,
) -> Result<FilterOutput> {
    let snaps = SnapshotSeq::new(
        vec![crate::observation::Snapshot {
            t: horizon,
            y: y.to_vec(),
        }],
        net.n_observed(),
    )?;
    filter_snapshots(net, split, mu0, &snaps, t_query, n_s, opts, key, exec)
}

/// Unconditioned simulation on `[0, t0]` followed by targeting on
/// `[t0, horizon]` with a constant intensity chosen by `mode`.
///
/// `opts.intensity` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn two_stage(
    net: &ReactionNetwork,
    split: &ObservationSplit,
    mu0: &Pmf,
    t0: f64,
    horizon: f64,
    mode: TwoStageMode,
    y: &[i64],
    t_query: f64,
    n_s: usize,
    opts: &TargetingOptions,
    key: StreamKey,
    exec: Exec,
) -> Result<FilterOutput> {
    check_common(net, split, mu0, n_s)?;
    if !(t0 >= 0.0 && t0 < horizon) {
        return contract(format!("split point {t0} outside [0, {horizon})"));
    }
    if !(t_query >= 0.0 && t_query <= horizon) {
        return contract(format!("query time {t_query} outside [0, {horizon}]"));
    }
    if y.len() != net.n_observed() {
        return contract("observation dimension does not match the observed species");
    }
    let plan = match mode {
        TwoStageMode::CommonMean => IntensityPlan::MeanPropensity,
        TwoStageMode::PerParticle => IntensityPlan::PerParticle,
    };
    let spec = IntervalSpec {
        net,
        split,
        y,
        t_start: t0,
        t_end: horizon,
        query: t_query,
        n_s,
        opts,
        interval: 0,
    };
    let tkey = key.derive(TAG_TARGET);
    let (particles, report) = if t0 == 0.0 {
        let anc = Ancestors::Law(mu0.sampler());
        let source = build_source(&spec, &plan, mu0, tkey, exec)?;
        run_interval(&spec, &anc, source, tkey, exec)?
    } else {
        let sampler = mu0.sampler();
        let skey = key.derive(TAG_SSA);
        let m = net.n_reactions();
        let stage1 = exec.map(n_s, |i| {
            let mut rng = skey.rng(i as u64);
            let z0 = sampler.sample(&mut rng).clone();
            let mut z = z0.clone();
            let mut a = vec![0.0; m];
            let mut events = Vec::new();
            let mut counts = vec![0u64; m];
            run_ssa(net, &mut z, 0.0, t0, &mut rng, &mut a, |t, j, _| {
                counts[j] += 1;
                events.push(Event {
                    time: t,
                    reaction: j as u32,
                });
            });
            let path = Path {
                initial_state: z0.clone(),
                start: 0.0,
                events,
                horizon: t0,
            };
            let mark = (t_query <= t0).then(|| path.state_at(net, t_query));
            Particle {
                z0,
                counts,
                state: z,
                events: opts.keep_events.then_some(path.events),
                log_poisson: 0.0,
                log_girsanov: 0.0,
                log_weight: 0.0,
                mark,
                rejections: 0,
                k_rem: vec![0; m],
                cell: 0,
                grid: None,
            }
        });
        let anc = Ancestors::Uniform(&stage1);
        let law = anc.law(None)?;
        let source = build_source(&spec, &plan, &law, tkey, exec)?;
        run_interval(&spec, &anc, source, tkey, exec)?
    };
    Ok(FilterOutput {
        ensembles: vec![WeightedEnsemble::new(particles)],
        reports: vec![report],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::library::*;
    use crate::observation::Snapshot;

    fn assert_hits(out: &FilterOutput, net: &ReactionNetwork, ys: &[Vec<i64>]) {
        for (e, y) in out.ensembles.iter().zip(ys) {
            assert!(e.particles().iter().all(|p| &net.observe(&p.state) == y));
        }
    }

    #[test]
    fn pure_death_weights_are_constant() {
        let net = pure_death(2.0);
        let split = ObservationSplit::build(&net, None).unwrap();
        let opts = TargetingOptions::new(IntensityPlan::Rre { dt: 0.02 });
        let out = target_interval(
            &net,
            &split,
            &Pmf::point_mass(vec![1000]),
            &[368],
            0.5,
            0.2,
            200,
            &opts,
            StreamKey::new(1),
            Exec::Parallel,
        )
        .unwrap();
        assert_hits(&out, &net, &[vec![368]]);
        assert_eq!(out.reports[0].esf_poisson, 1.0);
        assert!(out
            .final_ensemble()
            .particles()
            .iter()
            .all(|p| p.counts == vec![632]));
    }

    #[test]
    fn zero_order_weight_is_poisson_only() {
        let net = immigration(1.5);
        let split = ObservationSplit::build(&net, None).unwrap();
        let opts = TargetingOptions::new(IntensityPlan::Fixed(
            IntensityGrid::constant(&[1.5], 2.0).unwrap(),
        ));
        let out = target_interval(
            &net,
            &split,
            &Pmf::point_mass(vec![0]),
            &[4],
            2.0,
            2.0,
            5,
            &opts,
            StreamKey::new(2),
            Exec::Sequential,
        )
        .unwrap();
        for p in out.final_ensemble().particles() {
            assert!(p.log_girsanov.abs() < 1e-12);
            assert!((p.log_weight - crate::metrics::poisson_ln_pmf(4, 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn history_matches_counts_and_weight() {
        let net = dimerization([0.5, 1.0, 0.1, 1.0]);
        let split = ObservationSplit::build(&net, None).unwrap();
        let mut opts = TargetingOptions::new(IntensityPlan::Rre { dt: 0.1 });
        opts.keep_events = true;
        let out = target_interval(
            &net,
            &split,
            &Pmf::point_mass(vec![20, 20, 20]),
            &[24],
            1.0,
            1.0,
            50,
            &opts,
            StreamKey::new(3),
            Exec::Parallel,
        )
        .unwrap();
        let grid = out.reports[0].grid.clone().unwrap();
        for p in out.final_ensemble().particles() {
            let ev = p.events.as_ref().unwrap();
            let path = Path {
                initial_state: p.z0.clone(),
                start: 0.0,
                events: ev.clone(),
                horizon: 1.0,
            };
            assert_eq!(path.counts(4), p.counts);
            assert_eq!(path.terminal_state(&net), p.state);
            let lg = crate::targeting::girsanov_log_weight(&net, &grid, &p.z0, ev);
            if lg.is_finite() {
                assert!((lg - p.log_girsanov).abs() < 1e-9 * (1.0 + lg.abs()));
            } else {
                assert!(p.is_rejected());
            }
        }
    }

    #[test]
    fn multi_snapshot_hits_every_observation() {
        let net = isomerization(1.0, 1.5);
        let split = ObservationSplit::build(&net, None).unwrap();
        let snaps = SnapshotSeq::new(
            vec![
                Snapshot { t: 0.5, y: vec![3] },
                Snapshot { t: 1.0, y: vec![5] },
                Snapshot { t: 2.0, y: vec![4] },
            ],
            1,
        )
        .unwrap();
        for resample in [None, Some(0.25)] {
            let mut opts = TargetingOptions::new(IntensityPlan::Rre { dt: 0.25 });
            opts.resample_every = resample;
            let out = filter_snapshots(
                &net,
                &split,
                &Pmf::point_mass(vec![10, 0]),
                &snaps,
                0.75,
                300,
                &opts,
                StreamKey::new(4),
                Exec::Parallel,
            )
            .unwrap();
            assert_hits(&out, &net, &[vec![3], vec![5], vec![4]]);
            assert_eq!(out.reports.len(), 3);
            let est = out.estimate().unwrap();
            assert!((est.total() - 1.0).abs() < 1e-12);
            assert!(est.iter().all(|(z, _)| z[0] + z[1] == 10));
        }
    }

    #[test]
    fn misaligned_resampling_period_is_rejected() {
        let net = isomerization(1.0, 1.5);
        let split = ObservationSplit::build(&net, None).unwrap();
        let mut opts = TargetingOptions::new(IntensityPlan::Rre { dt: 0.25 });
        opts.resample_every = Some(0.3);
        let r = target_interval(
            &net,
            &split,
            &Pmf::point_mass(vec![10, 0]),
            &[4],
            1.0,
            1.0,
            10,
            &opts,
            StreamKey::new(0),
            Exec::Sequential,
        );
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn unreachable_interval_is_named() {
        let net = pure_death(1.0);
        let split = ObservationSplit::build(&net, None).unwrap();
        let snaps = SnapshotSeq::new(
            vec![
                Snapshot { t: 0.5, y: vec![3] },
                Snapshot { t: 1.0, y: vec![4] },
            ],
            1,
        )
        .unwrap();
        let mut opts = TargetingOptions::new(IntensityPlan::Rre { dt: 0.5 });
        opts.max_rejects = 50;
        let r = filter_snapshots(
            &net,
            &split,
            &Pmf::point_mass(vec![5]),
            &snaps,
            1.0,
            10,
            &opts,
            StreamKey::new(0),
            Exec::Sequential,
        );
        assert_eq!(
            r.unwrap_err(),
            Error::TargetUnreachable {
                attempts: 50,
                interval: Some(1)
            }
        );
    }

    #[test]
    fn two_stage_degenerate_split_point() {
        let net = isomerization(1.0, 1.5);
        let split = ObservationSplit::build(&net, None).unwrap();
        let mu0 = Pmf::point_mass(vec![10, 0]);
        let opts = TargetingOptions::new(IntensityPlan::MeanPropensity);
        let a = two_stage(
            &net,
            &split,
            &mu0,
            0.0,
            1.0,
            TwoStageMode::CommonMean,
            &[4],
            0.7,
            100,
            &opts,
            StreamKey::new(8),
            Exec::Parallel,
        )
        .unwrap();
        let g = a.reports[0].grid.clone().unwrap();
        assert_eq!(g.n_cells(), 1);
        assert_eq!(g.values(), &[vec![10.0], vec![1.5]]);
        for mode in [TwoStageMode::CommonMean, TwoStageMode::PerParticle] {
            let b = two_stage(
                &net,
                &split,
                &mu0,
                0.5,
                1.0,
                mode,
                &[4],
                0.7,
                100,
                &opts,
                StreamKey::new(8),
                Exec::Parallel,
            )
            .unwrap();
            assert_hits(&b, &net, &[vec![4]]);
            assert!(b
                .final_ensemble()
                .particles()
                .iter()
                .all(|p| p.mark.is_some()));
        }
    }

    #[test]
    fn deterministic_across_modes() {
        let net = isomerization(1.0, 1.5);
        let split = ObservationSplit::build(&net, None).unwrap();
        let mut opts = TargetingOptions::new(IntensityPlan::Rre { dt: 0.1 });
        opts.keep_events = true;
        opts.resample_every = Some(0.2);
        let run = |exec| {
            target_interval(
                &net,
                &split,
                &Pmf::point_mass(vec![10, 0]),
                &[4],
                1.0,
                0.7,
                64,
                &opts,
                StreamKey::new(12),
                exec,
            )
            .unwrap()
        };
        let (a, b) = (run(Exec::Sequential), run(Exec::Parallel));
        for (p, q) in a
            .final_ensemble()
            .particles()
            .iter()
            .zip(b.final_ensemble().particles())
        {
            assert_eq!(p.log_weight.to_bits(), q.log_weight.to_bits());
            assert_eq!(p.events, q.events);
        }
    }
}

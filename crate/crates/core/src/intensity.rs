//! Piecewise-constant proposal intensities for the reaction counts.

use std::io::Write;

use crate::error::{contract, Error, Result};
use crate::exec::Exec;
use crate::network::ReactionNetwork;
use crate::pmf::Pmf;
use crate::rng::StreamKey;
use crate::simulate::ssa_checkpoints;
use crate::split::ObservationSplit;

/// Fallback floor for reactions whose propensity vanishes at the all-ones state.
pub const MACHINE_FLOOR: f64 = 1e-8;

/// `m x N` matrix of strictly positive intensities on `[0, horizon]`, constant
/// on each cell of width `dt`. Times are local to the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    values: Vec<Vec<f64>>,
    dt: f64,
    horizon: f64,
    /// cum[i][j] = integral of reaction i over the first j cells
    cum: Vec<Vec<f64>>,
}

/// Number of cells of width `dt` in `horizon`, if it divides evenly.
pub fn cell_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return contract(format!("horizon {horizon} and mesh {dt} must be positive"));
    }
    let n = (horizon / dt).round();
    if n < 1.0 || (n * dt - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return contract(format!("mesh {dt} does not divide horizon {horizon}"));
    }
    Ok(n as usize)
}

impl IntensityGrid {
    pub fn new(values: Vec<Vec<f64>>, horizon: f64) -> Result<Self> {
        let n = values.first().map(Vec::len).unwrap_or(0);
        if values.is_empty() || n == 0 || values.iter().any(|r| r.len() != n) {
            return contract("intensity grid must be a nonempty rectangular matrix");
        }
        if let Some(v) = values
            .iter()
            .flatten()
            .find(|v| !(**v > 0.0) || !v.is_finite())
        {
            return contract(format!("intensity {v} is not strictly positive"));
        }
        if !(horizon > 0.0) {
            return contract(format!("horizon {horizon} must be positive"));
        }
        let dt = horizon / n as f64;
        let cum = values
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                std::iter::once(0.0)
                    .chain(row.iter().map(|v| {
                        acc += v * dt;
                        acc
                    }))
                    .collect()
            })
            .collect();
        Ok(IntensityGrid {
            values,
            dt,
            horizon,
            cum,
        })
    }

    /// Time-constant intensity over a single cell.
    pub fn constant(rates: &[f64], horizon: f64) -> Result<Self> {
        Self::new(rates.iter().map(|&r| vec![r]).collect(), horizon)
    }

    pub fn n_reactions(&self) -> usize {
        self.values.len()
    }

    pub fn n_cells(&self) -> usize {
        self.values[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    #[inline]
    pub fn value(&self, i: usize, cell: usize) -> f64 {
        self.values[i][cell]
    }

    /// Cell containing local time `t`, using left limits at interior cell
    /// boundaries (a jump exactly at a boundary sees the earlier cell).
    #[inline]
    pub fn cell_of(&self, t: f64) -> usize {
        let n = self.n_cells();
        let c = (t / self.dt).ceil() as isize - 1;
        c.clamp(0, n as isize - 1) as usize
    }

    /// Integral of reaction `i` over `[0, t]`.
    #[inline]
    pub fn cumulative_of(&self, i: usize, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon);
        let n = self.n_cells();
        let cell = ((t / self.dt).floor() as usize).min(n - 1);
        self.cum[i][cell] + self.values[i][cell] * (t - cell as f64 * self.dt)
    }

    /// Integrals of every reaction over `[0, t]`.
    pub fn cumulative(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return contract(format!("time {t} outside [0, {}]", self.horizon));
        }
        Ok((0..self.n_reactions())
            .map(|i| self.cumulative_of(i, t))
            .collect())
    }

    /// Integral of reaction `i` over cells `cell..N`.
    #[inline]
    pub fn mass_from(&self, i: usize, cell: usize) -> f64 {
        let c = &self.cum[i];
        c[c.len() - 1] - c[cell]
    }

    /// Integrals over the whole horizon.
    pub fn totals(&self) -> Vec<f64> {
        self.cum.iter().map(|c| *c.last().unwrap()).collect()
    }

    /// Inverse of [`cumulative_of`](Self::cumulative_of) for reaction `i`.
    pub fn invert(&self, i: usize, eta: f64) -> f64 {
        let c = &self.cum[i];
        let n = self.n_cells();
        let cell = (c.partition_point(|&x| x <= eta).max(1) - 1).min(n - 1);
        let t = cell as f64 * self.dt + (eta - c[cell]) / self.values[i][cell];
        t.clamp(0.0, self.horizon)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Per-reaction floor: propensity at the all-ones state when positive.
pub fn positivity_floor(net: &ReactionNetwork) -> Vec<f64> {
    let ones = vec![1i64; net.n_species()];
    (0..net.n_reactions())
        .map(|j| {
            let a = net.propensity_of(j, &ones);
            if a > 0.0 {
                a
            } else {
                MACHINE_FLOOR
            }
        })
        .collect()
}

fn rre_rhs(net: &ReactionNetwork, z: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for j in 0..net.n_reactions() {
        let a = net.propensity_real(j, z);
        for (o, &d) in out.iter_mut().zip(net.change(j)) {
            *o += a * d as f64;
        }
    }
}

/// Reaction-rate equation trajectory sampled at the left endpoint of every cell.
fn rre_states(net: &ReactionNetwork, z0: &[f64], n_cells: usize, dt: f64) -> Vec<Vec<f64>> {
    const SUBSTEPS: usize = 10;
    let n = net.n_species();
    let h = dt / SUBSTEPS as f64;
    let mut z = z0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut out = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        out.push(z.clone());
        for _ in 0..SUBSTEPS {
            rre_rhs(net, &z, &mut k1);
            for i in 0..n {
                tmp[i] = z[i] + 0.5 * h * k1[i];
            }
            rre_rhs(net, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = z[i] + 0.5 * h * k2[i];
            }
            rre_rhs(net, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = z[i] + h * k3[i];
            }
            rre_rhs(net, &tmp, &mut k4);
            for i in 0..n {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    out
}

/// Propensity along the deterministic reaction-rate trajectory from `z0`,
/// left-endpoint sampled on a mesh of width `dt` and floored.
pub fn lambda1_from_rre(
    net: &ReactionNetwork,
    z0: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<IntensityGrid> {
    if z0.len() != net.n_species() {
        return contract("initial state has wrong dimension");
    }
    let n_cells = cell_count(horizon, dt)?;
    let floor = positivity_floor(net);
    let states = rre_states(net, z0, n_cells, horizon / n_cells as f64);
    let values = (0..net.n_reactions())
        .map(|j| {
            states
                .iter()
                .map(|z| net.propensity_real(j, z).max(floor[j]))
                .collect()
        })
        .collect();
    IntensityGrid::new(values, horizon)
}

/// Monte Carlo estimate of the mean propensity at the left endpoint of every
/// cell, floored.
pub fn lambda1_from_mc(
    net: &ReactionNetwork,
    mu0: &Pmf,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    key: StreamKey,
    exec: Exec,
) -> Result<IntensityGrid> {
    if mu0.dim() != net.n_species() {
        return contract("initial law has wrong dimension");
    }
    if n_paths == 0 {
        return contract("need at least one path");
    }
    let n_cells = cell_count(horizon, dt)?;
    let dt = horizon / n_cells as f64;
    let checkpoints: Vec<f64> = (0..n_cells).map(|j| j as f64 * dt).collect();
    let sampler = mu0.sampler();
    let m = net.n_reactions();
    let per_path = exec.map(n_paths, |p| {
        let mut rng = key.rng(p as u64);
        let z0 = sampler.sample(&mut rng).clone();
        let states = ssa_checkpoints(net, &z0, 0.0, &checkpoints, &mut rng);
        let mut a = vec![0.0; m * n_cells];
        for (c, z) in states.iter().enumerate() {
            for j in 0..m {
                a[j * n_cells + c] = net.propensity_of(j, z);
            }
        }
        a
    });
    let mut sum = vec![0.0; m * n_cells];
    for a in &per_path {
        for (s, v) in sum.iter_mut().zip(a) {
            *s += v;
        }
    }
    let floor = positivity_floor(net);
    let values = (0..m)
        .map(|j| {
            (0..n_cells)
                .map(|c| (sum[j * n_cells + c] / n_paths as f64).max(floor[j]))
                .collect()
        })
        .collect();
    IntensityGrid::new(values, horizon)
}

/// Solve `M x = b` for a small dense system by partial-pivoting elimination.
fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &c| m[a][col].abs().total_cmp(&m[c][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let prow = &top[col];
        for (k, row) in rest.iter_mut().enumerate() {
            let f = row[col] / prow[col];
            if f != 0.0 {
                for (a, p) in row[col..].iter_mut().zip(&prow[col..]) {
                    *a -= f * p;
                }
                b[col + 1 + k] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// Outcome of [`lambda2_optimize`] with solver diagnostics.
#[derive(Debug, Clone)]
pub struct Lambda2 {
    pub grid: IntensityGrid,
    /// Whether the bound-constrained fallback was needed.
    pub used_bounds: bool,
    /// Max abs violation of the integrated linear constraint.
    pub constraint_residual: f64,
}

/// Closest grid (Frobenius norm) to `grid1` whose integrated intensities meet
/// the observation constraint `nu'' r = dy` on the reduced observed rows.
///
/// The unconstrained-sign solution is a uniform shift of every row. If it dips
/// below the lattice minimum propensity of some reaction, the bound-constrained
/// problem is solved exactly through its dual, a piecewise-linear monotone
/// equation in one multiplier per observed row.
pub fn lambda2_optimize(
    net: &ReactionNetwork,
    split: &ObservationSplit,
    grid1: &IntensityGrid,
    dy: &[f64],
) -> Result<Lambda2> {
    let c = split.reduced_stoich();
    let kept = split.kept_rows();
    if dy.len() != split.n_observed() {
        return contract(format!(
            "dy has length {}, expected {}",
            dy.len(),
            split.n_observed()
        ));
    }
    if grid1.n_reactions() != net.n_reactions() {
        return contract("grid and network disagree on reaction count");
    }
    let dy: Vec<f64> = kept.iter().map(|&r| dy[r]).collect();
    let m = grid1.n_reactions();
    let n = grid1.n_cells();
    let dt = grid1.dt();
    let horizon = grid1.horizon();
    let rbar = grid1.totals();
    let rows = c.len();
    let lower: Vec<f64> = (0..m)
        .map(|j| net.min_positive_propensity(j).max(MACHINE_FLOOR))
        .collect();

    let residual_of = |r: &[f64]| -> Vec<f64> {
        (0..rows)
            .map(|k| (0..m).map(|j| c[k][j] as f64 * r[j]).sum::<f64>() - dy[k])
            .collect()
    };
    let scale = 1.0
        + dy.iter().map(|v| v.abs()).fold(0.0, f64::max)
        + rbar.iter().fold(0.0, |a, v| a + v.abs());

    if rows == 0 {
        return Ok(Lambda2 {
            grid: grid1.clone(),
            used_bounds: false,
            constraint_residual: 0.0,
        });
    }

    // closed-form uniform shift
    let cct: Vec<Vec<f64>> = (0..rows)
        .map(|a| {
            (0..rows)
                .map(|b| (0..m).map(|j| (c[a][j] * c[b][j]) as f64).sum())
                .collect()
        })
        .collect();
    let g0 = residual_of(&rbar);
    let theta = solve_dense(cct.clone(), g0.iter().map(|v| -v).collect()).ok_or_else(|| {
        Error::InfeasibleIntensity("observed stoichiometry is rank deficient".into())
    })?;
    let shift: Vec<f64> = (0..m)
        .map(|j| (0..rows).map(|k| c[k][j] as f64 * theta[k]).sum::<f64>() / horizon)
        .collect();
    let values: Vec<Vec<f64>> = (0..m)
        .map(|j| grid1.values()[j].iter().map(|v| v + shift[j]).collect())
        .collect();
    let within = values
        .iter()
        .enumerate()
        .all(|(j, row)| row.iter().all(|&v| v >= lower[j]));
    if within {
        let grid = IntensityGrid::new(values, horizon)?;
        let res = residual_of(&grid.totals())
            .iter()
            .fold(0.0, |a: f64, v| a.max(v.abs()));
        return Ok(Lambda2 {
            grid,
            used_bounds: false,
            constraint_residual: res,
        });
    }

    // bound-constrained: lambda_ij(th) = max(lower_j, lbar_ij + dt * (C^T th)_j)
    let lbar = grid1.values();
    let eval = |th: &[f64]| -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
        let s: Vec<f64> = (0..m)
            .map(|j| dt * (0..rows).map(|k| c[k][j] as f64 * th[k]).sum::<f64>())
            .collect();
        let mut active = vec![0usize; m];
        let vals: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                lbar[j]
                    .iter()
                    .map(|&v| {
                        let x = v + s[j];
                        if x > lower[j] {
                            active[j] += 1;
                            x
                        } else {
                            lower[j]
                        }
                    })
                    .collect()
            })
            .collect();
        let r: Vec<f64> = vals
            .iter()
            .map(|row| row.iter().sum::<f64>() * dt)
            .collect();
        (vals, residual_of(&r), active)
    };
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-13 * scale;
    let mut th = vec![0.0; rows];
    let (mut vals, mut g, mut active) = eval(&th);
    for _ in 0..500 {
        if norm(&g) <= tol {
            break;
        }
        // generalized Jacobian dt^2 C diag(active) C^T, lightly regularized
        let jac: Vec<Vec<f64>> = (0..rows)
            .map(|a| {
                (0..rows)
                    .map(|b| {
                        let v: f64 = (0..m)
                            .map(|j| (c[a][j] * c[b][j]) as f64 * active[j] as f64)
                            .sum::<f64>()
                            * dt
                            * dt;
                        if a == b {
                            v + 1e-12 * dt * dt * n as f64
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let step = solve_dense(jac, g.iter().map(|v| -v).collect())
            .unwrap_or_else(|| g.iter().map(|v| -v).collect());
        let g_norm = norm(&g);
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = th.iter().zip(&step).map(|(t, s)| t + alpha * s).collect();
            let (v2, g2, a2) = eval(&cand);
            if norm(&g2) < g_norm {
                th = cand;
                vals = v2;
                g = g2;
                active = a2;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let res = g.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    if res > 1e-9 {
        return Err(Error::InfeasibleIntensity(format!(
            "no intensity above the lattice minimum meets the observation constraint (residual {res:.3e})"
        )));
    }
    let grid = IntensityGrid::new(vals, horizon)?;
    Ok(Lambda2 {
        grid,
        used_bounds: true,
        constraint_residual: res,
    })
}

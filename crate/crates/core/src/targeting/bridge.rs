//! Poisson-bridge interpolation of fixed reaction counts and the Girsanov
//! likelihood ratio of the resulting path.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{contract, Result};
use crate::intensity::IntensityGrid;
use crate::network::ReactionNetwork;
use crate::simulate::Event;

/// Split the counts still to be placed in cells `cell..N` and return in `out`
/// how many events of each reaction land in `cell`.
#[inline]
pub(crate) fn thin_cell<R: Rng + ?Sized>(
    grid: &IntensityGrid,
    cell: usize,
    k_rem: &mut [u64],
    rng: &mut R,
    out: &mut [u64],
) {
    let last = cell + 1 == grid.n_cells();
    for i in 0..k_rem.len() {
        let k = k_rem[i];
        let r = if k == 0 {
            0
        } else if last {
            k
        } else {
            let p = (grid.value(i, cell) * grid.dt() / grid.mass_from(i, cell)).clamp(0.0, 1.0);
            Binomial::new(k, p)
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        out[i] = r;
        k_rem[i] -= r;
    }
}

/// Uniform local event times inside `cell`, sorted by (time, reaction).
#[inline]
pub(crate) fn cell_events<R: Rng + ?Sized>(
    grid: &IntensityGrid,
    cell: usize,
    counts: &[u64],
    rng: &mut R,
    buf: &mut Vec<(f64, u32)>,
) {
    buf.clear();
    let lo = cell as f64 * grid.dt();
    let hi = if cell + 1 == grid.n_cells() {
        grid.horizon()
    } else {
        (cell + 1) as f64 * grid.dt()
    };
    for (i, &r) in counts.iter().enumerate() {
        for _ in 0..r {
            let u = 1.0 - rng.random::<f64>();
            buf.push(((lo + (hi - lo) * u).min(hi), i as u32));
        }
    }
    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}

/// Place exactly `counts[i]` events of each reaction on `[0, horizon]` as an
/// inhomogeneous Poisson bridge with the grid's intensity. Times are local.
pub fn interpolate<R: Rng + ?Sized>(
    grid: &IntensityGrid,
    counts: &[u64],
    rng: &mut R,
) -> Result<Vec<Event>> {
    if counts.len() != grid.n_reactions() {
        return contract(format!(
            "{} counts for {} reactions",
            counts.len(),
            grid.n_reactions()
        ));
    }
    let mut k_rem = counts.to_vec();
    let mut in_cell = vec![0u64; counts.len()];
    let mut buf = Vec::new();
    let mut events = Vec::with_capacity(counts.iter().sum::<u64>() as usize);
    for cell in 0..grid.n_cells() {
        thin_cell(grid, cell, &mut k_rem, rng, &mut in_cell);
        cell_events(grid, cell, &in_cell, rng, &mut buf);
        events.extend(buf.iter().map(|&(time, reaction)| Event { time, reaction }));
    }
    Ok(events)
}

/// Log likelihood ratio of the network's law against the proposal intensity
/// for a path from `z0` with time-sorted local `events` on the grid horizon.
/// `-inf` when a reaction fires where its propensity is zero.
pub fn girsanov_log_weight(
    net: &ReactionNetwork,
    grid: &IntensityGrid,
    z0: &[i64],
    events: &[Event],
) -> f64 {
    let m = net.n_reactions();
    let total_cum = |t: f64| -> f64 { (0..m).map(|i| grid.cumulative_of(i, t)).sum() };
    let mut z = z0.to_vec();
    let mut a = vec![0.0; m];
    net.propensities_into(&z, &mut a);
    let mut a0: f64 = a.iter().sum();
    let mut t = 0.0;
    let mut lg = 0.0;
    for e in events {
        let j = e.reaction as usize;
        lg += total_cum(e.time) - total_cum(t) - a0 * (e.time - t);
        let cell = grid.cell_of(e.time);
        lg += a[j].ln() - grid.value(j, cell).ln();
        net.fire(j, &mut z);
        net.propensities_into(&z, &mut a);
        a0 = a.iter().sum();
        t = e.time;
    }
    lg + total_cum(grid.horizon()) - total_cum(t) - a0 * (grid.horizon() - t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::library::*;
    use crate::rng::StreamKey;

    #[test]
    fn single_cell_keeps_counts() {
        let g = IntensityGrid::constant(&[1.0], 2.0).unwrap();
        let ev = interpolate(&g, &[5], &mut StreamKey::new(1).rng(0)).unwrap();
        assert_eq!(ev.len(), 5);
        assert!(ev.iter().all(|e| e.time > 0.0 && e.time <= 2.0));
        assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn count_conservation_on_uneven_grid() {
        let g = IntensityGrid::new(vec![vec![1.0, 5.0, 0.1], vec![2.0, 0.5, 3.0]], 1.5).unwrap();
        let key = StreamKey::new(2);
        for i in 0..200 {
            let k = [i % 17, (3 * i) % 11];
            let ev = interpolate(&g, &k, &mut key.rng(i)).unwrap();
            let mut c = [0u64; 2];
            for e in &ev {
                c[e.reaction as usize] += 1;
            }
            assert_eq!(c, k);
        }
    }

    #[test]
    fn zero_order_weight_is_one() {
        let net = immigration(2.0);
        let g = IntensityGrid::new(vec![vec![2.0, 2.0, 2.0]], 3.0).unwrap();
        let ev = interpolate(&g, &[7], &mut StreamKey::new(3).rng(0)).unwrap();
        assert!(girsanov_log_weight(&net, &g, &[0], &ev).abs() < 1e-12);
    }

    #[test]
    fn zero_propensity_firing_is_infeasible() {
        let net = isomerization(1.0, 1.0);
        let g = IntensityGrid::constant(&[1.0, 1.0], 1.0).unwrap();
        let ev = [Event {
            time: 0.5,
            reaction: 0,
        }];
        assert_eq!(
            girsanov_log_weight(&net, &g, &[0, 3], &ev),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn hand_computed_weight() {
        // pure death from 2 with rate 1, proposal 3 on [0,1], one death at 0.25:
        // log L = ln(2/3) + int_0^1 3 - int (2 on [0,.25], 1 after) = ln(2/3) + 3 - 1.25
        let net = pure_death(1.0);
        let g = IntensityGrid::constant(&[3.0], 1.0).unwrap();
        let lg = girsanov_log_weight(
            &net,
            &g,
            &[2],
            &[Event {
                time: 0.25,
                reaction: 0,
            }],
        );
        assert!((lg - ((2.0f64 / 3.0).ln() + 3.0 - 1.25)).abs() < 1e-12);
    }
}

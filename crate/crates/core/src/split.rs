//! Free/slaved partition of reaction counts induced by a partial observation.
//!
//! After removing linearly dependent observed rows, the observed stoichiometry
//! is reordered as `[A B]` with `B` square and invertible, so the slaved counts
//! are determined by the free ones: `k'' = B^-1 (dy - A k')`. All linear algebra
//! is exact over the rationals so the integrality test never suffers rounding.

use num_rational::Ratio;

use crate::error::{contract, Error, Result};
use crate::network::ReactionNetwork;

type Q = Ratio<i128>;

fn q(x: i64) -> Q {
    Q::from_integer(x as i128)
}

/// Dense rational matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
struct QMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl QMatrix {
    fn from_int(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        QMatrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&x| q(x)).collect(),
        }
    }

    fn at(&self, i: usize, j: usize) -> Q {
        self.data[i * self.cols + j]
    }

    fn set(&mut self, i: usize, j: usize, v: Q) {
        self.data[i * self.cols + j] = v;
    }

    /// Gauss-Jordan inverse; `None` when singular.
    fn inverse(&self) -> Option<QMatrix> {
        let n = self.rows;
        debug_assert_eq!(n, self.cols);
        let mut a = self.clone();
        let mut inv = QMatrix {
            rows: n,
            cols: n,
            data: vec![q(0); n * n],
        };
        for i in 0..n {
            inv.set(i, i, q(1));
        }
        for col in 0..n {
            let pivot = (col..n).find(|&r| a.at(r, col) != q(0))?;
            if pivot != col {
                for j in 0..n {
                    let (x, y) = (a.at(col, j), a.at(pivot, j));
                    a.set(col, j, y);
                    a.set(pivot, j, x);
                    let (x, y) = (inv.at(col, j), inv.at(pivot, j));
                    inv.set(col, j, y);
                    inv.set(pivot, j, x);
                }
            }
            let p = a.at(col, col);
            for j in 0..n {
                a.set(col, j, a.at(col, j) / p);
                inv.set(col, j, inv.at(col, j) / p);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f == q(0) {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.at(r, j) - f * a.at(col, j));
                    inv.set(r, j, inv.at(r, j) - f * inv.at(col, j));
                }
            }
        }
        Some(inv)
    }
}

/// Greedy row basis: returns the independent row indices, and each dependent
/// row with its coefficients over the independent ones.
fn independent_rows(rows: &[Vec<i64>]) -> (Vec<usize>, Vec<(usize, Vec<Q>)>) {
    let m = rows.first().map(Vec::len).unwrap_or(0);
    // (echelon row, its coefficients over kept rows, pivot column)
    let mut basis: Vec<(Vec<Q>, Vec<Q>, usize)> = Vec::new();
    let mut kept = Vec::new();
    let mut dependent = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        // invariant: v = row + sum_k d[k] * rows[kept[k]]
        let mut v: Vec<Q> = row.iter().map(|&x| q(x)).collect();
        let mut d = vec![q(0); kept.len()];
        for (b, bc, pc) in &basis {
            let f = v[*pc] / b[*pc];
            if f == q(0) {
                continue;
            }
            for j in 0..m {
                v[j] -= f * b[j];
            }
            for (dk, c) in d.iter_mut().zip(bc) {
                *dk -= f * *c;
            }
        }
        match v.iter().position(|x| *x != q(0)) {
            Some(pc) => {
                for (_, bc, _) in basis.iter_mut() {
                    bc.push(q(0));
                }
                d.push(q(1));
                basis.push((v, d, pc));
                kept.push(idx);
            }
            None => dependent.push((idx, d.iter().map(|c| -*c).collect())),
        }
    }
    (kept, dependent)
}

/// Partition of the reaction index set into free and slaved reactions.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSplit {
    free: Vec<usize>,
    slaved: Vec<usize>,
    /// Observed rows kept after dependency removal (indices into the observed block).
    kept_rows: Vec<usize>,
    /// Dependent observed rows with coefficients over `kept_rows`.
    dropped: Vec<(usize, Vec<Q>)>,
    a: Vec<Vec<i64>>,
    b: Vec<Vec<i64>>,
    b_inv: QMatrix,
    n_reactions: usize,
    n_observed: usize,
}

impl ObservationSplit {
    /// Build the split for `net`. With `free` absent, the lexicographically
    /// first free set whose complementary block is invertible is used.
    pub fn build(net: &ReactionNetwork, free: Option<&[usize]>) -> Result<Self> {
        let m = net.n_reactions();
        let full = net.observed_stoich();
        let (kept_rows, dropped) = independent_rows(&full);
        let reduced: Vec<Vec<i64>> = kept_rows.iter().map(|&r| full[r].clone()).collect();
        let m2 = reduced.len();
        if m2 > m {
            return Err(Error::InfeasibleSplit(
                "more independent observations than reactions".into(),
            ));
        }
        let make = |free: Vec<usize>| -> Option<Self> {
            let slaved: Vec<usize> = (0..m).filter(|j| !free.contains(j)).collect();
            if slaved.len() != m2 {
                return None;
            }
            let a: Vec<Vec<i64>> = reduced
                .iter()
                .map(|row| free.iter().map(|&j| row[j]).collect())
                .collect();
            let b: Vec<Vec<i64>> = reduced
                .iter()
                .map(|row| slaved.iter().map(|&j| row[j]).collect())
                .collect();
            let b_inv = if m2 == 0 {
                QMatrix {
                    rows: 0,
                    cols: 0,
                    data: vec![],
                }
            } else {
                QMatrix::from_int(&b).inverse()?
            };
            Some(ObservationSplit {
                free,
                slaved,
                kept_rows: kept_rows.clone(),
                dropped: dropped.clone(),
                a,
                b,
                b_inv,
                n_reactions: m,
                n_observed: full.len(),
            })
        };
        match free {
            Some(f) => {
                let mut seen = vec![false; m];
                for &j in f {
                    if j >= m || seen[j] {
                        return contract(format!(
                            "free reaction list {f:?} is not a set of reaction indices"
                        ));
                    }
                    seen[j] = true;
                }
                make(f.to_vec()).ok_or_else(|| {
                    Error::InfeasibleSplit(format!(
                        "slaved complement of free set {f:?} does not give an invertible block"
                    ))
                })
            }
            None => combinations(m, m - m2)
                .into_iter()
                .find_map(make)
                .ok_or_else(|| Error::InfeasibleSplit("no invertible slaved block exists".into())),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn slaved(&self) -> &[usize] {
        &self.slaved
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_slaved(&self) -> usize {
        self.slaved.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.n_reactions
    }

    pub fn n_observed(&self) -> usize {
        self.n_observed
    }

    /// Indices (into the observed block) of rows removed as linearly dependent.
    pub fn dropped_rows(&self) -> Vec<usize> {
        self.dropped.iter().map(|(r, _)| *r).collect()
    }

    pub fn kept_rows(&self) -> &[usize] {
        &self.kept_rows
    }

    pub fn a(&self) -> &[Vec<i64>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<i64>] {
        &self.b
    }

    /// Reduced observed stoichiometry (kept rows only), columns in reaction order.
    pub fn reduced_stoich(&self) -> Vec<Vec<i64>> {
        (0..self.kept_rows.len())
            .map(|r| {
                let mut row = vec![0; self.n_reactions];
                for (c, &j) in self.free.iter().enumerate() {
                    row[j] = self.a[r][c];
                }
                for (c, &j) in self.slaved.iter().enumerate() {
                    row[j] = self.b[r][c];
                }
                row
            })
            .collect()
    }

    /// Whether the dependent rows of `dy` agree with the kept ones.
    pub fn consistent(&self, dy: &[i64]) -> bool {
        self.dropped.iter().all(|(row, coef)| {
            let implied: Q = coef
                .iter()
                .zip(&self.kept_rows)
                .map(|(c, &k)| *c * q(dy[k]))
                .sum();
            implied == q(dy[*row])
        })
    }

    /// Slaved counts `B^-1 (dy - A k')` when they form a nonnegative integer
    /// vector; `None` otherwise (including inconsistent dependent rows).
    pub fn slaved_counts(&self, dy: &[i64], k_free: &[u64]) -> Result<Option<Vec<u64>>> {
        if dy.len() != self.n_observed || k_free.len() != self.free.len() {
            return contract(format!(
                "expected dy of length {} and {} free counts, got {} and {}",
                self.n_observed,
                self.free.len(),
                dy.len(),
                k_free.len()
            ));
        }
        Ok(self.slaved_counts_unchecked(dy, k_free))
    }

    pub(crate) fn slaved_counts_unchecked(&self, dy: &[i64], k_free: &[u64]) -> Option<Vec<u64>> {
        if !self.consistent(dy) {
            return None;
        }
        let m2 = self.slaved.len();
        let rhs: Vec<Q> = self
            .kept_rows
            .iter()
            .enumerate()
            .map(|(r, &row)| {
                let ak: i128 = self.a[r]
                    .iter()
                    .zip(k_free)
                    .map(|(&a, &k)| a as i128 * k as i128)
                    .sum();
                Q::from_integer(dy[row] as i128 - ak)
            })
            .collect();
        let mut out = Vec::with_capacity(m2);
        for i in 0..m2 {
            let v: Q = (0..m2).map(|j| self.b_inv.at(i, j) * rhs[j]).sum();
            if !v.is_integer() || v < Q::from_integer(0) {
                return None;
            }
            out.push(u64::try_from(v.to_integer()).ok()?);
        }
        Some(out)
    }

    /// Assemble a full count vector (reaction order) from free and slaved parts.
    pub fn assemble(&self, k_free: &[u64], k_slaved: &[u64]) -> Vec<u64> {
        let mut k = vec![0; self.n_reactions];
        for (&j, &v) in self.free.iter().zip(k_free) {
            k[j] = v;
        }
        for (&j, &v) in self.slaved.iter().zip(k_slaved) {
            k[j] = v;
        }
        k
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

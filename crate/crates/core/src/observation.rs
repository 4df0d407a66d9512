use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Exact reading of the observed species block at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub y: Vec<i64>,
}

/// Snapshots ordered by strictly increasing time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeq(Vec<Snapshot>);

impl SnapshotSeq {
    pub fn new(snaps: Vec<Snapshot>, n_observed: usize) -> Result<Self> {
        if snaps.is_empty() {
            return contract("at least one snapshot is required");
        }
        for (l, s) in snaps.iter().enumerate() {
            if !(s.t >= 0.0) || !s.t.is_finite() {
                return contract(format!("snapshot {l} has invalid time {}", s.t));
            }
            if s.y.len() != n_observed {
                return contract(format!(
                    "snapshot {l} has {} values, expected {n_observed}",
                    s.y.len()
                ));
            }
            if s.y.iter().any(|&v| v < 0) {
                return contract(format!("snapshot {l} has a negative count"));
            }
        }
        for (l, w) in snaps.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return contract(format!(
                    "snapshots {l} (t={}) and {} (t={}) are not strictly increasing",
                    w[0].t,
                    l + 1,
                    w[1].t
                ));
            }
        }
        Ok(SnapshotSeq(snaps))
    }

    pub fn single(t: f64, y: Vec<i64>) -> Result<Self> {
        let n = y.len();
        Self::new(vec![Snapshot { t, y }], n)
    }

    pub fn as_slice(&self) -> &[Snapshot] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> &Snapshot {
        self.0.last().expect("nonempty by construction")
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Snapshot> {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_enforced() {
        let s = |t: f64| Snapshot { t, y: vec![1] };
        assert!(SnapshotSeq::new(vec![s(0.5), s(1.0)], 1).is_ok());
        let err = SnapshotSeq::new(vec![s(1.0), s(0.5)], 1).unwrap_err();
        assert!(err.to_string().contains("snapshots 0"));
        assert!(SnapshotSeq::new(vec![s(1.0), s(1.0)], 1).is_err());
        assert!(SnapshotSeq::new(vec![], 1).is_err());
    }
}

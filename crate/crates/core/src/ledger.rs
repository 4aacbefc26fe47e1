//! Query accounting shared by every oracle and simulator.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Evaluation,
    Membership,
    ControlledWalk,
    Reflector,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [
        QueryKind::Evaluation,
        QueryKind::Membership,
        QueryKind::ControlledWalk,
        QueryKind::Reflector,
    ];

    fn index(self) -> usize {
        match self {
            QueryKind::Evaluation => 0,
            QueryKind::Membership => 1,
            QueryKind::ControlledWalk => 2,
            QueryKind::Reflector => 3,
        }
    }
}

/// Monotone per-kind counters. Safe to share behind an `Arc` and bump from
/// many threads at once.
#[derive(Debug, Default)]
pub struct QueryLedger {
    counts: [AtomicU64; 4],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub evaluation: u64,
    pub membership: u64,
    pub controlled_walk: u64,
    pub reflector: u64,
    pub total: u64,
}

impl LedgerSnapshot {
    pub fn get(&self, kind: QueryKind) -> u64 {
        match kind {
            QueryKind::Evaluation => self.evaluation,
            QueryKind::Membership => self.membership,
            QueryKind::ControlledWalk => self.controlled_walk,
            QueryKind::Reflector => self.reflector,
        }
    }

    /// Per-kind difference `self - earlier`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        let evaluation = self.evaluation - earlier.evaluation;
        let membership = self.membership - earlier.membership;
        let controlled_walk = self.controlled_walk - earlier.controlled_walk;
        let reflector = self.reflector - earlier.reflector;
        LedgerSnapshot {
            evaluation,
            membership,
            controlled_walk,
            reflector,
            total: evaluation + membership + controlled_walk + reflector,
        }
    }
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&self, kind: QueryKind, n: u64) {
        self.counts[kind.index()].fetch_add(n, Ordering::Relaxed);
    }

    pub fn count(&self, kind: QueryKind) -> u64 {
        self.counts[kind.index()].load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        QueryKind::ALL.iter().map(|k| self.count(*k)).sum()
    }

    /// Consistent view of all counters; the total is the sum of the
    /// per-kind values read here.
    pub fn snapshot(&self) -> LedgerSnapshot {
        let evaluation = self.count(QueryKind::Evaluation);
        let membership = self.count(QueryKind::Membership);
        let controlled_walk = self.count(QueryKind::ControlledWalk);
        let reflector = self.count(QueryKind::Reflector);
        LedgerSnapshot {
            evaluation,
            membership,
            controlled_walk,
            reflector,
            total: evaluation + membership + controlled_walk + reflector,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn concurrent_charges_sum() {
        let ledger = Arc::new(QueryLedger::new());
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let l = Arc::clone(&ledger);
                std::thread::spawn(move || {
                    for _ in 0..1000 {
                        l.charge(QueryKind::ALL[i], 1);
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let snap = ledger.snapshot();
        assert_eq!(snap.total, 4000);
        assert_eq!(snap.reflector, 1000);
    }

    proptest! {
        #[test]
        fn counters_never_decrease(ops in prop::collection::vec((0usize..4, 0u64..50), 0..64)) {
            let ledger = QueryLedger::new();
            let mut prev = ledger.snapshot();
            for (k, n) in ops {
                ledger.charge(QueryKind::ALL[k], n);
                let snap = ledger.snapshot();
                for kind in QueryKind::ALL {
                    prop_assert!(snap.get(kind) >= prev.get(kind));
                }
                prop_assert_eq!(snap.total, QueryKind::ALL.iter().map(|k| snap.get(*k)).sum::<u64>());
                prev = snap;
            }
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

mod common;

use famtar::model::{DirLinkId, SimTime, TopologyBuilder};
use famtar::routing::{flood_cost_change, follow_next_hops, spf, LinkStateDb};
use proptest::prelude::*;

#[test]
fn spf_matches_exhaustive_search_on_200_graphs() {
    for seed in 0..200 {
        common::routing_oracle_case(seed).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn spf_matches_exhaustive_search_on_arbitrary_seeds(seed in any::<u64>()) {
        common::routing_oracle_case(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn stale_updates_never_change_the_database(cost in 1u32..100, up in any::<bool>()) {
        let mut b = TopologyBuilder::new();
        let (x, y) = (b.router("X"), b.router("Y"));
        b.link(x, y, common::params(10_000_000, 1, 10));
        let topo = b.build().unwrap();
        let mut db = LinkStateDb::from_topology(&topo);
        let d = DirLinkId(0);
        let fresh = db.originate(d, cost, up);
        let stale = db.originate(d, cost + 1, !up);
        prop_assert!(db.apply(&fresh));
        let before = db.record(d);
        let mut old = stale;
        old.version = fresh.version;
        prop_assert!(!db.apply(&old));
        prop_assert_eq!(db.record(d), before);
    }
}

#[test]
fn converged_tables_are_loop_free_after_escalation() {
    // A ring of six routers; escalating one link in one direction must not
    // create a loop once every router has the update.
    let mut b = TopologyBuilder::new();
    let r: Vec<_> = (0..6).map(|i| b.router(&format!("R{i}"))).collect();
    for i in 0..6 {
        b.link(r[i], r[(i + 1) % 6], common::params(10_000_000, 1, 100));
    }
    let topo = b.build().unwrap();
    let mut db = LinkStateDb::from_topology(&topo);
    let lsa = db.originate(DirLinkId(0), 10_000, true);
    db.apply(&lsa);
    let tables: Vec<_> = r.iter().map(|&n| spf(&db, &topo, n)).collect();
    let refs: Vec<_> = tables.iter().map(Some).collect();
    for &s in &r {
        for &t in &r {
            if s != t {
                assert!(follow_next_hops(&refs, &topo, s, t).is_some(), "{s} -> {t}");
            }
        }
    }
    let path = follow_next_hops(&refs, &topo, r[0], r[1]).unwrap();
    assert_eq!(path.len(), 6, "escalated link avoided: {path:?}");
}

#[test]
fn flooding_reaches_each_router_after_its_hop_distance() {
    let mut b = TopologyBuilder::new();
    let r: Vec<_> = (0..5).map(|i| b.router(&format!("R{i}"))).collect();
    for w in r.windows(2) {
        b.link(w[0], w[1], common::params(10_000_000, 1, 100));
    }
    let topo = b.build().unwrap();
    let got = flood_cost_change(&topo, r[2], |_| true, SimTime::from_millis(10), SimTime::from_secs(1));
    let want = vec![
        (r[1], SimTime::from_micros(1_010_000)),
        (r[3], SimTime::from_micros(1_010_000)),
        (r[0], SimTime::from_micros(1_020_000)),
        (r[4], SimTime::from_micros(1_020_000)),
    ];
    assert_eq!(got, want);
}

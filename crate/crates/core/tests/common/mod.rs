// SPDX-License-Identifier: Apache-2.0

//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use famtar::engine::{LinkFailure, RunOutput, SimConfig, Simulator};
use famtar::model::{LinkParams, NodeId, SimTime, Topology, TopologyBuilder};
use famtar::routing::LinkStateDb;
use famtar::traffic::FlowSpec;
use rand::Rng;

pub fn params(capacity_bps: u64, delay_ms: u64, queue: usize) -> LinkParams {
    LinkParams {
        capacity_bps,
        propagation_delay: SimTime::from_millis(delay_ms),
        base_cost: 10,
        queue_capacity: queue,
    }
}

pub fn run(topo: Topology, cfg: SimConfig, flows: Vec<FlowSpec>, failures: &[LinkFailure]) -> RunOutput {
    Simulator::new(topo, cfg, flows, failures).expect("valid setup").run()
}

pub fn config(duration_s: u64, famtar: bool) -> SimConfig {
    let mut cfg = SimConfig {
        duration: SimTime::from_secs(duration_s),
        window: (SimTime::ZERO, SimTime::from_secs(duration_s)),
        ..SimConfig::default()
    };
    cfg.famtar.enabled = famtar;
    cfg
}

/// `n` one-packet flows of `bytes` each, all starting at `at`.
pub fn burst(src: NodeId, dst: NodeId, n: u16, bytes: u32, at: SimTime) -> Vec<FlowSpec> {
    (0..n)
        .map(|i| {
            let mut f = FlowSpec::cbr(src, dst, 1_000_000, bytes, at);
            f.size_bytes = Some(u64::from(bytes));
            f.src_port = 10_000 + i;
            f
        })
        .collect()
}

/// Connected router-only graph on `n` nodes: a random spanning tree plus
/// random extra links, all with random costs in 1..=20.
pub fn random_router_graph<R: Rng>(rng: &mut R, n: usize) -> Topology {
    let mut b = TopologyBuilder::new();
    let ids: Vec<NodeId> = (0..n).map(|i| b.router(&format!("N{i}"))).collect();
    let mut present = std::collections::HashSet::new();
    let mut add = |b: &mut TopologyBuilder, x: usize, y: usize, rng: &mut R| {
        let key = (x.min(y), x.max(y));
        if x != y && present.insert(key) {
            let mut p = params(10_000_000, 1, 100);
            p.base_cost = rng.gen_range(1..=20);
            b.link(ids[x], ids[y], p);
        }
    };
    for v in 1..n {
        let u = rng.gen_range(0..v);
        add(&mut b, u, v, rng);
    }
    let extra = rng.gen_range(0..=n * (n - 1) / 2);
    for _ in 0..extra {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        add(&mut b, x, y, rng);
    }
    b.build().expect("connected by construction")
}

/// Minimum cost over all simple paths, by exhaustive search. Links count
/// only when both directions are up; hosts do not relay.
pub fn brute_force_cost(db: &LinkStateDb, topo: &Topology, src: NodeId, dst: NodeId) -> Option<u64> {
    fn go(
        db: &LinkStateDb,
        topo: &Topology,
        at: NodeId,
        dst: NodeId,
        seen: &mut Vec<bool>,
        cost: u64,
        best: &mut Option<u64>,
    ) {
        if at == dst {
            *best = Some(best.map_or(cost, |b| b.min(cost)));
            return;
        }
        for iface in topo.ifaces(at) {
            let fwd = db.record(iface.dir_link);
            let back = db.record(iface.dir_link.reverse());
            let v = iface.neighbor;
            if !fwd.up || !back.up || seen[v.index()] {
                continue;
            }
            if v != dst && !topo.is_router(v) {
                continue;
            }
            seen[v.index()] = true;
            go(db, topo, v, dst, seen, cost + u64::from(fwd.cost), best);
            seen[v.index()] = false;
        }
    }
    let mut seen = vec![false; topo.nodes().len()];
    seen[src.index()] = true;
    let mut best = None;
    go(db, topo, src, dst, &mut seen, 0, &mut best);
    best
}

/// One oracle case: random graph, random directed costs and failed
/// directions, then SPF from every router is compared with exhaustive search
/// and the installed next hops are followed for loops.
pub fn routing_oracle_case(seed: u64) -> Result<(), String> {
    use famtar::routing::{follow_next_hops, spf};
    use famtar::model::DirLinkId;
    let mut rng = famtar::traffic::rng_for(seed);
    let n = rng.gen_range(2..=6);
    let topo = random_router_graph(&mut rng, n);
    let mut db = LinkStateDb::from_topology(&topo);
    for d in 0..topo.dir_link_count() as u32 {
        let d = DirLinkId(d);
        let cost = rng.gen_range(1..=20);
        let up = rng.gen_bool(0.9);
        let lsa = db.originate(d, cost, up);
        db.apply(&lsa);
    }
    let tables: Vec<_> = topo.nodes().iter().map(|v| spf(&db, &topo, v.id)).collect();
    let refs: Vec<_> = tables.iter().map(Some).collect();
    for s in topo.nodes() {
        for t in topo.nodes() {
            if s.id == t.id {
                continue;
            }
            let oracle = brute_force_cost(&db, &topo, s.id, t.id);
            let got = tables[s.id.index()].get(t.id).map(|r| r.cost);
            if got != oracle {
                return Err(format!("seed {seed}: {}->{} spf {got:?} oracle {oracle:?}", s.name, t.name));
            }
            if oracle.is_some() {
                let path = follow_next_hops(&refs, &topo, s.id, t.id)
                    .ok_or_else(|| format!("seed {seed}: {}->{} next hops loop", s.name, t.name))?;
                let walked: u64 = path
                    .windows(2)
                    .map(|w| {
                        let l = topo.link_between(w[0], w[1]).unwrap();
                        let d = DirLinkId::new(l, topo.link(l).a != w[0]);
                        u64::from(db.record(d).cost)
                    })
                    .sum();
                if Some(walked) != oracle {
                    return Err(format!("seed {seed}: {}->{} walked cost {walked} vs {oracle:?}", s.name, t.name));
                }
            }
        }
    }
    Ok(())
}

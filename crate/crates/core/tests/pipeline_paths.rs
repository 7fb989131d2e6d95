// SPDX-License-Identifier: Apache-2.0

mod common;

use famtar::engine::RunOutput;
use famtar::model::{NodeId, SimTime, Topology};
use famtar::scenario::{build_parallel_paths_topology, ParallelPathsOptions};
use famtar::traffic::FlowSpec;

fn two_flows(famtar: bool) -> (Topology, RunOutput) {
    let topo = build_parallel_paths_topology(2, ParallelPathsOptions::default()).unwrap();
    let (h1, h2) = (topo.node_by_name("H1").unwrap(), topo.node_by_name("H2").unwrap());
    let mut heavy = FlowSpec::cbr(h1, h2, 9_500_000, 1000, SimTime::ZERO);
    heavy.src_port = 10_000;
    let mut late = FlowSpec::cbr(h1, h2, 1_000_000, 1000, SimTime::from_secs(3));
    late.src_port = 10_001;
    let mut cfg = common::config(6, famtar);
    cfg.trace_paths = true;
    let out = common::run(topo.clone(), cfg, vec![heavy, late], &[]);
    (topo, out)
}

fn transit_of(out: &RunOutput, topo: &Topology, flow: u32) -> Vec<String> {
    let mut names: Vec<String> = out
        .report
        .traces
        .iter()
        .filter(|t| t.flow.0 == flow)
        .filter_map(|t| t.nodes().get(1).map(|n: &NodeId| topo.node(*n).name.clone()))
        .collect();
    names.sort();
    names.dedup();
    names
}

#[test]
fn established_flow_stays_pinned_and_new_flow_avoids_congestion() {
    let (topo, out) = two_flows(true);
    assert_eq!(transit_of(&out, &topo, 0), ["R2"]);
    assert_eq!(transit_of(&out, &topo, 1), ["R3"]);
    assert!(out.report.routers.iter().any(|r| r.name == "R1" && r.escalations >= 1));
    assert!(out.report.traces.iter().all(|t| !t.loops()));
}

#[test]
fn baseline_sends_both_flows_on_the_shortest_path() {
    let (topo, out) = two_flows(false);
    assert_eq!(transit_of(&out, &topo, 0), ["R2"]);
    assert_eq!(transit_of(&out, &topo, 1), ["R2"]);
}

#[test]
fn every_delivered_packet_respects_the_propagation_lower_bound() {
    let (topo, out) = two_flows(true);
    let mut checked = 0;
    for t in &out.report.traces {
        if let famtar::metrics::Fate::Delivered { at } = t.fate {
            let nodes = t.nodes();
            // traces start at the first router; add both host links
            let h1 = topo.node_by_name("H1").unwrap();
            let mut bound = topo.link(topo.link_between(h1, nodes[0]).unwrap()).propagation_delay;
            for w in nodes.windows(2) {
                bound += topo.link(topo.link_between(w[0], w[1]).unwrap()).propagation_delay;
            }
            let last = *nodes.last().unwrap();
            bound += topo.link(topo.link_between(last, topo.node_by_name("H2").unwrap()).unwrap()).propagation_delay;
            assert!(at - t.created_at >= bound);
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

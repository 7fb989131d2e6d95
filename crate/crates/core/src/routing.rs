// SPDX-License-Identifier: Apache-2.0

//! Link-state routing beneath the flow table: a per-router database of
//! directed link costs, hop-by-hop flooding of cost changes, and shortest
//! path first computation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::io::Write;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::model::{DirLinkId, IfaceId, NodeId, SimTime, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingConfig {
    /// Flooding delay per router hop away from the originator.
    pub flood_hop_delay: SimTime,
    /// Delay between a database change and the new table being installed.
    pub spf_delay: SimTime,
    /// Escalate both directions of a link when one direction congests.
    pub symmetric_escalation: bool,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            flood_hop_delay: SimTime::from_millis(10),
            spf_delay: SimTime::from_millis(20),
            symmetric_escalation: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub cost: u32,
    pub up: bool,
    pub version: u64,
}

/// A flooded update for one directed link record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lsa {
    pub dir_link: DirLinkId,
    pub cost: u32,
    pub up: bool,
    pub version: u64,
}

/// One router's view of every directed link.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkStateDb {
    records: Vec<LinkRecord>,
}

impl LinkStateDb {
    pub fn from_topology(topo: &Topology) -> Self {
        let mut records = Vec::with_capacity(topo.dir_link_count());
        for l in topo.links() {
            let r = LinkRecord {
                cost: l.base_cost,
                up: true,
                version: 0,
            };
            records.push(r);
            records.push(r);
        }
        LinkStateDb { records }
    }

    pub fn record(&self, d: DirLinkId) -> LinkRecord {
        self.records[d.index()]
    }

    /// Builds the next update for `d` as originated by this router.
    pub fn originate(&self, d: DirLinkId, cost: u32, up: bool) -> Lsa {
        Lsa {
            dir_link: d,
            cost,
            up,
            version: self.records[d.index()].version + 1,
        }
    }

    /// Applies `lsa` if it is newer than what is stored. Returns whether the
    /// database changed.
    pub fn apply(&mut self, lsa: &Lsa) -> bool {
        let rec = &mut self.records[lsa.dir_link.index()];
        if lsa.version <= rec.version {
            return false;
        }
        *rec = LinkRecord {
            cost: lsa.cost,
            up: lsa.up,
            version: lsa.version,
        };
        true
    }

    /// A direction is usable only while both directions are reported up.
    pub fn usable(&self, d: DirLinkId) -> bool {
        self.records[d.index()].up && self.records[d.reverse().index()].up
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub iface: IfaceId,
    pub next_hop: NodeId,
    pub gateway: Ipv4Addr,
    pub cost: u64,
}

/// Next hop per destination node. Unreachable destinations have no entry.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoutingTable {
    routes: Vec<Option<Route>>,
}

impl RoutingTable {
    pub fn get(&self, dst: NodeId) -> Option<&Route> {
        self.routes.get(dst.index()).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Route)> {
        self.routes
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().map(|r| (NodeId(i as u32), r)))
    }

    pub fn dump_csv<W: Write>(
        &self,
        topo: &Topology,
        router: NodeId,
        at: SimTime,
        mut w: W,
    ) -> std::io::Result<()> {
        for (dst, r) in self.iter() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                at.as_micros(),
                topo.node(router).name,
                topo.node(dst).name,
                r.iface.0,
                topo.node(r.next_hop).name,
                r.cost
            )?;
        }
        Ok(())
    }
}

pub const ROUTE_CSV_HEADER: &str = "time_us,router,destination,iface,next_hop,cost";

/// Shortest paths from `source` over `db`.
///
/// Hosts terminate paths but never relay. Among equal-cost paths the one
/// whose first hop has the smallest node identifier wins, then the smallest
/// interface index.
pub fn spf(db: &LinkStateDb, topo: &Topology, source: NodeId) -> RoutingTable {
    let n = topo.nodes().len();
    // (first-hop node, iface) per destination, with distance
    let mut dist = vec![u64::MAX; n];
    let mut first: Vec<Option<(NodeId, IfaceId)>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0;
    heap.push(Reverse((0u64, source)));

    while let Some(Reverse((d, u))) = heap.pop() {
        if done[u.index()] {
            continue;
        }
        done[u.index()] = true;
        if u != source && !topo.is_router(u) {
            continue;
        }
        for (i, iface) in topo.ifaces(u).iter().enumerate() {
            if !db.usable(iface.dir_link) {
                continue;
            }
            let v = iface.neighbor;
            if done[v.index()] {
                continue;
            }
            let nd = d + u64::from(db.record(iface.dir_link).cost);
            let hop = if u == source {
                Some((v, IfaceId(i as u8)))
            } else {
                first[u.index()]
            };
            let better = nd < dist[v.index()] || (nd == dist[v.index()] && hop < first[v.index()]);
            if better {
                dist[v.index()] = nd;
                first[v.index()] = hop;
                heap.push(Reverse((nd, v)));
            }
        }
    }

    let routes = (0..n)
        .map(|i| {
            let (next_hop, iface) = first[i]?;
            Some(Route {
                iface,
                next_hop,
                gateway: topo.node(next_hop).addr,
                cost: dist[i],
            })
        })
        .collect();
    RoutingTable { routes }
}

/// Routers other than `origin` that receive a flooded change, with delivery
/// times. Flooding crosses router-to-router links for which `link_up` holds;
/// a router `h` hops away receives the update at `now + h * hop_delay`.
pub fn flood_cost_change(
    topo: &Topology,
    origin: NodeId,
    link_up: impl Fn(DirLinkId) -> bool,
    hop_delay: SimTime,
    now: SimTime,
) -> Vec<(NodeId, SimTime)> {
    let n = topo.nodes().len();
    let mut hops = vec![u64::MAX; n];
    hops[origin.index()] = 0;
    let mut queue = VecDeque::from([origin]);
    let mut out = Vec::new();
    while let Some(u) = queue.pop_front() {
        for iface in topo.ifaces(u) {
            let v = iface.neighbor;
            if !topo.is_router(v) || hops[v.index()] != u64::MAX || !link_up(iface.dir_link) {
                continue;
            }
            hops[v.index()] = hops[u.index()] + 1;
            out.push((v, now + SimTime::from_micros(hop_delay.as_micros() * hops[v.index()])));
            queue.push_back(v);
        }
    }
    out.sort_by_key(|&(node, t)| (t, node));
    out
}

/// Follows installed next hops from `src` towards `dst`. Returns the router
/// sequence, or `None` if a node repeats or a table lacks a route.
pub fn follow_next_hops(
    tables: &[Option<&RoutingTable>],
    topo: &Topology,
    src: NodeId,
    dst: NodeId,
) -> Option<Vec<NodeId>> {
    let mut path = vec![src];
    let mut seen = vec![false; topo.nodes().len()];
    seen[src.index()] = true;
    let mut at = src;
    while at != dst {
        let table = tables[at.index()]?;
        let hop = table.get(dst)?.next_hop;
        if seen[hop.index()] {
            return None;
        }
        seen[hop.index()] = true;
        path.push(hop);
        at = hop;
    }
    Some(path)
}

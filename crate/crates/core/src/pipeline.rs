// SPDX-License-Identifier: Apache-2.0

//! Per-router packet processing and control.
//!
//! Forwarding runs the flow-table check before the routing lookup: a packet
//! whose flow is already pinned follows the stored egress, a new flow is
//! routed by the current table and then pinned. A periodic monitor escalates
//! the routing cost of loaded links so that only new flows move away, and
//! carrier loss purges and temporarily blocks the failed interface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Fft, FftConfig, InsertOutcome};
use crate::model::{DirLinkId, FlowValue, IfaceId, NodeId, Packet, SimTime, Topology};
use crate::routing::{spf, LinkStateDb, Lsa, RoutingConfig, RoutingTable};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub period: SimTime,
    /// Phase of the first tick. All routers share it unless staggered.
    pub offset: SimTime,
    /// Load fraction at or above which a link is declared congested.
    pub congest_threshold: f64,
    /// Load fraction at or below which a congested link is cleared.
    pub clear_threshold: f64,
    pub high_cost: u32,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            period: SimTime::from_secs(1),
            offset: SimTime::ZERO,
            congest_threshold: 0.90,
            clear_threshold: 0.70,
            high_cost: 10_000,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.clear_threshold
            && self.clear_threshold < self.congest_threshold
            && self.congest_threshold <= 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 < clear ({}) < congest ({}) <= 1",
                self.clear_threshold, self.congest_threshold
            )));
        }
        if self.period == SimTime::ZERO {
            return Err(Error::Config("monitor period must be positive".into()));
        }
        if self.high_cost == 0 {
            return Err(Error::Config("high cost must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamtarConfig {
    /// Off yields plain shortest-path forwarding with no flow table.
    pub enabled: bool,
    pub monitor: MonitorConfig,
    pub fft: FftConfig,
    /// Admission block applied to an interface after carrier loss.
    pub block_duration: SimTime,
    /// TTL comparison on flow-table hits.
    pub loop_resolution: bool,
}

impl Default for FamtarConfig {
    fn default() -> Self {
        FamtarConfig {
            enabled: true,
            monitor: MonitorConfig::default(),
            fft: FftConfig::default(),
            block_duration: SimTime::from_secs(5),
            loop_resolution: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TtlExpired,
    Unreachable,
    QueueFull,
    LinkDown,
}

impl DropReason {
    pub const ALL: [DropReason; 4] = [
        DropReason::TtlExpired,
        DropReason::Unreachable,
        DropReason::QueueFull,
        DropReason::LinkDown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::TtlExpired => "ttl_expired",
            DropReason::Unreachable => "unreachable",
            DropReason::QueueFull => "queue_full",
            DropReason::LinkDown => "link_down",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Forward { iface: IfaceId, next_hop: NodeId },
    DeliverLocal,
    Drop(DropReason),
}

/// Flow-table side effect of processing one packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fft", rename_all = "snake_case")]
pub enum FftAction {
    Inserted { port: IfaceId, ttl: u8 },
    InsertBlocked { port: IfaceId },
    Rewritten { old_port: IfaceId, new_port: IfaceId, old_ttl: u8, new_ttl: u8 },
    TtlRaised { port: IfaceId, old_ttl: u8, new_ttl: u8 },
    /// A rewrite targeted a blocked interface, so the entry was dropped and
    /// the flow left to the routing table.
    Unpinned { old_port: IfaceId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub decision: Decision,
    pub action: Option<FftAction>,
}

impl Outcome {
    fn plain(decision: Decision) -> Self {
        Outcome { decision, action: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostChangeKind {
    Escalate,
    Restore,
}

/// A cost change decided by the load monitor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostAction {
    pub iface: IfaceId,
    pub kind: CostChangeKind,
    /// Measured load as a fraction of capacity.
    pub load: f64,
    pub cost: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IfaceState {
    pub dir_link: DirLinkId,
    pub neighbor: NodeId,
    pub capacity_bps: u64,
    pub base_cost: u32,
    /// Bytes that left on this interface during the current monitor window.
    pub window_bytes: u64,
    pub congested: bool,
    pub original_cost: u32,
    pub up: bool,
}

#[derive(Clone, Debug)]
pub struct RouterState {
    pub node: NodeId,
    pub fft: Fft,
    pub db: LinkStateDb,
    pub table: RoutingTable,
    pub ifaces: Vec<IfaceState>,
    pub cfg: FamtarConfig,
    pub routing: RoutingConfig,
    spf_pending: bool,
}

impl RouterState {
    /// A router with a converged view of the initial topology.
    pub fn new(topo: &Topology, node: NodeId, cfg: FamtarConfig, routing: RoutingConfig) -> Self {
        let db = LinkStateDb::from_topology(topo);
        let table = spf(&db, topo, node);
        let ifaces = topo
            .ifaces(node)
            .iter()
            .map(|i| {
                let l = topo.link(i.dir_link.link());
                IfaceState {
                    dir_link: i.dir_link,
                    neighbor: i.neighbor,
                    capacity_bps: l.capacity_bps,
                    base_cost: l.base_cost,
                    window_bytes: 0,
                    congested: false,
                    original_cost: l.base_cost,
                    up: true,
                }
            })
            .collect();
        RouterState {
            node,
            fft: Fft::new(cfg.fft),
            db,
            table,
            ifaces,
            cfg,
            routing,
            spf_pending: false,
        }
    }

    fn forward(&self, iface: IfaceId) -> Decision {
        Decision::Forward {
            iface,
            next_hop: self.ifaces[iface.index()].neighbor,
        }
    }

    /// Runs one packet through the forwarding path. `dst` is the node owning
    /// the packet's destination address, if any.
    pub fn process_packet(&mut self, pkt: &mut Packet, dst: Option<NodeId>, now: SimTime) -> Outcome {
        if dst == Some(self.node) {
            return Outcome::plain(Decision::DeliverLocal);
        }
        if pkt.ttl <= 1 {
            // no error message goes back to the sender
            pkt.ttl = 0;
            return Outcome::plain(Decision::Drop(DropReason::TtlExpired));
        }
        pkt.ttl -= 1;
        let Some(dst) = dst else {
            return Outcome::plain(Decision::Drop(DropReason::Unreachable));
        };

        if !self.cfg.enabled {
            return Outcome::plain(match self.table.get(dst) {
                Some(r) => self.forward(r.iface),
                None => Decision::Drop(DropReason::Unreachable),
            });
        }

        if let Some(entry) = self.fft.lookup(&pkt.key, now) {
            return self.resolve_loop(pkt, entry, dst, now);
        }

        let Some(route) = self.table.get(dst).copied() else {
            return Outcome::plain(Decision::Drop(DropReason::Unreachable));
        };
        let value = FlowValue {
            ts: now,
            port: route.iface,
            gateway: route.gateway,
            ttl: pkt.ttl,
        };
        let action = match self.fft.insert(pkt.key, value, now) {
            Ok(InsertOutcome::Inserted) => FftAction::Inserted {
                port: route.iface,
                ttl: pkt.ttl,
            },
            Ok(InsertOutcome::Blocked) => FftAction::InsertBlocked { port: route.iface },
            Err(e) => unreachable!("insert after missed lookup: {e}"),
        };
        Outcome {
            decision: self.forward(route.iface),
            action: Some(action),
        }
    }

    /// Handles a flow-table hit. `pkt.ttl` has already been decremented.
    ///
    /// A TTL below the stored one means the packet has been here before on
    /// this flow's path, or the path grew: the entry is re-derived from the
    /// current routing table. A higher TTL means the upstream path got
    /// shorter; the stored TTL follows it and the route stays.
    pub fn resolve_loop(&mut self, pkt: &Packet, entry: FlowValue, dst: NodeId, now: SimTime) -> Outcome {
        let key = pkt.key;
        if !self.cfg.loop_resolution || pkt.ttl == entry.ttl {
            self.fft.touch(&key, now).expect("entry found by lookup");
            return Outcome::plain(self.forward(entry.port));
        }
        if pkt.ttl > entry.ttl {
            self.fft
                .update_entry(&key, entry.port, entry.gateway, pkt.ttl, now)
                .expect("entry found by lookup");
            return Outcome {
                decision: self.forward(entry.port),
                action: Some(FftAction::TtlRaised {
                    port: entry.port,
                    old_ttl: entry.ttl,
                    new_ttl: pkt.ttl,
                }),
            };
        }
        let Some(route) = self.table.get(dst).copied() else {
            return Outcome::plain(Decision::Drop(DropReason::Unreachable));
        };
        if self.fft.is_blocked(route.iface, now) {
            self.fft.remove(&key);
            return Outcome {
                decision: self.forward(route.iface),
                action: Some(FftAction::Unpinned { old_port: entry.port }),
            };
        }
        self.fft
            .update_entry(&key, route.iface, route.gateway, pkt.ttl, now)
            .expect("entry found by lookup");
        Outcome {
            decision: self.forward(route.iface),
            action: Some(FftAction::Rewritten {
                old_port: entry.port,
                new_port: route.iface,
                old_ttl: entry.ttl,
                new_ttl: pkt.ttl,
            }),
        }
    }

    /// Counts bytes handed to the link on `iface`.
    pub fn record_departure(&mut self, iface: IfaceId, bytes: u32) {
        self.ifaces[iface.index()].window_bytes += u64::from(bytes);
    }

    fn originate(&mut self, d: DirLinkId, cost: u32, up: bool) -> Lsa {
        let lsa = self.db.originate(d, cost, up);
        self.db.apply(&lsa);
        lsa
    }

    fn originate_cost(&mut self, iface: IfaceId, cost: u32) -> Vec<Lsa> {
        let d = self.ifaces[iface.index()].dir_link;
        let mut out = vec![self.originate(d, cost, true)];
        if self.routing.symmetric_escalation {
            let up = self.db.record(d.reverse()).up;
            out.push(self.originate(d.reverse(), cost, up));
        }
        out
    }

    /// Evaluates the load of every interface over the window that just ended,
    /// resets the counters and returns the decided cost changes together with
    /// the updates to flood. The local database is already updated.
    pub fn monitor_tick(&mut self) -> (Vec<CostAction>, Vec<Lsa>) {
        let m = self.cfg.monitor;
        let mut actions = Vec::new();
        let mut lsas = Vec::new();
        for i in 0..self.ifaces.len() {
            let iface = IfaceId(i as u8);
            let st = &mut self.ifaces[i];
            let bytes = std::mem::take(&mut st.window_bytes);
            if !st.up {
                continue;
            }
            let load = (bytes * 8) as f64 / m.period.as_secs_f64() / st.capacity_bps as f64;
            if !st.congested && load >= m.congest_threshold {
                st.congested = true;
                st.original_cost = self.db.record(st.dir_link).cost;
                actions.push(CostAction {
                    iface,
                    kind: CostChangeKind::Escalate,
                    load,
                    cost: m.high_cost,
                });
                lsas.extend(self.originate_cost(iface, m.high_cost));
            } else if st.congested && load <= m.clear_threshold {
                st.congested = false;
                let cost = st.original_cost;
                actions.push(CostAction {
                    iface,
                    kind: CostChangeKind::Restore,
                    load,
                    cost,
                });
                lsas.extend(self.originate_cost(iface, cost));
            }
        }
        (actions, lsas)
    }

    /// Carrier loss on `iface`: unpin every flow using it, refuse new pins
    /// for the block duration and withdraw the link. Returns the number of
    /// purged entries and the update to flood.
    pub fn on_link_down(&mut self, iface: IfaceId, now: SimTime) -> (usize, Lsa) {
        let purged = if self.cfg.enabled {
            let n = self.fft.purge_interface(iface);
            self.fft.block_interface(iface, now, self.cfg.block_duration);
            n
        } else {
            0
        };
        let st = &mut self.ifaces[iface.index()];
        st.up = false;
        st.congested = false;
        st.window_bytes = 0;
        let (d, cost) = (st.dir_link, st.base_cost);
        (purged, self.originate(d, cost, false))
    }

    /// Carrier back on `iface`: re-advertise the link at its base cost. Any
    /// admission block runs out on its own.
    pub fn on_link_up(&mut self, iface: IfaceId) -> Lsa {
        let st = &mut self.ifaces[iface.index()];
        st.up = true;
        st.congested = false;
        st.original_cost = st.base_cost;
        st.window_bytes = 0;
        let (d, cost) = (st.dir_link, st.base_cost);
        self.originate(d, cost, true)
    }

    /// Applies a flooded update. Returns whether the database changed.
    pub fn receive_lsa(&mut self, lsa: &Lsa) -> bool {
        self.db.apply(lsa)
    }

    /// Marks an SPF run as due; returns the install time unless one is
    /// already pending, in which case that run will pick up this change.
    pub fn schedule_spf(&mut self, now: SimTime) -> Option<SimTime> {
        if self.spf_pending {
            return None;
        }
        self.spf_pending = true;
        Some(now + self.routing.spf_delay)
    }

    /// Recomputes from the current database and installs the result.
    /// Returns whether the table changed.
    pub fn install_spf(&mut self, topo: &Topology) -> bool {
        self.spf_pending = false;
        let table = spf(&self.db, topo, self.node);
        let changed = table != self.table;
        self.table = table;
        changed
    }
}

#[cfg(test)]
mod tests {
    use std::net::Ipv4Addr;

    use super::*;
    use crate::model::{FlowId, FlowKey, LinkParams, TopologyBuilder};

    /// H1 - R1 = {R2, R3} = R4 - H2; R1's interfaces: 0 -> H1, 1 -> R2, 2 -> R3.
    fn net() -> (Topology, [NodeId; 6]) {
        let mut b = TopologyBuilder::new();
        let h1 = b.host("H1");
        let r1 = b.router("R1");
        let r2 = b.router("R2");
        let r3 = b.router("R3");
        let r4 = b.router("R4");
        let h2 = b.host("H2");
        let p = LinkParams::default();
        b.link(h1, r1, p);
        b.link(r1, r2, p);
        b.link(r1, r3, p);
        b.link(r2, r4, p);
        b.link(r3, r4, p);
        b.link(r4, h2, p);
        (b.build().unwrap(), [h1, r1, r2, r3, r4, h2])
    }

    fn pkt(t: &Topology, src: NodeId, dst: NodeId, ttl: u8) -> Packet {
        Packet {
            key: FlowKey::new(t.node(src).addr, t.node(dst).addr, 1000, 2000, 17),
            flow: FlowId(0),
            size: 1000,
            payload: 1000,
            ttl,
            created_at: SimTime::ZERO,
            flow_seq: 0,
            is_first_of_flow: true,
            trace: None,
        }
    }

    fn router(t: &Topology, n: NodeId) -> RouterState {
        RouterState::new(t, n, FamtarConfig::default(), RoutingConfig::default())
    }

    fn set_cost(r: &mut RouterState, d: DirLinkId, cost: u32, t: &Topology) {
        let lsa = r.db.originate(d, cost, true);
        r.db.apply(&lsa);
        r.install_spf(t);
    }

    #[test]
    fn first_packet_pins_flow() {
        let (t, [h1, r1, r2, _, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 64);
        let out = r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        assert_eq!(out.decision, Decision::Forward { iface: IfaceId(1), next_hop: r2 });
        assert_eq!(out.action, Some(FftAction::Inserted { port: IfaceId(1), ttl: 63 }));
        let v = r.fft.lookup(&p.key, SimTime::ZERO).unwrap();
        assert_eq!((v.port, v.gateway, v.ttl), (IfaceId(1), t.node(r2).addr, 63));
    }

    #[test]
    fn pinned_flow_ignores_routing_changes() {
        let (t, [h1, r1, r2, r3, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 64);
        r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        let d = r.ifaces[1].dir_link;
        set_cost(&mut r, d, 10_000, &t);
        assert_eq!(r.table.get(h2).unwrap().next_hop, r3);

        let mut p2 = pkt(&t, h1, h2, 64);
        let out = r.process_packet(&mut p2, Some(h2), SimTime::from_millis(10));
        assert_eq!(out.decision, Decision::Forward { iface: IfaceId(1), next_hop: r2 });
        assert_eq!(out.action, None);

        // a different flow follows the new table
        let mut p3 = pkt(&t, h1, h2, 64);
        p3.key.src_port = 1001;
        let out = r.process_packet(&mut p3, Some(h2), SimTime::from_millis(10));
        assert_eq!(out.decision, Decision::Forward { iface: IfaceId(2), next_hop: r3 });
    }

    #[test]
    fn ttl_one_is_dropped_silently() {
        let (t, [h1, r1, _, _, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 1);
        let out = r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        assert_eq!(out.decision, Decision::Drop(DropReason::TtlExpired));
        assert_eq!(p.ttl, 0);
        assert!(r.fft.is_empty());
    }

    #[test]
    fn local_and_unknown_destinations() {
        let (t, [h1, r1, _, _, _, _]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, r1, 64);
        assert_eq!(r.process_packet(&mut p, Some(r1), SimTime::ZERO).decision, Decision::DeliverLocal);
        let mut p = pkt(&t, h1, r1, 64);
        p.key.dst_addr = Ipv4Addr::new(192, 0, 2, 1);
        assert_eq!(
            r.process_packet(&mut p, None, SimTime::ZERO).decision,
            Decision::Drop(DropReason::Unreachable)
        );
    }

    #[test]
    fn equal_ttl_keeps_entry() {
        let (t, [h1, r1, r2, _, _, h2]) = net();
        let mut r = router(&t, r1);
        for i in 0..5 {
            let mut p = pkt(&t, h1, h2, 64);
            let out = r.process_packet(&mut p, Some(h2), SimTime::from_millis(i));
            assert_eq!(out.decision, Decision::Forward { iface: IfaceId(1), next_hop: r2 });
            assert!(i == 0 || out.action.is_none());
        }
        assert_eq!(r.fft.lookup(&pkt(&t, h1, h2, 64).key, SimTime::from_millis(4)).unwrap().ts, SimTime::from_millis(4));
    }

    #[test]
    fn lower_ttl_rewrites_from_current_table() {
        let (t, [h1, r1, _, r3, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 64);
        r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        let d = r.ifaces[1].dir_link;
        set_cost(&mut r, d, 10_000, &t);
        // the same flow comes back two hops later
        let mut back = pkt(&t, h1, h2, 62);
        let out = r.process_packet(&mut back, Some(h2), SimTime::from_millis(5));
        assert_eq!(out.decision, Decision::Forward { iface: IfaceId(2), next_hop: r3 });
        assert_eq!(
            out.action,
            Some(FftAction::Rewritten { old_port: IfaceId(1), new_port: IfaceId(2), old_ttl: 63, new_ttl: 61 })
        );
        let v = r.fft.lookup(&p.key, SimTime::from_millis(5)).unwrap();
        assert_eq!((v.port, v.ttl, v.ts), (IfaceId(2), 61, SimTime::from_millis(5)));
    }

    #[test]
    fn higher_ttl_raises_stored_ttl_only() {
        let (t, [h1, r1, r2, _, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 60);
        r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        let d = r.ifaces[1].dir_link;
        set_cost(&mut r, d, 10_000, &t);
        let mut q = pkt(&t, h1, h2, 64);
        let out = r.process_packet(&mut q, Some(h2), SimTime::from_millis(1));
        assert_eq!(out.decision, Decision::Forward { iface: IfaceId(1), next_hop: r2 });
        assert_eq!(out.action, Some(FftAction::TtlRaised { port: IfaceId(1), old_ttl: 59, new_ttl: 63 }));
    }

    #[test]
    fn rewrite_onto_blocked_interface_unpins() {
        let (t, [h1, r1, r2, _, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 64);
        r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        // manual: the entry stays on iface 1 while iface 1 gets blocked
        r.fft.block_interface(IfaceId(1), SimTime::ZERO, SimTime::from_secs(5));
        let mut back = pkt(&t, h1, h2, 62);
        let out = r.process_packet(&mut back, Some(h2), SimTime::from_millis(1));
        assert_eq!(out.decision, Decision::Forward { iface: IfaceId(1), next_hop: r2 });
        assert_eq!(out.action, Some(FftAction::Unpinned { old_port: IfaceId(1) }));
        assert!(r.fft.is_empty());
    }

    #[test]
    fn disabled_router_routes_by_table() {
        let (t, [h1, r1, _, r3, _, h2]) = net();
        let cfg = FamtarConfig { enabled: false, ..FamtarConfig::default() };
        let mut r = RouterState::new(&t, r1, cfg, RoutingConfig::default());
        let mut p = pkt(&t, h1, h2, 64);
        r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        assert!(r.fft.is_empty());
        let d = r.ifaces[1].dir_link;
        set_cost(&mut r, d, 10_000, &t);
        let mut p = pkt(&t, h1, h2, 64);
        assert_eq!(
            r.process_packet(&mut p, Some(h2), SimTime::ZERO).decision,
            Decision::Forward { iface: IfaceId(2), next_hop: r3 }
        );
    }

    #[test]
    fn monitor_idle_issues_nothing() {
        let (t, [_, r1, ..]) = net();
        let mut r = router(&t, r1);
        let (actions, lsas) = r.monitor_tick();
        assert!(actions.is_empty() && lsas.is_empty());
    }

    #[test]
    fn monitor_escalates_then_restores_with_hysteresis() {
        let (t, [_, r1, ..]) = net();
        let mut r = router(&t, r1);
        // 9.5 Mbit/s over one second on a 10 Mbit/s link
        r.record_departure(IfaceId(1), 9_500_000 / 8);
        let (a, lsas) = r.monitor_tick();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].kind, CostChangeKind::Escalate);
        assert!((a[0].load - 0.95).abs() < 1e-12);
        assert_eq!(lsas[0].cost, 10_000);
        assert_eq!(r.db.record(r.ifaces[1].dir_link).cost, 10_000);
        assert!(r.ifaces[1].congested);
        assert_eq!(r.ifaces[1].window_bytes, 0);

        // 8 Mbit/s: between thresholds, stays congested
        r.record_departure(IfaceId(1), 1_000_000);
        assert!(r.monitor_tick().0.is_empty());

        // 6 Mbit/s: cleared
        r.record_departure(IfaceId(1), 750_000);
        let (a, lsas) = r.monitor_tick();
        assert_eq!(a[0].kind, CostChangeKind::Restore);
        assert_eq!(lsas[0].cost, 10);
        assert!(!r.ifaces[1].congested);
    }

    #[test]
    fn symmetric_escalation_updates_both_directions() {
        let (t, [_, r1, ..]) = net();
        let routing = RoutingConfig { symmetric_escalation: true, ..RoutingConfig::default() };
        let mut r = RouterState::new(&t, r1, FamtarConfig::default(), routing);
        r.record_departure(IfaceId(1), 10_000_000 / 8);
        let (_, lsas) = r.monitor_tick();
        assert_eq!(lsas.len(), 2);
        assert_eq!(lsas[1].dir_link, r.ifaces[1].dir_link.reverse());
    }

    #[test]
    fn link_down_purges_and_blocks() {
        let (t, [h1, r1, _, _, _, h2]) = net();
        let mut r = router(&t, r1);
        let mut p = pkt(&t, h1, h2, 64);
        r.process_packet(&mut p, Some(h2), SimTime::ZERO);
        let (purged, lsa) = r.on_link_down(IfaceId(1), SimTime::from_secs(10));
        assert_eq!(purged, 1);
        assert!(!lsa.up);
        assert!(r.fft.lookup(&p.key, SimTime::from_secs(10)).is_none());
        assert_eq!(r.fft.block_expiry(IfaceId(1)), Some(SimTime::from_secs(15)));

        // before SPF reinstalls, the table still points at the dead link and
        // the new pin is refused
        let mut q = pkt(&t, h1, h2, 64);
        let out = r.process_packet(&mut q, Some(h2), SimTime::from_secs(10));
        assert_eq!(out.action, Some(FftAction::InsertBlocked { port: IfaceId(1) }));
        assert!(r.fft.is_empty());

        // empty table: nothing purged, block still set
        let (purged, _) = r.on_link_down(IfaceId(2), SimTime::from_secs(11));
        assert_eq!(purged, 0);
        assert!(r.fft.is_blocked(IfaceId(2), SimTime::from_secs(12)));
    }

    #[test]
    fn link_up_does_not_lift_block() {
        let (t, [_, r1, ..]) = net();
        let mut r = router(&t, r1);
        r.on_link_down(IfaceId(1), SimTime::from_secs(10));
        let lsa = r.on_link_up(IfaceId(1));
        assert!(lsa.up && lsa.cost == 10);
        assert!(r.fft.is_blocked(IfaceId(1), SimTime::from_secs(12)));
        assert!(!r.fft.is_blocked(IfaceId(1), SimTime::from_secs(15)));
        assert!(r.fft.is_empty());
    }

    #[test]
    fn spf_scheduling_coalesces() {
        let (t, [_, r1, ..]) = net();
        let mut r = router(&t, r1);
        assert_eq!(r.schedule_spf(SimTime::ZERO), Some(SimTime::from_millis(20)));
        assert_eq!(r.schedule_spf(SimTime::from_millis(5)), None);
        assert!(!r.install_spf(&t));
        assert!(r.schedule_spf(SimTime::from_millis(30)).is_some());
    }

    #[test]
    fn thresholds_validate() {
        assert!(MonitorConfig::default().validate().is_ok());
        let bad = MonitorConfig { clear_threshold: 0.95, ..MonitorConfig::default() };
        assert!(bad.validate().is_err());
    }
}

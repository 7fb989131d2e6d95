// SPDX-License-Identifier: Apache-2.0

//! Discrete-event core.
//!
//! One global queue ordered by (time, insertion sequence) drives packet
//! generation, drop-tail output queues with serialization and propagation
//! delay, the routers' monitors, flooding and SPF installation, and carrier
//! failures. A run is a pure function of its inputs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::{EventLog, LogEvent};
use crate::metrics::{Collector, MetricsReport, RouterSummary};
use crate::model::{
    DirLinkId, FlowId, FlowKey, IfaceId, LinkId, NodeId, NodeKind, Packet, SimTime, Topology,
};
use crate::pipeline::{CostChangeKind, Decision, DropReason, FamtarConfig, RouterState};
use crate::routing::{flood_cost_change, Lsa, RoutingConfig};
use crate::traffic::{FlowSpec, UDP};

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    FlowStart { flow: FlowId },
    FlowPacket { flow: FlowId, seq: u64 },
    PacketArrival { node: NodeId, dir: DirLinkId, epoch: u64, pkt: Packet },
    TransmitComplete { dir: DirLinkId, epoch: u64 },
    MonitorTick { node: NodeId },
    LsaDelivery { node: NodeId, lsa: Lsa },
    SpfInstall { node: NodeId },
    LinkDown { link: LinkId },
    LinkUp { link: LinkId },
    ScenarioEnd,
}

#[derive(Debug)]
struct Scheduled {
    at: SimTime,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, o: &Self) -> bool {
        (self.at, self.seq) == (o.at, o.seq)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(o.at, o.seq))
    }
}

/// Min-queue of events; equal timestamps pop in insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Scheduled>>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Panics if `at` lies in the past.
    pub fn schedule(&mut self, at: SimTime, event: Event) {
        assert!(at >= self.now, "event scheduled in the past: {at} < {}", self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Scheduled { at, seq, event }));
    }

    pub fn pop(&mut self) -> Option<(SimTime, Event)> {
        let Reverse(s) = self.heap.pop()?;
        self.now = s.at;
        Some((s.at, s.event))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(s)| s.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter().map(|Reverse(s)| &s.event)
    }
}

/// Drop-tail FIFO in front of one direction of a link. The packet being
/// serialized stays at the head until its transmission completes.
#[derive(Clone, Debug)]
pub struct OutputQueue {
    queue: VecDeque<Packet>,
    capacity: usize,
    busy: bool,
}

impl OutputQueue {
    pub fn new(capacity: usize) -> Self {
        OutputQueue {
            queue: VecDeque::new(),
            capacity,
            busy: false,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Queued,
    Dropped(DropReason),
}

/// A scheduled carrier loss, optionally followed by recovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkFailure {
    pub link: LinkId,
    pub down_at: SimTime,
    pub up_at: Option<SimTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub famtar: FamtarConfig,
    pub routing: RoutingConfig,
    pub duration: SimTime,
    pub window: (SimTime, SimTime),
    /// Record the router sequence of every packet.
    pub trace_paths: bool,
    /// Keep log records in memory, not only their hash.
    pub keep_log: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            famtar: FamtarConfig::default(),
            routing: RoutingConfig::default(),
            duration: SimTime::from_secs(10),
            window: (SimTime::ZERO, SimTime::from_secs(10)),
            trace_paths: false,
            keep_log: false,
        }
    }
}

#[derive(Clone, Debug)]
enum NodeState {
    Router(Box<RouterState>),
    Host,
}

#[derive(Clone, Copy, Debug)]
struct LinkStatus {
    up: bool,
    /// Bumped on every failure; events from an older epoch are void.
    epoch: u64,
}

pub struct RunOutput {
    pub report: MetricsReport,
    pub log: EventLog,
}

pub struct Simulator {
    topo: Topology,
    cfg: SimConfig,
    flows: Vec<FlowSpec>,
    keys: Vec<FlowKey>,
    nodes: Vec<NodeState>,
    queues: Vec<OutputQueue>,
    links: Vec<LinkStatus>,
    events: EventQueue,
    metrics: Collector,
    log: EventLog,
    escalations: Vec<(u64, u64)>,
}

impl Simulator {
    pub fn new(topo: Topology, cfg: SimConfig, flows: Vec<FlowSpec>, failures: &[LinkFailure]) -> Result<Self> {
        cfg.famtar.monitor.validate()?;
        if cfg.duration == SimTime::ZERO {
            return Err(Error::Config("duration must be positive".into()));
        }
        if cfg.window.0 >= cfg.window.1 || cfg.window.1 > cfg.duration {
            return Err(Error::Config("measurement window must lie within the run".into()));
        }
        for f in &flows {
            f.validate()?;
            for n in [f.src, f.dst] {
                if n.index() >= topo.nodes().len() || topo.node(n).kind != NodeKind::Host {
                    return Err(Error::Config(format!("flow endpoint {n} is not a host")));
                }
            }
        }
        for fl in failures {
            if fl.link.index() >= topo.links().len() {
                return Err(Error::Config(format!("failure of unknown link {}", fl.link.0)));
            }
            if fl.up_at.is_some_and(|up| up <= fl.down_at) {
                return Err(Error::Config("link must come back after it fails".into()));
            }
        }

        let nodes = topo
            .nodes()
            .iter()
            .map(|n| match n.kind {
                NodeKind::Router => {
                    NodeState::Router(Box::new(RouterState::new(&topo, n.id, cfg.famtar, cfg.routing)))
                }
                NodeKind::Host => NodeState::Host,
            })
            .collect();
        let mut queues = Vec::with_capacity(topo.dir_link_count());
        for l in topo.links() {
            queues.push(OutputQueue::new(l.queue_capacity));
            queues.push(OutputQueue::new(l.queue_capacity));
        }
        let keys = flows
            .iter()
            .map(|f| FlowKey::new(topo.node(f.src).addr, topo.node(f.dst).addr, f.src_port, f.dst_port, UDP))
            .collect();

        let mut sim = Simulator {
            metrics: Collector::new(&flows, topo.dir_link_count(), cfg.duration),
            links: vec![LinkStatus { up: true, epoch: 0 }; topo.links().len()],
            escalations: vec![(0, 0); topo.nodes().len()],
            log: EventLog::new(cfg.keep_log),
            events: EventQueue::default(),
            topo,
            flows,
            keys,
            nodes,
            queues,
            cfg,
        };

        for (i, f) in sim.flows.iter().enumerate() {
            if f.start < sim.cfg.duration && f.emits(0) {
                sim.events.schedule(f.start, Event::FlowStart { flow: FlowId(i as u32) });
            }
        }
        for fl in failures {
            sim.events.schedule(fl.down_at, Event::LinkDown { link: fl.link });
            if let Some(up) = fl.up_at {
                sim.events.schedule(up, Event::LinkUp { link: fl.link });
            }
        }
        if sim.cfg.famtar.enabled {
            let first = sim.cfg.famtar.monitor.offset + sim.cfg.famtar.monitor.period;
            for n in sim.topo.nodes() {
                if n.kind == NodeKind::Router {
                    sim.events.schedule(first, Event::MonitorTick { node: n.id });
                }
            }
        }
        sim.events.schedule(sim.cfg.duration, Event::ScenarioEnd);
        Ok(sim)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn now(&self) -> SimTime {
        self.events.now()
    }

    pub fn router(&self, n: NodeId) -> Option<&RouterState> {
        match &self.nodes[n.index()] {
            NodeState::Router(r) => Some(r),
            NodeState::Host => None,
        }
    }

    pub fn queue(&self, d: DirLinkId) -> &OutputQueue {
        &self.queues[d.index()]
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn schedule(&mut self, at: SimTime, event: Event) {
        self.events.schedule(at, event);
    }

    /// Schedules a carrier loss (and optional recovery) for `link`.
    pub fn inject_link_failure(&mut self, link: LinkId, down_at: SimTime, up_at: Option<SimTime>) {
        self.events.schedule(down_at, Event::LinkDown { link });
        if let Some(up) = up_at {
            self.events.schedule(up, Event::LinkUp { link });
        }
    }

    /// Processes events up to and including `until`. Returns false once the
    /// scenario has ended.
    pub fn run_until(&mut self, until: SimTime) -> bool {
        while let Some(t) = self.events.peek_time() {
            if t > until {
                return true;
            }
            let (now, ev) = self.events.pop().expect("peeked");
            if matches!(ev, Event::ScenarioEnd) {
                return false;
            }
            self.handle(now, ev);
        }
        false
    }

    pub fn run(mut self) -> RunOutput {
        self.run_until(SimTime::MAX);
        self.finish()
    }

    fn finish(mut self) -> RunOutput {
        let now = self.cfg.duration;
        let mut in_flight = self.queues.iter().map(|q| q.len() as u64).sum::<u64>();
        in_flight += self
            .events
            .iter()
            .filter(|e| matches!(e, Event::PacketArrival { .. }))
            .count() as u64;
        let routers = self
            .nodes
            .iter_mut()
            .enumerate()
            .filter_map(|(i, n)| match n {
                NodeState::Router(r) => {
                    let entries = r.fft.len();
                    r.fft.sweep_expired(now);
                    Some(RouterSummary {
                        name: self.topo.nodes()[i].name.clone(),
                        fft_entries: entries,
                        fft_live_entries: r.fft.len(),
                        fft_logical_bytes: r.fft.logical_bytes(),
                        escalations: self.escalations[i].0,
                        restorations: self.escalations[i].1,
                    })
                }
                NodeState::Host => None,
            })
            .collect();
        let report = self.metrics.finish(
            &self.topo,
            self.cfg.duration,
            self.cfg.window,
            in_flight,
            routers,
            &self.log,
        );
        RunOutput { report, log: self.log }
    }

    fn handle(&mut self, now: SimTime, ev: Event) {
        match ev {
            Event::FlowStart { flow } => {
                self.log.push(now, LogEvent::FlowStart { flow });
                self.emit(flow, 0, now);
            }
            Event::FlowPacket { flow, seq } => self.emit(flow, seq, now),
            Event::PacketArrival { node, dir, epoch, pkt } => {
                if !self.links[dir.link().index()].up || self.links[dir.link().index()].epoch != epoch {
                    self.drop_packet(pkt, node, DropReason::LinkDown, now);
                } else {
                    self.arrive(node, pkt, now);
                }
            }
            Event::TransmitComplete { dir, epoch } => self.transmit_complete(dir, epoch, now),
            Event::MonitorTick { node } => self.monitor_tick(node, now),
            Event::LsaDelivery { node, lsa } => {
                let r = self.router_mut(node);
                if r.receive_lsa(&lsa) {
                    if let Some(at) = r.schedule_spf(now) {
                        self.events.schedule(at, Event::SpfInstall { node });
                    }
                }
            }
            Event::SpfInstall { node } => {
                let topo = &self.topo;
                let NodeState::Router(r) = &mut self.nodes[node.index()] else {
                    unreachable!("SPF on a host")
                };
                if r.install_spf(topo) {
                    self.log.push(now, LogEvent::RouteInstall { node });
                }
            }
            Event::LinkDown { link } => self.link_down(link, now),
            Event::LinkUp { link } => self.link_up(link, now),
            Event::ScenarioEnd => {}
        }
    }

    fn router_mut(&mut self, n: NodeId) -> &mut RouterState {
        match &mut self.nodes[n.index()] {
            NodeState::Router(r) => r,
            NodeState::Host => panic!("{n} is not a router"),
        }
    }

    fn emit(&mut self, flow: FlowId, seq: u64, now: SimTime) {
        let f = &self.flows[flow.index()];
        let pkt = Packet {
            key: self.keys[flow.index()],
            flow,
            size: f.wire_size(),
            payload: f.payload_size,
            ttl: f.ttl_initial,
            created_at: now,
            flow_seq: seq,
            is_first_of_flow: seq == 0,
            trace: self.cfg.trace_paths.then(Vec::new),
        };
        let src = f.src;
        let next = seq + 1;
        if f.emits(next) {
            let at = f.emission_time(next);
            if at < self.cfg.duration {
                self.events.schedule(at, Event::FlowPacket { flow, seq: next });
            }
        }
        self.metrics.generated(&pkt);
        // hosts have a single default route
        let dir = self.topo.ifaces(src)[0].dir_link;
        self.enqueue_for_transmit(dir, pkt, now);
    }

    fn arrive(&mut self, node: NodeId, mut pkt: Packet, now: SimTime) {
        let dst = self.topo.node_by_addr(pkt.key.dst_addr);
        let NodeState::Router(r) = &mut self.nodes[node.index()] else {
            if dst == Some(node) {
                self.metrics.delivered(pkt, now);
            } else {
                self.drop_packet(pkt, node, DropReason::Unreachable, now);
            }
            return;
        };
        pkt.visit(node, now);
        let out = r.process_packet(&mut pkt, dst, now);
        if let Some(action) = out.action {
            self.log.push(
                now,
                LogEvent::Fft {
                    node,
                    flow: pkt.flow,
                    seq: pkt.flow_seq,
                    action,
                },
            );
        }
        match out.decision {
            Decision::DeliverLocal => self.metrics.delivered(pkt, now),
            Decision::Drop(reason) => self.drop_packet(pkt, node, reason, now),
            Decision::Forward { iface, .. } => {
                let dir = self.topo.iface(node, iface).dir_link;
                self.enqueue_for_transmit(dir, pkt, now);
            }
        }
    }

    /// Drop-tail admission onto the output queue of `dir`. A refused packet
    /// is accounted as dropped at the transmitting node.
    pub fn enqueue_for_transmit(&mut self, dir: DirLinkId, pkt: Packet, now: SimTime) -> EnqueueOutcome {
        let q = &mut self.queues[dir.index()];
        let reason = if !self.links[dir.link().index()].up {
            DropReason::LinkDown
        } else if q.queue.len() >= q.capacity {
            DropReason::QueueFull
        } else {
            q.queue.push_back(pkt);
            if !q.busy {
                self.start_transmission(dir, now);
            }
            return EnqueueOutcome::Queued;
        };
        let (from, _) = self.topo.endpoints(dir);
        self.drop_packet(pkt, from, reason, now);
        EnqueueOutcome::Dropped(reason)
    }

    fn start_transmission(&mut self, dir: DirLinkId, now: SimTime) {
        let q = &mut self.queues[dir.index()];
        let Some(head) = q.queue.front() else {
            q.busy = false;
            return;
        };
        q.busy = true;
        let l = self.topo.link(dir.link());
        let done = now + SimTime::serialization(head.size, l.capacity_bps);
        let epoch = self.links[dir.link().index()].epoch;
        self.events.schedule(done, Event::TransmitComplete { dir, epoch });
    }

    fn transmit_complete(&mut self, dir: DirLinkId, epoch: u64, now: SimTime) {
        if self.links[dir.link().index()].epoch != epoch {
            return;
        }
        let pkt = self.queues[dir.index()]
            .queue
            .pop_front()
            .expect("transmission without a packet");
        let (from, to) = self.topo.endpoints(dir);
        self.metrics.departed(dir, pkt.size, now);
        if let NodeState::Router(r) = &mut self.nodes[from.index()] {
            let iface = self.topo.iface_for(from, dir).expect("interface of own link");
            r.record_departure(iface, pkt.size);
        }
        let prop = self.topo.link(dir.link()).propagation_delay;
        self.events.schedule(
            now + prop,
            Event::PacketArrival {
                node: to,
                dir,
                epoch,
                pkt,
            },
        );
        self.start_transmission(dir, now);
    }

    fn drop_packet(&mut self, pkt: Packet, node: NodeId, reason: DropReason, now: SimTime) {
        self.log.push(
            now,
            LogEvent::Drop {
                node,
                flow: pkt.flow,
                seq: pkt.flow_seq,
                reason,
            },
        );
        self.metrics.dropped(pkt, reason, now);
    }

    fn monitor_tick(&mut self, node: NodeId, now: SimTime) {
        let period = self.cfg.famtar.monitor.period;
        let next = now + period;
        if next < self.cfg.duration {
            self.events.schedule(next, Event::MonitorTick { node });
        }
        let (actions, lsas) = self.router_mut(node).monitor_tick();
        for a in &actions {
            let dir = self.topo.iface(node, a.iface).dir_link;
            match a.kind {
                CostChangeKind::Escalate => {
                    self.escalations[node.index()].0 += 1;
                    self.metrics.congestion_started(dir, now);
                }
                CostChangeKind::Restore => {
                    self.escalations[node.index()].1 += 1;
                    self.metrics.congestion_cleared(dir, now);
                }
            }
            self.log.push(
                now,
                LogEvent::Cost {
                    node,
                    iface: a.iface,
                    kind: a.kind,
                    load: a.load,
                    cost: a.cost,
                },
            );
        }
        if !lsas.is_empty() {
            self.flood(node, &lsas, now);
        }
    }

    /// Origin has already applied `lsas`; schedule its SPF and deliveries to
    /// every other reachable router.
    fn flood(&mut self, origin: NodeId, lsas: &[Lsa], now: SimTime) {
        if let Some(at) = self.router_mut(origin).schedule_spf(now) {
            self.events.schedule(at, Event::SpfInstall { node: origin });
        }
        let links = &self.links;
        let targets = flood_cost_change(
            &self.topo,
            origin,
            |d| links[d.link().index()].up,
            self.cfg.routing.flood_hop_delay,
            now,
        );
        for (node, at) in targets {
            for lsa in lsas {
                self.events.schedule(at, Event::LsaDelivery { node, lsa: *lsa });
            }
        }
    }

    fn endpoint_ifaces(&self, link: LinkId) -> [(NodeId, IfaceId); 2] {
        let l = self.topo.link(link);
        let a = self.topo.iface_for(l.a, DirLinkId::new(link, false)).expect("a side");
        let b = self.topo.iface_for(l.b, DirLinkId::new(link, true)).expect("b side");
        [(l.a, a), (l.b, b)]
    }

    fn link_down(&mut self, link: LinkId, now: SimTime) {
        let st = &mut self.links[link.index()];
        if !st.up {
            return;
        }
        st.up = false;
        st.epoch += 1;
        self.log.push(now, LogEvent::LinkDown { link });
        for (node, iface) in self.endpoint_ifaces(link) {
            let dir = self.topo.iface(node, iface).dir_link;
            let q = &mut self.queues[dir.index()];
            q.busy = false;
            let lost: Vec<Packet> = q.queue.drain(..).collect();
            for pkt in lost {
                self.drop_packet(pkt, node, DropReason::LinkDown, now);
            }
        }
        // carrier loss is seen at both ends at once
        for (node, iface) in self.endpoint_ifaces(link) {
            if !self.topo.is_router(node) {
                continue;
            }
            let enabled = self.cfg.famtar.enabled;
            let block = self.cfg.famtar.block_duration;
            let (purged, lsa) = self.router_mut(node).on_link_down(iface, now);
            if enabled {
                self.log.push(now, LogEvent::Purge { node, iface, count: purged });
                self.log.push(now, LogEvent::Block { node, iface, until: now + block });
            }
            self.flood(node, &[lsa], now);
        }
    }

    fn link_up(&mut self, link: LinkId, now: SimTime) {
        let st = &mut self.links[link.index()];
        if st.up {
            return;
        }
        st.up = true;
        self.log.push(now, LogEvent::LinkUp { link });
        for (node, iface) in self.endpoint_ifaces(link) {
            if !self.topo.is_router(node) {
                continue;
            }
            let lsa = self.router_mut(node).on_link_up(iface);
            self.flood(node, &[lsa], now);
        }
    }
}

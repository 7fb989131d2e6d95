// SPDX-License-Identifier: Apache-2.0

//! Measurement: per-flow counters and one-second time series, link
//! utilization, congestion intervals and windowed queries over a finished
//! run.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log::EventLog;
use crate::model::{DirLinkId, FlowId, Hop, NodeId, Packet, SimTime, Topology};
use crate::pipeline::DropReason;
use crate::traffic::{FlowKind, FlowSpec};

/// Counters for one whole second.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecondStats {
    /// Packets generated, bucketed by creation time.
    pub sent: u64,
    pub sent_bytes: u64,
    /// Packets delivered, bucketed by delivery time.
    pub received: u64,
    /// Application bytes delivered.
    pub received_bytes: u64,
    /// Packets dropped, bucketed by drop time.
    pub lost: u64,
    pub delay_sum_us: u64,
    pub delay_min_us: u64,
    pub delay_max_us: u64,
}

impl SecondStats {
    fn add_delay(&mut self, us: u64) {
        if self.received == 0 || us < self.delay_min_us {
            self.delay_min_us = us;
        }
        self.delay_max_us = self.delay_max_us.max(us);
        self.delay_sum_us += us;
        self.received += 1;
    }

    pub fn merge(&mut self, o: &SecondStats) {
        if o.received > 0 && (self.received == 0 || o.delay_min_us < self.delay_min_us) {
            self.delay_min_us = o.delay_min_us;
        }
        self.delay_max_us = self.delay_max_us.max(o.delay_max_us);
        self.sent += o.sent;
        self.sent_bytes += o.sent_bytes;
        self.received += o.received;
        self.received_bytes += o.received_bytes;
        self.lost += o.lost;
        self.delay_sum_us += o.delay_sum_us;
    }

    pub fn delay_avg_us(&self) -> Option<f64> {
        (self.received > 0).then(|| self.delay_sum_us as f64 / self.received as f64)
    }

    /// Application bitrate in bit/s.
    pub fn bitrate_bps(&self) -> f64 {
        self.received_bytes as f64 * 8.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub id: FlowId,
    pub kind: FlowKind,
    pub src_port: u16,
    pub start: SimTime,
    pub sent: u64,
    pub received: u64,
    pub received_bytes: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub delay_min_us: Option<u64>,
    pub delay_avg_us: Option<f64>,
    pub delay_max_us: Option<u64>,
    pub series: Vec<SecondStats>,
}

impl FlowReport {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub from: SimTime,
    /// `None` while still open at the end of the run.
    pub to: Option<SimTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub dir_link: DirLinkId,
    pub from: String,
    pub to: String,
    pub capacity_bps: u64,
    /// Fraction of capacity used per second.
    pub utilization: Vec<f64>,
    pub congested: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum Fate {
    Delivered { at: SimTime },
    Dropped { at: SimTime, reason: DropReason },
}

/// Router sequence followed by one packet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketTrace {
    pub flow: FlowId,
    pub seq: u64,
    pub created_at: SimTime,
    pub path: Vec<Hop>,
    pub fate: Fate,
}

impl PacketTrace {
    pub fn nodes(&self) -> Vec<NodeId> {
        self.path.iter().map(|h| h.node).collect()
    }

    /// Whether some router appears more than once.
    pub fn loops(&self) -> bool {
        let mut seen: Vec<NodeId> = self.nodes();
        seen.sort();
        seen.windows(2).any(|w| w[0] == w[1])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub in_flight_at_end: u64,
}

impl Totals {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    /// generated = delivered + dropped + in flight.
    pub fn conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped_total() + self.in_flight_at_end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterSummary {
    pub name: String,
    pub fft_entries: usize,
    pub fft_live_entries: usize,
    pub fft_logical_bytes: usize,
    pub escalations: u64,
    pub restorations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub duration: SimTime,
    pub window: (SimTime, SimTime),
    pub totals: Totals,
    pub flows: Vec<FlowReport>,
    pub links: Vec<LinkReport>,
    pub routers: Vec<RouterSummary>,
    pub traces: Vec<PacketTrace>,
    pub event_count: u64,
    pub event_log_sha256: String,
}

/// Which flows a query aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowSelector {
    All,
    Kind(FlowKind),
    Flow(FlowId),
}

impl FlowSelector {
    fn matches(&self, f: &FlowReport) -> bool {
        match *self {
            FlowSelector::All => true,
            FlowSelector::Kind(k) => f.kind == k,
            FlowSelector::Flow(id) => f.id == id,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub from: SimTime,
    pub to: SimTime,
    pub flows: FlowSelector,
}

impl Query {
    pub fn window(report: &MetricsReport, flows: FlowSelector) -> Self {
        Query {
            from: report.window.0,
            to: report.window.1,
            flows,
        }
    }
}

/// Aggregate over the whole seconds in `[from, to)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub sent: u64,
    pub received: u64,
    pub received_bytes: u64,
    pub lost: u64,
    pub drop_ratio: f64,
    pub delay_min_us: Option<u64>,
    pub delay_avg_us: Option<f64>,
    pub delay_max_us: Option<u64>,
    /// One entry per second, starting at `from`.
    pub series: Vec<SecondStats>,
}

impl MetricsReport {
    /// Windowed aggregation. Bounds are truncated to whole seconds.
    pub fn collect(&self, q: Query) -> Result<WindowSummary> {
        if q.from >= q.to || q.to > self.duration {
            return Err(Error::Query(format!(
                "[{}, {}) not within run of {}",
                q.from, q.to, self.duration
            )));
        }
        let (s0, s1) = (q.from.whole_secs() as usize, q.to.as_micros().div_ceil(1_000_000) as usize);
        let mut series = vec![SecondStats::default(); s1 - s0];
        for f in self.flows.iter().filter(|f| q.flows.matches(f)) {
            for (slot, s) in series.iter_mut().zip(f.series.iter().skip(s0)) {
                slot.merge(s);
            }
        }
        let mut total = SecondStats::default();
        for s in &series {
            total.merge(s);
        }
        Ok(WindowSummary {
            sent: total.sent,
            received: total.received,
            received_bytes: total.received_bytes,
            lost: total.lost,
            drop_ratio: if total.sent == 0 {
                0.0
            } else {
                total.lost as f64 / total.sent as f64
            },
            delay_min_us: (total.received > 0).then_some(total.delay_min_us),
            delay_avg_us: total.delay_avg_us(),
            delay_max_us: (total.received > 0).then_some(total.delay_max_us),
            series,
        })
    }

    pub fn flow(&self, id: FlowId) -> &FlowReport {
        &self.flows[id.index()]
    }

    pub fn link(&self, from: &str, to: &str) -> Option<&LinkReport> {
        self.links.iter().find(|l| l.from == from && l.to == to)
    }

    /// One row per second per flow, plus `all` aggregate rows.
    pub fn write_flow_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{FLOW_CSV_HEADER}")?;
        let seconds = self.flows.first().map_or(0, |f| f.series.len());
        let mut all = vec![SecondStats::default(); seconds];
        for f in &self.flows {
            for (s, st) in f.series.iter().enumerate() {
                all[s].merge(st);
                write_row(&mut w, s, &f.id.0.to_string(), f.kind.as_str(), st)?;
            }
        }
        for (s, st) in all.iter().enumerate() {
            write_row(&mut w, s, "all", "all", st)?;
        }
        Ok(())
    }

    pub fn write_link_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{LINK_CSV_HEADER}")?;
        for l in &self.links {
            for (s, u) in l.utilization.iter().enumerate() {
                let t = SimTime::from_secs(s as u64);
                let congested = l
                    .congested
                    .iter()
                    .any(|i| i.from <= t && i.to.is_none_or(|to| t < to));
                writeln!(w, "{},{},{},{:.6},{}", s, l.from, l.to, u, congested as u8)?;
            }
        }
        Ok(())
    }
}

pub const FLOW_CSV_HEADER: &str =
    "second,flow,kind,sent,received,received_bytes,lost,delay_avg_us,delay_min_us,delay_max_us";
pub const LINK_CSV_HEADER: &str = "second,from,to,utilization,congested";

fn write_row<W: Write>(w: &mut W, s: usize, flow: &str, kind: &str, st: &SecondStats) -> std::io::Result<()> {
    let avg = st.delay_avg_us().map_or(String::new(), |a| format!("{a:.1}"));
    let (min, max) = if st.received > 0 {
        (st.delay_min_us.to_string(), st.delay_max_us.to_string())
    } else {
        (String::new(), String::new())
    };
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{}",
        s, flow, kind, st.sent, st.received, st.received_bytes, st.lost, avg, min, max
    )
}

#[derive(Clone, Debug)]
struct FlowAcc {
    kind: FlowKind,
    src_port: u16,
    start: SimTime,
    sent: u64,
    received: u64,
    received_bytes: u64,
    dropped: BTreeMap<DropReason, u64>,
    delay: SecondStats,
    series: Vec<SecondStats>,
}

/// Accumulates measurements while the engine runs.
#[derive(Clone, Debug)]
pub struct Collector {
    seconds: usize,
    flows: Vec<FlowAcc>,
    link_bytes: Vec<Vec<u64>>,
    congested: Vec<Vec<Interval>>,
    totals: Totals,
    traces: Vec<PacketTrace>,
}

impl Collector {
    pub fn new(flows: &[FlowSpec], dir_links: usize, duration: SimTime) -> Self {
        let seconds = duration.as_micros().div_ceil(1_000_000) as usize;
        Collector {
            seconds,
            flows: flows
                .iter()
                .map(|f| FlowAcc {
                    kind: f.kind,
                    src_port: f.src_port,
                    start: f.start,
                    sent: 0,
                    received: 0,
                    received_bytes: 0,
                    dropped: BTreeMap::new(),
                    delay: SecondStats::default(),
                    series: vec![SecondStats::default(); seconds],
                })
                .collect(),
            link_bytes: vec![vec![0; seconds]; dir_links],
            congested: vec![Vec::new(); dir_links],
            totals: Totals::default(),
            traces: Vec::new(),
        }
    }

    fn slot(&self, t: SimTime) -> usize {
        (t.whole_secs() as usize).min(self.seconds.saturating_sub(1))
    }

    pub fn generated(&mut self, pkt: &Packet) {
        let s = self.slot(pkt.created_at);
        let f = &mut self.flows[pkt.flow.index()];
        f.sent += 1;
        f.series[s].sent += 1;
        f.series[s].sent_bytes += u64::from(pkt.payload);
        self.totals.generated += 1;
    }

    pub fn delivered(&mut self, pkt: Packet, now: SimTime) {
        let s = self.slot(now);
        let us = (now - pkt.created_at).as_micros();
        let f = &mut self.flows[pkt.flow.index()];
        f.received += 1;
        f.received_bytes += u64::from(pkt.payload);
        f.delay.add_delay(us);
        f.series[s].add_delay(us);
        f.series[s].received_bytes += u64::from(pkt.payload);
        self.totals.delivered += 1;
        self.trace(pkt, Fate::Delivered { at: now });
    }

    pub fn dropped(&mut self, pkt: Packet, reason: DropReason, now: SimTime) {
        let s = self.slot(now);
        let f = &mut self.flows[pkt.flow.index()];
        *f.dropped.entry(reason).or_default() += 1;
        f.series[s].lost += 1;
        *self.totals.dropped.entry(reason).or_default() += 1;
        self.trace(pkt, Fate::Dropped { at: now, reason });
    }

    fn trace(&mut self, pkt: Packet, fate: Fate) {
        if let Some(path) = pkt.trace {
            self.traces.push(PacketTrace {
                flow: pkt.flow,
                seq: pkt.flow_seq,
                created_at: pkt.created_at,
                path,
                fate,
            });
        }
    }

    pub fn departed(&mut self, d: DirLinkId, bytes: u32, now: SimTime) {
        let s = self.slot(now);
        self.link_bytes[d.index()][s] += u64::from(bytes);
    }

    pub fn congestion_started(&mut self, d: DirLinkId, now: SimTime) {
        self.congested[d.index()].push(Interval { from: now, to: None });
    }

    pub fn congestion_cleared(&mut self, d: DirLinkId, now: SimTime) {
        if let Some(last) = self.congested[d.index()].last_mut() {
            if last.to.is_none() {
                last.to = Some(now);
            }
        }
    }

    pub fn finish(
        self,
        topo: &Topology,
        duration: SimTime,
        window: (SimTime, SimTime),
        in_flight: u64,
        routers: Vec<RouterSummary>,
        log: &EventLog,
    ) -> MetricsReport {
        let mut totals = self.totals;
        totals.in_flight_at_end = in_flight;
        let flows = self
            .flows
            .into_iter()
            .enumerate()
            .map(|(i, f)| FlowReport {
                id: FlowId(i as u32),
                kind: f.kind,
                src_port: f.src_port,
                start: f.start,
                sent: f.sent,
                received: f.received,
                received_bytes: f.received_bytes,
                dropped: f.dropped,
                delay_min_us: (f.received > 0).then_some(f.delay.delay_min_us),
                delay_avg_us: f.delay.delay_avg_us(),
                delay_max_us: (f.received > 0).then_some(f.delay.delay_max_us),
                series: f.series,
            })
            .collect();
        let links = self
            .link_bytes
            .into_iter()
            .zip(self.congested)
            .enumerate()
            .map(|(i, (bytes, congested))| {
                let d = DirLinkId(i as u32);
                let (a, b) = topo.endpoints(d);
                let cap = topo.link(d.link()).capacity_bps;
                LinkReport {
                    dir_link: d,
                    from: topo.node(a).name.clone(),
                    to: topo.node(b).name.clone(),
                    capacity_bps: cap,
                    utilization: bytes.iter().map(|&b| (b * 8) as f64 / cap as f64).collect(),
                    congested,
                }
            })
            .collect();
        MetricsReport {
            duration,
            window,
            totals,
            flows,
            links,
            routers,
            traces: self.traces,
            event_count: log.count(),
            event_log_sha256: log.digest_hex(),
        }
    }
}

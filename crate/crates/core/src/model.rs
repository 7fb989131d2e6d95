// SPDX-License-Identifier: Apache-2.0

//! Shared domain types: time, flow identity, packets and the network graph.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulation time in whole microseconds since the start of a run.
///
/// Also used for durations; the distinction never mattered enough to justify
/// a second type.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    /// Index of the whole second containing this instant.
    pub const fn whole_secs(self) -> u64 {
        self.0 / 1_000_000
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn checked_sub(self, rhs: SimTime) -> Option<SimTime> {
        self.0.checked_sub(rhs.0).map(SimTime)
    }

    pub fn saturating_add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }

    /// Time needed to push `bytes` onto a link running at `capacity_bps`,
    /// rounded up to the next microsecond.
    pub fn serialization(bytes: u32, capacity_bps: u64) -> SimTime {
        let bits = u128::from(bytes) * 8 * 1_000_000;
        let cap = u128::from(capacity_bps.max(1));
        SimTime(bits.div_ceil(cap) as u64)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Bytes of key plus value stored per flow, following the packed on-router
/// layout (13 B key, 10 B value).
pub const FLOW_ENTRY_BYTES: usize = FlowKey::LOGICAL_BYTES + FlowValue::LOGICAL_BYTES;

/// Logical memory needed for one flow table entry.
pub const fn flow_entry_footprint() -> usize {
    FLOW_ENTRY_BYTES
}

/// Logical memory needed to hold `flows` simultaneous flow entries.
pub const fn flow_table_footprint(flows: usize) -> usize {
    flows * FLOW_ENTRY_BYTES
}

/// The transport 5-tuple identifying a flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_addr: Ipv4Addr,
    pub dst_addr: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub ip_prot: u8,
}

impl FlowKey {
    pub const LOGICAL_BYTES: usize = 13;

    pub const fn new(
        src_addr: Ipv4Addr,
        dst_addr: Ipv4Addr,
        src_port: u16,
        dst_port: u16,
        ip_prot: u8,
    ) -> Self {
        FlowKey {
            src_addr,
            dst_addr,
            src_port,
            dst_port,
            ip_prot,
        }
    }

    /// Builds a key from untyped integers, rejecting values that do not fit
    /// the field widths.
    pub fn from_fields(
        src_addr: u64,
        dst_addr: u64,
        src_port: u64,
        dst_port: u64,
        ip_prot: u64,
    ) -> Result<Self> {
        fn narrow<T: TryFrom<u64>>(field: &'static str, v: u64) -> Result<T> {
            T::try_from(v).map_err(|_| Error::FieldRange { field, value: v })
        }
        Ok(FlowKey {
            src_addr: Ipv4Addr::from(narrow::<u32>("src_addr", src_addr)?),
            dst_addr: Ipv4Addr::from(narrow::<u32>("dst_addr", dst_addr)?),
            src_port: narrow("src_port", src_port)?,
            dst_port: narrow("dst_port", dst_port)?,
            ip_prot: narrow("ip_prot", ip_prot)?,
        })
    }

    /// Packed network-order encoding.
    pub fn to_bytes(&self) -> [u8; Self::LOGICAL_BYTES] {
        let mut out = [0u8; Self::LOGICAL_BYTES];
        out[0..4].copy_from_slice(&self.src_addr.octets());
        out[4..8].copy_from_slice(&self.dst_addr.octets());
        out[8..10].copy_from_slice(&self.src_port.to_be_bytes());
        out[10..12].copy_from_slice(&self.dst_port.to_be_bytes());
        out[12] = self.ip_prot;
        out
    }

    pub fn from_bytes(b: &[u8; Self::LOGICAL_BYTES]) -> Self {
        FlowKey {
            src_addr: Ipv4Addr::new(b[0], b[1], b[2], b[3]),
            dst_addr: Ipv4Addr::new(b[4], b[5], b[6], b[7]),
            src_port: u16::from_be_bytes([b[8], b[9]]),
            dst_port: u16::from_be_bytes([b[10], b[11]]),
            ip_prot: b[12],
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}/{}",
            self.src_addr, self.src_port, self.dst_addr, self.dst_port, self.ip_prot
        )
    }
}

/// Index of an interface on a node. At most 256 interfaces per node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IfaceId(pub u8);

impl IfaceId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

/// Per-flow record kept by a router.
///
/// `ts` holds full-resolution simulation time; the 32-bit width of the packed
/// layout only shows up in [`FlowValue::LOGICAL_BYTES`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowValue {
    /// Time of the last packet seen for this flow.
    pub ts: SimTime,
    /// Egress interface.
    pub port: IfaceId,
    /// Next-hop address.
    pub gateway: Ipv4Addr,
    /// TTL of the flow's first packet here, after decrement.
    pub ttl: u8,
}

impl FlowValue {
    pub const LOGICAL_BYTES: usize = 10;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl LinkId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

/// One direction of a bidirectional link: `link * 2` runs a→b, `link * 2 + 1`
/// runs b→a.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirLinkId(pub u32);

impl DirLinkId {
    pub const fn new(link: LinkId, reverse: bool) -> Self {
        DirLinkId(link.0 * 2 + reverse as u32)
    }

    pub const fn link(self) -> LinkId {
        LinkId(self.0 / 2)
    }

    pub const fn is_reverse(self) -> bool {
        self.0 % 2 == 1
    }

    pub const fn reverse(self) -> DirLinkId {
        DirLinkId(self.0 ^ 1)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a generated flow within one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u32);

impl FlowId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

/// A router visit recorded in a packet's path trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub node: NodeId,
    pub at: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub key: FlowKey,
    pub flow: FlowId,
    /// Bytes on the wire, headers included.
    pub size: u32,
    /// Application bytes, used for bitrate accounting.
    pub payload: u32,
    pub ttl: u8,
    pub created_at: SimTime,
    pub flow_seq: u64,
    /// Set by generators for diagnostics; the forwarding path ignores it.
    pub is_first_of_flow: bool,
    /// Present only when the run records path traces.
    pub trace: Option<Vec<Hop>>,
}

impl Packet {
    pub fn visit(&mut self, node: NodeId, at: SimTime) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(Hop { node, at });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Router,
    Host,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub addr: Ipv4Addr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub capacity_bps: u64,
    pub propagation_delay: SimTime,
    pub base_cost: u32,
    pub queue_capacity: usize,
}

/// Attachment of a directed link to the node it leaves from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interface {
    pub dir_link: DirLinkId,
    pub neighbor: NodeId,
}

/// Parameters for a link added through [`TopologyBuilder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkParams {
    pub capacity_bps: u64,
    pub propagation_delay: SimTime,
    pub base_cost: u32,
    pub queue_capacity: usize,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            capacity_bps: 10_000_000,
            propagation_delay: SimTime::from_millis(1),
            base_cost: 10,
            queue_capacity: 100,
        }
    }
}

/// Validated, immutable network graph.
#[derive(Clone, Debug)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    ifaces: Vec<Vec<Interface>>,
    by_addr: HashMap<Ipv4Addr, NodeId>,
}

/// Address handed to the node with the given index.
pub fn node_address(id: NodeId) -> Ipv4Addr {
    let i = id.0 + 1;
    Ipv4Addr::new(10, (i >> 16) as u8, (i >> 8) as u8, i as u8)
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Topology("no nodes".into()));
        }
        let mut by_addr = HashMap::new();
        let mut names = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.id.index() != i {
                return Err(Error::Topology(format!("node {} out of order", n.name)));
            }
            if names.insert(n.name.clone(), n.id).is_some() {
                return Err(Error::Topology(format!("duplicate node name {}", n.name)));
            }
            if by_addr.insert(n.addr, n.id).is_some() {
                return Err(Error::Topology(format!("duplicate address {}", n.addr)));
            }
        }
        let mut ifaces = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            if l.id.index() != i {
                return Err(Error::Topology(format!("link {} out of order", l.id.0)));
            }
            if l.a.index() >= nodes.len() || l.b.index() >= nodes.len() {
                return Err(Error::Topology(format!("link {} has unknown endpoint", i)));
            }
            if l.a == l.b {
                return Err(Error::Topology(format!("link {} is a self-loop", i)));
            }
            if l.capacity_bps == 0 || l.base_cost == 0 || l.queue_capacity == 0 {
                return Err(Error::Topology(format!(
                    "link {}-{} needs positive capacity, cost and queue",
                    nodes[l.a.index()].name,
                    nodes[l.b.index()].name
                )));
            }
            ifaces[l.a.index()].push(Interface {
                dir_link: DirLinkId::new(l.id, false),
                neighbor: l.b,
            });
            ifaces[l.b.index()].push(Interface {
                dir_link: DirLinkId::new(l.id, true),
                neighbor: l.a,
            });
        }
        for (n, list) in nodes.iter().zip(&ifaces) {
            if list.len() > 256 {
                return Err(Error::Topology(format!("{} has more than 256 interfaces", n.name)));
            }
            if n.kind == NodeKind::Host && list.len() != 1 {
                return Err(Error::Topology(format!(
                    "host {} must have exactly one link",
                    n.name
                )));
            }
        }
        let topo = Topology {
            nodes,
            links,
            ifaces,
            by_addr,
        };
        if !topo.is_connected() {
            return Err(Error::Topology("graph is not connected".into()));
        }
        Ok(topo)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([NodeId(0)]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for i in &self.ifaces[n.index()] {
                if !seen[i.neighbor.index()] {
                    seen[i.neighbor.index()] = true;
                    queue.push_back(i.neighbor);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn dir_link_count(&self) -> usize {
        self.links.len() * 2
    }

    /// `(from, to)` of a directed link.
    pub fn endpoints(&self, d: DirLinkId) -> (NodeId, NodeId) {
        let l = self.link(d.link());
        if d.is_reverse() {
            (l.b, l.a)
        } else {
            (l.a, l.b)
        }
    }

    pub fn ifaces(&self, node: NodeId) -> &[Interface] {
        &self.ifaces[node.index()]
    }

    pub fn iface(&self, node: NodeId, iface: IfaceId) -> &Interface {
        &self.ifaces[node.index()][iface.index()]
    }

    /// Interface of `node` transmitting onto `d`.
    pub fn iface_for(&self, node: NodeId, d: DirLinkId) -> Option<IfaceId> {
        self.ifaces[node.index()]
            .iter()
            .position(|i| i.dir_link == d)
            .map(|p| IfaceId(p as u8))
    }

    pub fn node_by_addr(&self, addr: Ipv4Addr) -> Option<NodeId> {
        self.by_addr.get(&addr).copied()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    /// First link joining `a` and `b`, in either orientation.
    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.links
            .iter()
            .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
            .map(|l| l.id)
    }

    pub fn is_router(&self, id: NodeId) -> bool {
        self.node(id).kind == NodeKind::Router
    }
}

/// Incremental construction of a [`Topology`] by node name.
#[derive(Debug, Default)]
pub struct TopologyBuilder {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl TopologyBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_node(&mut self, name: &str, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            name: name.to_owned(),
            kind,
            addr: node_address(id),
        });
        id
    }

    pub fn router(&mut self, name: &str) -> NodeId {
        self.add_node(name, NodeKind::Router)
    }

    pub fn host(&mut self, name: &str) -> NodeId {
        self.add_node(name, NodeKind::Host)
    }

    pub fn link(&mut self, a: NodeId, b: NodeId, p: LinkParams) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(Link {
            id,
            a,
            b,
            capacity_bps: p.capacity_bps,
            propagation_delay: p.propagation_delay,
            base_cost: p.base_cost,
            queue_capacity: p.queue_capacity,
        });
        id
    }

    pub fn build(self) -> Result<Topology> {
        Topology::new(self.nodes, self.links)
    }
}

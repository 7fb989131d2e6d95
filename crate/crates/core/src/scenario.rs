// SPDX-License-Identifier: Apache-2.0

//! Declarative scenario files (TOML) and the lab topology builders.
//!
//! A file describes the topology, routing and FAMTAR settings, the workload,
//! link failures and the run length. Every table rejects unknown keys and
//! every setting has a default, so a file only needs what it changes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{LinkFailure, SimConfig};
use crate::error::{Error, Result};
use crate::fft::FftConfig;
use crate::model::{LinkParams, NodeId, SimTime, Topology, TopologyBuilder};
use crate::pipeline::{FamtarConfig, MonitorConfig};
use crate::routing::RoutingConfig;
use crate::traffic::{
    self, gen_batch, gen_scenario3_workload, BatchParams, FlowKind, FlowSpec, DEFAULT_TTL,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "one")]
    pub repetitions: u32,
    #[serde(default = "one_u64")]
    pub seed: u64,
    #[serde(default)]
    pub trace_paths: bool,
    pub topology: TopologySpec,
    #[serde(default)]
    pub routing: RoutingSection,
    #[serde(default)]
    pub famtar: FamtarSection,
    pub workload: WorkloadSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureSpec>,
}

fn one() -> u32 {
    1
}

fn one_u64() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    /// H1 - R1 = k disjoint paths = R4 - H2.
    ParallelPaths {
        paths: u32,
        #[serde(default = "one")]
        transit_hops: u32,
        #[serde(default = "default_core_bps")]
        core_capacity_bps: u64,
        #[serde(default = "default_host_bps")]
        host_capacity_bps: u64,
        #[serde(default = "default_delay_ms")]
        propagation_delay_ms: f64,
        #[serde(default = "default_cost")]
        base_cost: u32,
        #[serde(default = "default_queue")]
        queue_packets: usize,
        #[serde(default = "default_host_queue")]
        host_queue_packets: usize,
    },
    Explicit {
        nodes: Vec<NodeSpec>,
        links: Vec<LinkSpec>,
    },
}

fn default_core_bps() -> u64 {
    10_000_000
}
fn default_host_bps() -> u64 {
    100_000_000
}
fn default_delay_ms() -> f64 {
    1.0
}
fn default_cost() -> u32 {
    10
}
fn default_queue() -> usize {
    100
}
/// Sender-side buffer; generators emit synchronized bursts.
fn default_host_queue() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub kind: crate::model::NodeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    #[serde(default = "default_core_bps")]
    pub capacity_bps: u64,
    #[serde(default = "default_delay_ms")]
    pub delay_ms: f64,
    #[serde(default = "default_cost")]
    pub cost: u32,
    #[serde(default = "default_queue")]
    pub queue_packets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingSection {
    pub flood_hop_delay_ms: f64,
    pub spf_delay_ms: f64,
    pub symmetric_escalation: bool,
}

impl Default for RoutingSection {
    fn default() -> Self {
        let d = RoutingConfig::default();
        RoutingSection {
            flood_hop_delay_ms: d.flood_hop_delay.as_millis_f64(),
            spf_delay_ms: d.spf_delay.as_millis_f64(),
            symmetric_escalation: d.symmetric_escalation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamtarSection {
    pub enabled: bool,
    pub congest_threshold: f64,
    pub clear_threshold: f64,
    pub high_cost: u32,
    pub monitor_period_s: f64,
    pub monitor_offset_s: f64,
    pub flow_timeout_s: f64,
    pub block_duration_s: f64,
    pub fft_buckets: usize,
    pub loop_resolution: bool,
}

impl Default for FamtarSection {
    fn default() -> Self {
        let d = FamtarConfig::default();
        FamtarSection {
            enabled: d.enabled,
            congest_threshold: d.monitor.congest_threshold,
            clear_threshold: d.monitor.clear_threshold,
            high_cost: d.monitor.high_cost,
            monitor_period_s: d.monitor.period.as_secs_f64(),
            monitor_offset_s: d.monitor.offset.as_secs_f64(),
            flow_timeout_s: d.fft.timeout.as_secs_f64(),
            block_duration_s: d.block_duration.as_secs_f64(),
            fft_buckets: d.fft.buckets,
            loop_resolution: d.loop_resolution,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadSection {
    /// Randomized CBR batch drawn from the run's seed.
    Batch {
        #[serde(default = "h1")]
        src: String,
        #[serde(default = "h2")]
        dst: String,
        #[serde(default = "BatchParams::scenario1")]
        params: BatchParams,
    },
    /// One VoIP stream plus staggered background flows.
    VoipBackground {
        #[serde(default = "h1")]
        src: String,
        #[serde(default = "h2")]
        dst: String,
    },
    SingleCbr {
        #[serde(default = "h1")]
        src: String,
        #[serde(default = "h2")]
        dst: String,
        rate_bps: u64,
        packet_size: u32,
        #[serde(default)]
        start_s: f64,
    },
    Flows {
        flows: Vec<FlowEntry>,
    },
}

fn h1() -> String {
    "H1".into()
}
fn h2() -> String {
    "H2".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub src: String,
    pub dst: String,
    pub rate_bps: u64,
    pub packet_size: u32,
    #[serde(default)]
    pub header_size: u32,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes: Option<u64>,
    #[serde(default = "udp_kind")]
    pub kind: FlowKind,
    #[serde(default = "default_ttl")]
    pub ttl: u8,
}

fn udp_kind() -> FlowKind {
    FlowKind::Udp
}
fn default_ttl() -> u8 {
    DEFAULT_TTL
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub window_s: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    /// Endpoint names of the failing link.
    pub link: [String; 2],
    pub down_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_s: Option<f64>,
}

/// Everything needed to construct one engine instance.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub topology: Topology,
    pub config: SimConfig,
    pub flows: Vec<FlowSpec>,
    pub failures: Vec<LinkFailure>,
}

/// Options of [`build_parallel_paths_topology`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParallelPathsOptions {
    pub transit_hops: u32,
    pub core: LinkParams,
    pub host: LinkParams,
}

impl Default for ParallelPathsOptions {
    fn default() -> Self {
        let core = LinkParams::default();
        ParallelPathsOptions {
            transit_hops: 1,
            core,
            host: LinkParams {
                capacity_bps: 100_000_000,
                queue_capacity: default_host_queue(),
                ..core
            },
        }
    }
}

/// Transit router names per path; R1 and R4 are the edge routers.
const PATH_NAMES: [&str; 4] = ["R2", "R3", "R5", "R6"];

/// H1 - R1, then `k` node-disjoint paths from R1 to R4, then R4 - H2.
///
/// Transit routers are created in path order, so with equal costs the path
/// through R2 is preferred.
pub fn build_parallel_paths_topology(k: u32, opts: ParallelPathsOptions) -> Result<Topology> {
    if !(1..=4).contains(&k) {
        return Err(Error::Topology(format!("path count {k} outside 1..=4")));
    }
    if opts.transit_hops == 0 {
        return Err(Error::Topology("paths need at least one transit router".into()));
    }
    let mut b = TopologyBuilder::new();
    let h1 = b.host("H1");
    let r1 = b.router("R1");
    let mut paths = Vec::new();
    for name in &PATH_NAMES[..k as usize] {
        let hops: Vec<NodeId> = (1..=opts.transit_hops)
            .map(|j| {
                if opts.transit_hops == 1 {
                    b.router(name)
                } else {
                    b.router(&format!("{name}_{j}"))
                }
            })
            .collect();
        paths.push(hops);
    }
    let r4 = b.router("R4");
    let h2 = b.host("H2");
    b.link(h1, r1, opts.host);
    for hops in &paths {
        let mut prev = r1;
        for &h in hops {
            b.link(prev, h, opts.core);
            prev = h;
        }
        b.link(prev, r4, opts.core);
    }
    b.link(r4, h2, opts.host);
    b.build()
}

fn secs(s: f64, what: &str) -> Result<SimTime> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Scenario(format!("{what} must be a non-negative number, got {s}")));
    }
    Ok(SimTime::from_secs_f64(s))
}

fn millis(ms: f64, what: &str) -> Result<SimTime> {
    secs(ms / 1e3, what)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "schema version {} not supported (expected {SCHEMA_VERSION})",
                f.schema_version
            )));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks everything that can fail before a run, including workload
    /// endpoints and failing links.
    pub fn validate(&self) -> Result<()> {
        self.prepare(self.seed).map(|_| ())
    }

    pub fn topology(&self) -> Result<Topology> {
        match &self.topology {
            TopologySpec::ParallelPaths {
                paths,
                transit_hops,
                core_capacity_bps,
                host_capacity_bps,
                propagation_delay_ms,
                base_cost,
                queue_packets,
                host_queue_packets,
            } => {
                let core = LinkParams {
                    capacity_bps: *core_capacity_bps,
                    propagation_delay: millis(*propagation_delay_ms, "propagation delay")?,
                    base_cost: *base_cost,
                    queue_capacity: *queue_packets,
                };
                build_parallel_paths_topology(
                    *paths,
                    ParallelPathsOptions {
                        transit_hops: *transit_hops,
                        core,
                        host: LinkParams {
                            capacity_bps: *host_capacity_bps,
                            queue_capacity: *host_queue_packets,
                            ..core
                        },
                    },
                )
            }
            TopologySpec::Explicit { nodes, links } => {
                let mut b = TopologyBuilder::new();
                let mut ids = std::collections::HashMap::new();
                for n in nodes {
                    let id = match n.kind {
                        crate::model::NodeKind::Router => b.router(&n.name),
                        crate::model::NodeKind::Host => b.host(&n.name),
                    };
                    ids.insert(n.name.as_str(), id);
                }
                for l in links {
                    let end = |name: &str| {
                        ids.get(name)
                            .copied()
                            .ok_or_else(|| Error::Scenario(format!("link endpoint {name} is not a node")))
                    };
                    b.link(
                        end(&l.a)?,
                        end(&l.b)?,
                        LinkParams {
                            capacity_bps: l.capacity_bps,
                            propagation_delay: millis(l.delay_ms, "link delay")?,
                            base_cost: l.cost,
                            queue_capacity: l.queue_packets,
                        },
                    );
                }
                b.build()
            }
        }
    }

    fn famtar_config(&self) -> Result<FamtarConfig> {
        let f = &self.famtar;
        let cfg = FamtarConfig {
            enabled: f.enabled,
            monitor: MonitorConfig {
                period: secs(f.monitor_period_s, "monitor period")?,
                offset: secs(f.monitor_offset_s, "monitor offset")?,
                congest_threshold: f.congest_threshold,
                clear_threshold: f.clear_threshold,
                high_cost: f.high_cost,
            },
            fft: FftConfig {
                buckets: f.fft_buckets.max(1),
                timeout: secs(f.flow_timeout_s, "flow timeout")?,
                auto_grow: true,
            },
            block_duration: secs(f.block_duration_s, "block duration")?,
            loop_resolution: f.loop_resolution,
        };
        cfg.monitor.validate()?;
        Ok(cfg)
    }

    fn routing_config(&self) -> Result<RoutingConfig> {
        Ok(RoutingConfig {
            flood_hop_delay: millis(self.routing.flood_hop_delay_ms, "flood delay")?,
            spf_delay: millis(self.routing.spf_delay_ms, "SPF delay")?,
            symmetric_escalation: self.routing.symmetric_escalation,
        })
    }

    /// Resolves the file into engine inputs for one repetition.
    pub fn prepare(&self, seed: u64) -> Result<Prepared> {
        let topology = self.topology()?;
        let duration = secs(self.duration_s, "duration")?;
        if duration == SimTime::ZERO {
            return Err(Error::Scenario("duration must be positive".into()));
        }
        let host = |name: &str| -> Result<NodeId> {
            let id = topology
                .node_by_name(name)
                .ok_or_else(|| Error::Scenario(format!("workload endpoint {name} does not exist")))?;
            if topology.is_router(id) {
                return Err(Error::Scenario(format!("workload endpoint {name} is not a host")));
            }
            Ok(id)
        };
        let flows = match &self.workload {
            WorkloadSection::Batch { src, dst, params } => gen_batch(params, host(src)?, host(dst)?, seed)?,
            WorkloadSection::VoipBackground { src, dst } => gen_scenario3_workload(host(src)?, host(dst)?).flows,
            WorkloadSection::SingleCbr {
                src,
                dst,
                rate_bps,
                packet_size,
                start_s,
            } => {
                let f = FlowSpec::cbr(host(src)?, host(dst)?, *rate_bps, *packet_size, secs(*start_s, "flow start")?);
                vec![f]
            }
            WorkloadSection::Flows { flows } => flows
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    Ok(FlowSpec {
                        src: host(&e.src)?,
                        dst: host(&e.dst)?,
                        rate_bps: e.rate_bps,
                        payload_size: e.packet_size,
                        header_size: e.header_size,
                        start: secs(e.start_s, "flow start")?,
                        size_bytes: e.size_bytes,
                        stop: e.stop_s.map(|s| secs(s, "flow stop")).transpose()?,
                        kind: e.kind,
                        ttl_initial: e.ttl,
                        src_port: 10_000 + i as u16,
                        dst_port: 5_000,
                    })
                })
                .collect::<Result<_>>()?,
        };
        for f in &flows {
            f.validate()?;
        }
        let window = match &self.measurement {
            Some(m) => (secs(m.window_s[0], "window start")?, secs(m.window_s[1], "window end")?),
            None => (SimTime::ZERO, duration),
        };
        if window.0 >= window.1 || window.1 > duration {
            return Err(Error::Scenario("measurement window must lie within the run".into()));
        }
        let failures = self
            .failures
            .iter()
            .map(|f| {
                let a = topology
                    .node_by_name(&f.link[0])
                    .ok_or_else(|| Error::Scenario(format!("unknown node {}", f.link[0])))?;
                let b = topology
                    .node_by_name(&f.link[1])
                    .ok_or_else(|| Error::Scenario(format!("unknown node {}", f.link[1])))?;
                let link = topology
                    .link_between(a, b)
                    .ok_or_else(|| Error::Scenario(format!("no link {}-{}", f.link[0], f.link[1])))?;
                let down_at = secs(f.down_s, "failure time")?;
                let up_at = f.up_s.map(|s| secs(s, "recovery time")).transpose()?;
                if up_at.is_some_and(|u| u <= down_at) {
                    return Err(Error::Scenario("recovery must follow failure".into()));
                }
                Ok(LinkFailure { link, down_at, up_at })
            })
            .collect::<Result<Vec<_>>>()?;
        let config = SimConfig {
            famtar: self.famtar_config()?,
            routing: self.routing_config()?,
            duration,
            window,
            trace_paths: self.trace_paths,
            keep_log: false,
        };
        Ok(Prepared {
            topology,
            config,
            flows,
            failures,
        })
    }

    /// The same scenario with FAMTAR forced on or off.
    pub fn with_famtar(&self, enabled: bool) -> Self {
        let mut f = self.clone();
        f.famtar.enabled = enabled;
        f
    }
}

/// Scenario file for the parallel-paths lab with the randomized batch
/// workload.
pub fn scenario1_file(k: u32, famtar: bool) -> ScenarioFile {
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: format!("scenario1-k{k}.{}", if famtar { "famtar" } else { "ip" }),
        duration_s: 230.0,
        repetitions: 5,
        seed: 1,
        trace_paths: false,
        topology: parallel_paths(k),
        routing: RoutingSection::default(),
        famtar: FamtarSection {
            enabled: famtar,
            ..FamtarSection::default()
        },
        workload: WorkloadSection::Batch {
            src: h1(),
            dst: h2(),
            params: BatchParams::scenario1(),
        },
        measurement: Some(MeasurementSection { window_s: [20.0, 230.0] }),
        failures: Vec::new(),
    }
}

pub fn scenario3_file(famtar: bool) -> ScenarioFile {
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: format!("scenario3.{}", if famtar { "famtar" } else { "ip" }),
        duration_s: traffic::SCENARIO3_END.as_secs_f64(),
        repetitions: 5,
        seed: 1,
        trace_paths: false,
        topology: parallel_paths(4),
        routing: RoutingSection::default(),
        famtar: FamtarSection {
            enabled: famtar,
            ..FamtarSection::default()
        },
        workload: WorkloadSection::VoipBackground { src: h1(), dst: h2() },
        measurement: None,
        failures: Vec::new(),
    }
}

pub fn scenario4_file(famtar: bool) -> ScenarioFile {
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: format!("scenario4.{}", if famtar { "famtar" } else { "ip" }),
        duration_s: 20.0,
        repetitions: 5,
        seed: 1,
        trace_paths: false,
        topology: parallel_paths(2),
        routing: RoutingSection::default(),
        famtar: FamtarSection {
            enabled: famtar,
            ..FamtarSection::default()
        },
        workload: WorkloadSection::SingleCbr {
            src: h1(),
            dst: h2(),
            rate_bps: traffic::SCENARIO4_RATE_BPS,
            packet_size: traffic::SCENARIO4_PACKET,
            start_s: 1.0,
        },
        measurement: None,
        failures: vec![FailureSpec {
            link: ["R2".into(), "R4".into()],
            down_s: 10.0,
            up_s: None,
        }],
    }
}

fn parallel_paths(k: u32) -> TopologySpec {
    TopologySpec::ParallelPaths {
        paths: k,
        transit_hops: 1,
        core_capacity_bps: default_core_bps(),
        host_capacity_bps: default_host_bps(),
        propagation_delay_ms: default_delay_ms(),
        base_cost: default_cost(),
        queue_packets: default_queue(),
        host_queue_packets: default_host_queue(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_paths_shapes() {
        let t1 = build_parallel_paths_topology(1, ParallelPathsOptions::default()).unwrap();
        let routers = t1.nodes().iter().filter(|n| t1.is_router(n.id)).count();
        assert_eq!(routers, 3);
        let t4 = build_parallel_paths_topology(4, ParallelPathsOptions::default()).unwrap();
        let r1 = t4.node_by_name("R1").unwrap();
        let h1 = t4.node_by_name("H1").unwrap();
        let host_link = t4.link(t4.link_between(h1, r1).unwrap());
        assert_eq!(host_link.capacity_bps, 100_000_000);
        let core: Vec<_> = t4.ifaces(r1).iter().skip(1).map(|i| t4.link(i.dir_link.link()).capacity_bps).collect();
        assert_eq!(core, vec![10_000_000; 4]);
        assert!(build_parallel_paths_topology(0, ParallelPathsOptions::default()).is_err());
        assert!(build_parallel_paths_topology(5, ParallelPathsOptions::default()).is_err());
    }

    #[test]
    fn longer_transit_paths() {
        let opts = ParallelPathsOptions {
            transit_hops: 2,
            ..ParallelPathsOptions::default()
        };
        let t = build_parallel_paths_topology(2, opts).unwrap();
        assert!(t.node_by_name("R3_2").is_some());
        assert_eq!(t.links().len(), 2 + 2 * 3);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let f = ScenarioFile::parse(
            r#"
schema_version = 1
name = "tiny"
duration_s = 2.0
[topology]
type = "parallel_paths"
paths = 2
[workload]
type = "single_cbr"
rate_bps = 1000000
packet_size = 500
"#,
        )
        .unwrap();
        assert_eq!(f.famtar, FamtarSection::default());
        assert_eq!(f.routing, RoutingSection::default());
        let p = f.prepare(1).unwrap();
        assert_eq!(p.flows.len(), 1);
        assert_eq!(p.config.window, (SimTime::ZERO, SimTime::from_secs(2)));
        assert_eq!(p.config.famtar.block_duration, SimTime::from_secs(5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = scenario4_file(true).to_toml().unwrap().replace("duration_s", "bogus = 1\nduration_s");
        assert!(matches!(ScenarioFile::parse(&text), Err(Error::Parse(_))));
        let text = scenario4_file(true)
            .to_toml()
            .unwrap()
            .replace("[famtar]", "[famtar]\nturbo = true");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = scenario4_file(true).to_toml().unwrap().replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(ScenarioFile::parse(&text), Err(Error::Scenario(_))));
    }

    #[test]
    fn bad_endpoints_fail_validation() {
        let mut f = scenario4_file(true);
        f.workload = WorkloadSection::SingleCbr {
            src: "H1".into(),
            dst: "H9".into(),
            rate_bps: 1,
            packet_size: 1,
            start_s: 0.0,
        };
        assert!(f.validate().is_err());
        let mut f = scenario4_file(true);
        f.workload = WorkloadSection::SingleCbr {
            src: "H1".into(),
            dst: "R4".into(),
            rate_bps: 1,
            packet_size: 1,
            start_s: 0.0,
        };
        assert!(f.validate().is_err());
        let mut f = scenario4_file(true);
        f.failures[0].link = ["R2".into(), "R3".into()];
        assert!(f.validate().is_err());
    }

    #[test]
    fn bundled_constructors_round_trip() {
        let mut files = vec![scenario3_file(true), scenario4_file(false)];
        files.extend((1..=4).map(|k| scenario1_file(k, k % 2 == 0)));
        for f in files {
            let text = f.to_toml().unwrap();
            let back = ScenarioFile::parse(&text).unwrap();
            assert_eq!(back, f, "{text}");
            assert_eq!(back.to_toml().unwrap(), text);
            back.validate().unwrap();
        }
    }

    #[test]
    fn batch_params_table() {
        let f = ScenarioFile::parse(
            r#"
schema_version = 1
name = "b"
duration_s = 30.0
[topology]
type = "parallel_paths"
paths = 1
[workload]
type = "batch"
[workload.params]
flows = 3
packet_size = 1000
rate_bps = 800000
mean_size_bytes = 1e6
pareto_shape = 1.25
size_cap_bytes = 1e8
mean_interstart_s = 0.5
"#,
        )
        .unwrap();
        let a = f.prepare(7).unwrap();
        let b = f.prepare(7).unwrap();
        assert_eq!(a.flows.len(), 3);
        assert_eq!(a.flows, b.flows);
        assert_ne!(a.flows, f.prepare(8).unwrap().flows);
    }

    #[test]
    fn bad_thresholds_fail_validation() {
        let mut f = scenario4_file(true);
        f.famtar.clear_threshold = 0.95;
        assert!(matches!(f.validate(), Err(Error::Config(_))));
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Workload generators: constant-bitrate UDP flows with heavy-tailed sizes
//! and exponential inter-start times, a VoIP-like CBR stream, and the fixed
//! single-flow and staggered-batch workloads of the lab scenarios.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeId, SimTime};

pub const UDP: u8 = 17;
pub const DEFAULT_TTL: u8 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Udp,
    Voip,
}

impl FlowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Udp => "udp",
            FlowKind::Voip => "voip",
        }
    }
}

/// A constant-bitrate flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub src: NodeId,
    pub dst: NodeId,
    /// Application bitrate; packets leave every `payload_size * 8 / rate_bps`.
    pub rate_bps: u64,
    pub payload_size: u32,
    /// Extra header bytes added on the wire.
    pub header_size: u32,
    pub start: SimTime,
    /// Total application bytes, `None` for open-ended flows.
    pub size_bytes: Option<u64>,
    /// Hard stop, independent of `size_bytes`.
    pub stop: Option<SimTime>,
    pub kind: FlowKind,
    pub ttl_initial: u8,
    pub src_port: u16,
    pub dst_port: u16,
}

impl FlowSpec {
    pub fn cbr(src: NodeId, dst: NodeId, rate_bps: u64, payload_size: u32, start: SimTime) -> Self {
        FlowSpec {
            src,
            dst,
            rate_bps,
            payload_size,
            header_size: 0,
            start,
            size_bytes: None,
            stop: None,
            kind: FlowKind::Udp,
            ttl_initial: DEFAULT_TTL,
            src_port: 10_000,
            dst_port: 5_000,
        }
    }

    pub fn wire_size(&self) -> u32 {
        self.payload_size + self.header_size
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_bps == 0 || self.payload_size == 0 {
            return Err(Error::Config("flow rate and packet size must be positive".into()));
        }
        if self.src == self.dst {
            return Err(Error::Config("flow source equals destination".into()));
        }
        Ok(())
    }

    /// Number of packets the flow emits if it is size-bounded.
    pub fn packet_count(&self) -> Option<u64> {
        self.size_bytes
            .map(|b| b.div_ceil(u64::from(self.payload_size)).max(1))
    }

    /// Emission time of packet `seq`, computed without accumulated rounding.
    pub fn emission_time(&self, seq: u64) -> SimTime {
        let bits = u128::from(self.payload_size) * 8;
        let us = u128::from(seq) * bits * 1_000_000 / u128::from(self.rate_bps);
        self.start + SimTime::from_micros(us as u64)
    }

    /// Whether packet `seq` is part of the flow.
    pub fn emits(&self, seq: u64) -> bool {
        if self.packet_count().is_some_and(|n| seq >= n) {
            return false;
        }
        self.stop.is_none_or(|stop| self.emission_time(seq) < stop)
    }

    /// Nominal packet spacing, in fractional microseconds.
    pub fn interval_us(&self) -> f64 {
        f64::from(self.payload_size) * 8.0 * 1e6 / self.rate_bps as f64
    }
}

/// Pareto-distributed sizes, parameterized by mean and shape, with an upper
/// truncation.
#[derive(Clone, Copy, Debug)]
pub struct ParetoSizes {
    dist: Pareto<f64>,
    cap: f64,
}

impl ParetoSizes {
    pub fn new(mean: f64, shape: f64, cap: f64) -> Result<Self> {
        if shape.is_nan() || shape <= 1.0 || mean.is_nan() || mean <= 0.0 {
            return Err(Error::Config(format!(
                "Pareto needs shape > 1 and positive mean, got shape {shape}, mean {mean}"
            )));
        }
        let scale = mean * (shape - 1.0) / shape;
        let dist = Pareto::new(scale, shape).map_err(|e| Error::Config(e.to_string()))?;
        Ok(ParetoSizes { dist, cap })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng).min(self.cap)
    }
}

/// Exponential inter-arrival gaps with the given mean, in seconds.
#[derive(Clone, Copy, Debug)]
pub struct ExpGaps(Exp<f64>);

impl ExpGaps {
    pub fn new(mean_s: f64) -> Result<Self> {
        Exp::new(1.0 / mean_s)
            .map(ExpGaps)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.0.sample(rng)
    }
}

/// The random stream used for all draws of one run.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Parameters of a randomized batch of CBR flows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchParams {
    pub flows: u32,
    pub packet_size: u32,
    pub rate_bps: u64,
    pub mean_size_bytes: f64,
    pub pareto_shape: f64,
    pub size_cap_bytes: f64,
    pub mean_interstart_s: f64,
}

impl BatchParams {
    /// 500 flows of 1000 B packets at 100 kB/s, Pareto sizes (mean 1 MB,
    /// shape 1.25, truncated at 100 MB), exponential inter-starts (mean 0.5 s).
    pub fn scenario1() -> Self {
        BatchParams {
            flows: 500,
            packet_size: 1000,
            rate_bps: 800_000,
            mean_size_bytes: 1e6,
            pareto_shape: 1.25,
            size_cap_bytes: 100e6,
            mean_interstart_s: 0.5,
        }
    }

    /// Long-run average offered load, ignoring truncation.
    pub fn mean_offered_bps(&self) -> f64 {
        let duration = self.mean_size_bytes * 8.0 / self.rate_bps as f64;
        duration / self.mean_interstart_s * self.rate_bps as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub flows: Vec<FlowSpec>,
    /// Measurement window.
    pub window: (SimTime, SimTime),
    /// Set for randomized batches.
    pub batch: Option<BatchParams>,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        for f in &self.flows {
            f.validate()?;
        }
        if self.window.0 >= self.window.1 {
            return Err(Error::Config("empty measurement window".into()));
        }
        Ok(())
    }
}

/// Draws a randomized batch. Per flow, the inter-start gap is drawn first,
/// then the size; flow `i` starts at the sum of the first `i + 1` gaps and
/// uses source port `10000 + i`.
pub fn gen_batch(p: &BatchParams, src: NodeId, dst: NodeId, seed: u64) -> Result<Vec<FlowSpec>> {
    let sizes = ParetoSizes::new(p.mean_size_bytes, p.pareto_shape, p.size_cap_bytes)?;
    let gaps = ExpGaps::new(p.mean_interstart_s)?;
    let mut rng = rng_for(seed);
    let mut t = 0.0;
    let mut flows = Vec::with_capacity(p.flows as usize);
    for i in 0..p.flows {
        t += gaps.sample(&mut rng);
        let size = sizes.sample(&mut rng).round().max(1.0) as u64;
        let mut f = FlowSpec::cbr(src, dst, p.rate_bps, p.packet_size, SimTime::from_secs_f64(t));
        f.size_bytes = Some(size);
        f.src_port = 10_000 + i as u16;
        flows.push(f);
    }
    Ok(flows)
}

/// Multipath scaling workload: the randomized batch, measured over
/// [20 s, 230 s].
pub fn gen_scenario1_workload(seed: u64, src: NodeId, dst: NodeId) -> Result<WorkloadSpec> {
    let p = BatchParams::scenario1();
    Ok(WorkloadSpec {
        flows: gen_batch(&p, src, dst, seed)?,
        window: (SimTime::from_secs(20), SimTime::from_secs(230)),
        batch: Some(p),
    })
}

/// VoIP stream parameters: 125 B payload at 50 packets/s plus 40 B of
/// RTP/UDP/IP headers on the wire. Bitrate is accounted at payload level.
pub const VOIP_PAYLOAD: u32 = 125;
pub const VOIP_HEADER: u32 = 40;
pub const VOIP_RATE_BPS: u64 = 50_000;
pub const BACKGROUND_RATE_BPS: u64 = 100_000;
pub const BACKGROUND_PACKET: u32 = 1000;
pub const SCENARIO3_END: SimTime = SimTime::from_secs(100);

/// VoIP protection workload: one VoIP stream from t = 0, then background
/// CBR flows every 200 ms: 50 from 6 s (running to the end) and 150 from
/// 25 s, the latter stopped in start order every 200 ms from 70 s.
pub fn gen_scenario3_workload(src: NodeId, dst: NodeId) -> WorkloadSpec {
    let mut flows = Vec::with_capacity(201);
    let mut voip = FlowSpec::cbr(src, dst, VOIP_RATE_BPS, VOIP_PAYLOAD, SimTime::ZERO);
    voip.header_size = VOIP_HEADER;
    voip.kind = FlowKind::Voip;
    voip.src_port = 20_000;
    flows.push(voip);
    let step = SimTime::from_millis(200);
    let mut port = 10_000;
    for i in 0..50u64 {
        let mut f = FlowSpec::cbr(
            src,
            dst,
            BACKGROUND_RATE_BPS,
            BACKGROUND_PACKET,
            SimTime::from_secs(6) + SimTime::from_micros(step.as_micros() * i),
        );
        f.src_port = port;
        port += 1;
        flows.push(f);
    }
    for i in 0..150u64 {
        let offset = SimTime::from_micros(step.as_micros() * i);
        let mut f = FlowSpec::cbr(
            src,
            dst,
            BACKGROUND_RATE_BPS,
            BACKGROUND_PACKET,
            SimTime::from_secs(25) + offset,
        );
        f.stop = Some(SimTime::from_secs(70) + offset);
        f.src_port = port;
        port += 1;
        flows.push(f);
    }
    WorkloadSpec {
        flows,
        window: (SimTime::ZERO, SCENARIO3_END),
        batch: None,
    }
}

pub const SCENARIO4_RATE_BPS: u64 = 2_840_000;
pub const SCENARIO4_PACKET: u32 = 64;

/// Failure restoration workload: a single 2.84 Mbit/s CBR flow of 64 B
/// packets starting at `start`.
pub fn gen_scenario4_workload(src: NodeId, dst: NodeId, start: SimTime, end: SimTime) -> WorkloadSpec {
    let f = FlowSpec::cbr(src, dst, SCENARIO4_RATE_BPS, SCENARIO4_PACKET, start);
    WorkloadSpec {
        flows: vec![f],
        window: (SimTime::ZERO, end),
        batch: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H1: NodeId = NodeId(0);
    const H2: NodeId = NodeId(1);

    #[test]
    fn scenario1_shape() {
        let w = gen_scenario1_workload(1, H1, H2).unwrap();
        assert_eq!(w.flows.len(), 500);
        assert!(w.flows.iter().all(|f| f.payload_size == 1000 && f.rate_bps == 800_000));
        assert_eq!(w.window, (SimTime::from_secs(20), SimTime::from_secs(230)));
        // distinct 5-tuples
        let mut ports: Vec<_> = w.flows.iter().map(|f| f.src_port).collect();
        ports.dedup();
        assert_eq!(ports.len(), 500);
        assert!(w.flows.windows(2).all(|p| p[0].start <= p[1].start));
    }

    #[test]
    fn scenario1_nominal_offered_load() {
        // mean duration 1 MB / 100 kB/s = 10 s, 2 arrivals/s, 800 kbit/s each
        let load = BatchParams::scenario1().mean_offered_bps();
        assert!((load - 16e6).abs() < 1e-6);
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let a = gen_scenario1_workload(7, H1, H2).unwrap();
        let b = gen_scenario1_workload(7, H1, H2).unwrap();
        let c = gen_scenario1_workload(8, H1, H2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.flows, c.flows);
        assert_eq!(a.batch, c.batch);
    }

    #[test]
    fn pareto_rejects_infinite_mean() {
        assert!(ParetoSizes::new(1e6, 1.0, 1e9).is_err());
        assert!(ParetoSizes::new(1e6, 0.5, 1e9).is_err());
    }

    #[test]
    fn scenario3_schedule() {
        let w = gen_scenario3_workload(H1, H2);
        assert_eq!(w.flows.len(), 201);
        assert_eq!(w.flows[0].kind, FlowKind::Voip);
        let starts: Vec<_> = w.flows[1..4].iter().map(|f| f.start).collect();
        assert_eq!(
            starts,
            vec![SimTime::from_millis(6000), SimTime::from_millis(6200), SimTime::from_millis(6400)]
        );
        assert_eq!(w.flows[51].start, SimTime::from_secs(25));
        let stops: Vec<_> = w.flows[51..53].iter().map(|f| f.stop.unwrap()).collect();
        assert_eq!(stops, vec![SimTime::from_millis(70_000), SimTime::from_millis(70_200)]);
        assert!(w.flows[1..51].iter().all(|f| f.stop.is_none()));
        // 200 background flows at 100 kbit/s
        let peak: u64 = w.flows[1..].iter().map(|f| f.rate_bps).sum();
        assert_eq!(peak, 20_000_000);
    }

    #[test]
    fn scenario4_timing() {
        let w = gen_scenario4_workload(H1, H2, SimTime::ZERO, SimTime::from_secs(20));
        let f = &w.flows[0];
        assert!((f.interval_us() - 180.28169).abs() < 1e-4);
        // 2.84e6 / 512 packets per second
        let per_sec = (0..).take_while(|&s| f.emission_time(s) < SimTime::from_secs(1)).count();
        assert_eq!(per_sec, 5547);
        assert!(f.rate_bps < 10_000_000);
    }

    #[test]
    fn emission_respects_size_and_stop() {
        let mut f = FlowSpec::cbr(H1, H2, 800_000, 1000, SimTime::from_secs(1));
        f.size_bytes = Some(2500);
        assert_eq!(f.packet_count(), Some(3));
        assert!(f.emits(2) && !f.emits(3));
        assert_eq!(f.emission_time(1), SimTime::from_millis(1010));
        let mut g = FlowSpec::cbr(H1, H2, 800_000, 1000, SimTime::ZERO);
        g.stop = Some(SimTime::from_millis(25));
        assert!(g.emits(2) && !g.emits(3));
    }
}

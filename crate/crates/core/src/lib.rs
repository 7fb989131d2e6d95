// SPDX-License-Identifier: Apache-2.0

//! Deterministic packet-level simulator for FAMTAR (Flow-Aware Multi-Topology
//! Adaptive Routing) networks.
//!
//! Routers pin every flow to the egress chosen for its first packet in a
//! Flow Forwarding Table ([`fft`]), escalate the link-state cost of loaded
//! links so that only new flows move to alternative paths ([`pipeline`],
//! [`routing`]), and resolve stale pins with a TTL comparison. The
//! [`engine`] runs these routers over drop-tail links; [`scenario`] and
//! [`experiment`] describe and repeat lab-style experiments against a plain
//! shortest-path baseline.

pub mod engine;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod log;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod routing;
pub mod scenario;
pub mod traffic;

pub use error::{Error, Result};

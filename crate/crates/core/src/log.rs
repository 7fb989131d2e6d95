// SPDX-License-Identifier: Apache-2.0

//! Structured event log. Every record is hashed as it is written so that two
//! runs can be compared without keeping the records around.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{FlowId, IfaceId, LinkId, NodeId, SimTime};
use crate::pipeline::{CostChangeKind, DropReason, FftAction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    FlowStart {
        flow: FlowId,
    },
    Drop {
        node: NodeId,
        flow: FlowId,
        seq: u64,
        reason: DropReason,
    },
    Fft {
        node: NodeId,
        flow: FlowId,
        seq: u64,
        #[serde(flatten)]
        action: FftAction,
    },
    Purge {
        node: NodeId,
        iface: IfaceId,
        count: usize,
    },
    Block {
        node: NodeId,
        iface: IfaceId,
        until: SimTime,
    },
    Cost {
        node: NodeId,
        iface: IfaceId,
        kind: CostChangeKind,
        load: f64,
        cost: u32,
    },
    LinkDown {
        link: LinkId,
    },
    LinkUp {
        link: LinkId,
    },
    RouteInstall {
        node: NodeId,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: SimTime,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Clone, Debug, Default)]
pub struct EventLog {
    hasher: Sha256,
    count: u64,
    records: Option<Vec<LogRecord>>,
    line: Vec<u8>,
}

impl EventLog {
    /// `keep` retains the records in memory in addition to hashing them.
    pub fn new(keep: bool) -> Self {
        EventLog {
            records: keep.then(Vec::new),
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: SimTime, event: LogEvent) {
        let rec = LogRecord { t, event };
        self.line.clear();
        serde_json::to_writer(&mut self.line, &rec).expect("log records serialize");
        self.line.push(b'\n');
        self.hasher.update(&self.line);
        self.count += 1;
        if let Some(r) = self.records.as_mut() {
            r.push(rec);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn records(&self) -> &[LogRecord] {
        self.records.as_deref().unwrap_or(&[])
    }

    pub fn into_records(self) -> Vec<LogRecord> {
        self.records.unwrap_or_default()
    }

    pub fn digest_hex(&self) -> String {
        let d = self.hasher.clone().finalize();
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

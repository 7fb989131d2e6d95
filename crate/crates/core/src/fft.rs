// SPDX-License-Identifier: Apache-2.0

//! Flow Forwarding Table.
//!
//! A hash-chain array keyed by [`FlowKey`]. Idle entries are not reaped on a
//! timer: a bucket is swept when a new entry lands in it, and lookups simply
//! ignore anything older than the idle timeout. Interfaces can be blocked for
//! a while after a failure so that no new flow gets pinned to them.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FlowKey, FlowValue, IfaceId, SimTime, FLOW_ENTRY_BYTES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FftConfig {
    pub buckets: usize,
    /// Idle time after which an entry is treated as gone.
    pub timeout: SimTime,
    /// Double the bucket array once the average chain exceeds
    /// [`Fft::MAX_LOAD`]. Off gives a fixed bucket count, which collision
    /// tests rely on.
    pub auto_grow: bool,
}

impl Default for FftConfig {
    fn default() -> Self {
        FftConfig {
            buckets: 1024,
            timeout: SimTime::from_secs(10),
            auto_grow: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    /// The egress interface is under an admission block; nothing was stored.
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fft {
    buckets: Vec<Vec<(FlowKey, FlowValue)>>,
    timeout: SimTime,
    auto_grow: bool,
    blocked: HashMap<IfaceId, SimTime>,
    len: usize,
}

impl Default for Fft {
    fn default() -> Self {
        Fft::new(FftConfig::default())
    }
}

impl Fft {
    pub const MAX_LOAD: usize = 4;

    pub fn new(cfg: FftConfig) -> Self {
        Fft {
            buckets: vec![Vec::new(); cfg.buckets.max(1)],
            timeout: cfg.timeout,
            auto_grow: cfg.auto_grow,
            blocked: HashMap::new(),
            len: 0,
        }
    }

    pub fn timeout(&self) -> SimTime {
        self.timeout
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// Stored entries, including expired ones not yet collected.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Logical memory held by the stored entries.
    pub fn logical_bytes(&self) -> usize {
        self.len * FLOW_ENTRY_BYTES
    }

    fn bucket_of(&self, key: &FlowKey) -> usize {
        let mut h = DefaultHasher::new();
        key.hash(&mut h);
        (h.finish() % self.buckets.len() as u64) as usize
    }

    fn is_live(&self, v: &FlowValue, now: SimTime) -> bool {
        now.saturating_sub(v.ts) <= self.timeout
    }

    fn find(&self, key: &FlowKey) -> Option<(usize, usize)> {
        let b = self.bucket_of(key);
        self.buckets[b]
            .iter()
            .position(|(k, _)| k == key)
            .map(|i| (b, i))
    }

    fn find_live_mut(&mut self, key: &FlowKey, now: SimTime) -> Option<&mut FlowValue> {
        let (b, i) = self.find(key)?;
        let timeout = self.timeout;
        let v = &mut self.buckets[b][i].1;
        (now.saturating_sub(v.ts) <= timeout).then_some(v)
    }

    /// Returns the entry for `key` unless it is absent or idle for longer
    /// than the timeout. Never modifies the table.
    pub fn lookup(&self, key: &FlowKey, now: SimTime) -> Option<FlowValue> {
        let (b, i) = self.find(key)?;
        let v = self.buckets[b][i].1;
        self.is_live(&v, now).then_some(v)
    }

    pub fn touch(&mut self, key: &FlowKey, now: SimTime) -> Result<()> {
        let v = self
            .find_live_mut(key, now)
            .ok_or(Error::MissingEntry(*key))?;
        v.ts = v.ts.max(now);
        Ok(())
    }

    pub fn is_blocked(&self, iface: IfaceId, now: SimTime) -> bool {
        self.blocked.get(&iface).is_some_and(|&until| until > now)
    }

    /// Block expiry time for `iface`, if one was ever set.
    pub fn block_expiry(&self, iface: IfaceId) -> Option<SimTime> {
        self.blocked.get(&iface).copied()
    }

    /// Stores a new entry, then collects expired entries sharing its bucket.
    ///
    /// A blocked egress interface leaves the table untouched. Inserting over a
    /// live entry is a caller bug and is reported as such.
    pub fn insert(&mut self, key: FlowKey, value: FlowValue, now: SimTime) -> Result<InsertOutcome> {
        if self.is_blocked(value.port, now) {
            return Ok(InsertOutcome::Blocked);
        }
        if self.lookup(&key, now).is_some() {
            return Err(Error::DuplicateEntry(key));
        }
        if self.auto_grow && self.len >= self.buckets.len() * Self::MAX_LOAD {
            self.grow(now);
        }
        let b = self.bucket_of(&key);
        let timeout = self.timeout;
        let bucket = &mut self.buckets[b];
        let before = bucket.len();
        bucket.retain(|(k, v)| k != &key && now.saturating_sub(v.ts) <= timeout);
        let removed = before - bucket.len();
        bucket.push((key, value));
        self.len = self.len + 1 - removed;
        Ok(InsertOutcome::Inserted)
    }

    fn grow(&mut self, now: SimTime) {
        let old = std::mem::take(&mut self.buckets);
        self.buckets = vec![Vec::new(); old.len() * 2];
        self.len = 0;
        for (k, v) in old.into_iter().flatten() {
            if self.is_live(&v, now) {
                let b = self.bucket_of(&k);
                self.buckets[b].push((k, v));
                self.len += 1;
            }
        }
    }

    /// Refuses new entries egressing on `iface` until `now + duration`.
    /// A second call overwrites the previous expiry.
    pub fn block_interface(&mut self, iface: IfaceId, now: SimTime, duration: SimTime) {
        self.blocked.insert(iface, now + duration);
    }

    /// Removes every entry pinned to `iface`, live or not.
    pub fn purge_interface(&mut self, iface: IfaceId) -> usize {
        let mut removed = 0;
        for bucket in &mut self.buckets {
            let before = bucket.len();
            bucket.retain(|(_, v)| v.port != iface);
            removed += before - bucket.len();
        }
        self.len -= removed;
        removed
    }

    /// Repoints a live entry and refreshes its timestamp.
    pub fn update_entry(
        &mut self,
        key: &FlowKey,
        port: IfaceId,
        gateway: std::net::Ipv4Addr,
        ttl: u8,
        now: SimTime,
    ) -> Result<()> {
        let v = self
            .find_live_mut(key, now)
            .ok_or(Error::MissingEntry(*key))?;
        v.port = port;
        v.gateway = gateway;
        v.ttl = ttl;
        v.ts = v.ts.max(now);
        Ok(())
    }

    pub fn remove(&mut self, key: &FlowKey) -> Option<FlowValue> {
        let (b, i) = self.find(key)?;
        self.len -= 1;
        Some(self.buckets[b].swap_remove(i).1)
    }

    /// Full garbage-collection pass. Only used for end-of-run accounting;
    /// lookups already hide expired entries.
    pub fn sweep_expired(&mut self, now: SimTime) -> usize {
        let timeout = self.timeout;
        let mut removed = 0;
        for bucket in &mut self.buckets {
            let before = bucket.len();
            bucket.retain(|(_, v)| now.saturating_sub(v.ts) <= timeout);
            removed += before - bucket.len();
        }
        self.len -= removed;
        removed
    }

    /// All stored entries ordered by key.
    pub fn entries(&self) -> Vec<(FlowKey, FlowValue)> {
        let mut all: Vec<_> = self.buckets.iter().flatten().copied().collect();
        all.sort_by_key(|(k, _)| *k);
        all
    }

    /// Writes the stored entries as CSV, ordered by key.
    pub fn dump_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "src_addr,dst_addr,src_port,dst_port,ip_prot,ts_us,port,gateway,ttl")?;
        for (k, v) in self.entries() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                k.src_addr,
                k.dst_addr,
                k.src_port,
                k.dst_port,
                k.ip_prot,
                v.ts.as_micros(),
                v.port.0,
                v.gateway,
                v.ttl
            )?;
        }
        Ok(())
    }
}

//! Grouping probe requests into scan instances.
//!
//! Two consecutive probes from one MAC belong to the same scan when both
//! carry WPS with equal UUID-E, or when their fingerprints match and the
//! sequence number advanced by 1 to 4.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fingerprint::{fingerprint, Fingerprint};
use crate::frame::{MacAddress, MacClass, ProbeRequest, Timestamp, SEQ_MODULUS};
use crate::hexser;

/// Sequence advance must be strictly below this.
pub const MAX_SEQ_STEP: u16 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    /// Largest allowed gap in seconds between consecutive member probes;
    /// `None` disables the bound.
    pub max_gap: Option<f64>,
    /// Compare sequence numbers modulo 4096.
    pub wraparound: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            max_gap: Some(10.0),
            wraparound: true,
        }
    }
}

/// `sn1 < sn2 < sn1 + 5`, optionally on the 12-bit circle.
pub fn sequence_follows(sn1: u16, sn2: u16, wraparound: bool) -> bool {
    if wraparound {
        let d = (sn2 + SEQ_MODULUS - sn1) % SEQ_MODULUS;
        d > 0 && d < MAX_SEQ_STEP
    } else {
        sn1 < sn2 && sn2 < sn1 + MAX_SEQ_STEP
    }
}

fn same_instance_with(
    p1: &ProbeRequest,
    fp1: &Fingerprint,
    p2: &ProbeRequest,
    fp2: &Fingerprint,
    wraparound: bool,
) -> bool {
    if p1.mac() != p2.mac() {
        return false;
    }
    if p1.has_wps() && p2.has_wps() {
        return p1.uuid_e() == p2.uuid_e();
    }
    if fp1 == fp2 {
        return sequence_follows(p1.sequence_number(), p2.sequence_number(), wraparound);
    }
    false
}

/// Pairwise scan predicate; `p1` precedes `p2` in capture order.
pub fn same_instance(p1: &ProbeRequest, p2: &ProbeRequest, cfg: &InstanceConfig) -> bool {
    same_instance_with(p1, &fingerprint(p1), p2, &fingerprint(p2), cfg.wraparound)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanInstance {
    pub id: usize,
    pub mac: MacAddress,
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
    /// Indices into the capture the instance was built from.
    pub probe_indices: Vec<usize>,
    #[serde(with = "hexser::byte_set")]
    pub ssids: BTreeSet<Vec<u8>>,
    /// Fingerprint of the first member probe.
    pub fingerprint: Fingerprint,
    pub has_wps: bool,
    #[serde(with = "hexser::opt_array")]
    pub uuid_e: Option<[u8; 16]>,
}

impl ScanInstance {
    pub fn class(&self) -> MacClass {
        self.mac.classify()
    }

    pub fn len(&self) -> usize {
        self.probe_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probe_indices.is_empty()
    }
}

struct Open {
    instance: ScanInstance,
    last_index: usize,
}

/// Streaming fold over time-ordered probes.
pub struct InstanceGrouper<'a> {
    cfg: InstanceConfig,
    probes: &'a [ProbeRequest],
    fingerprints: Vec<Fingerprint>,
    built: Vec<Open>,
    open_by_mac: HashMap<MacAddress, usize>,
}

impl<'a> InstanceGrouper<'a> {
    pub fn new(probes: &'a [ProbeRequest], cfg: InstanceConfig) -> Self {
        InstanceGrouper {
            cfg,
            probes,
            fingerprints: probes.par_iter().map(fingerprint).collect(),
            built: Vec::new(),
            open_by_mac: HashMap::new(),
        }
    }

    /// Feeds probe `index`; indices must arrive in non-decreasing time order.
    pub fn push(&mut self, index: usize) {
        let p = &self.probes[index];
        let fp = &self.fingerprints[index];
        if let Some(&slot) = self.open_by_mac.get(&p.mac()) {
            let open = &self.built[slot];
            let last = &self.probes[open.last_index];
            let within_gap = self
                .cfg
                .max_gap
                .is_none_or(|g| p.timestamp().secs_since(last.timestamp()) <= g);
            if within_gap
                && same_instance_with(last, &self.fingerprints[open.last_index], p, fp, self.cfg.wraparound)
            {
                let open = &mut self.built[slot];
                let inst = &mut open.instance;
                inst.probe_indices.push(index);
                inst.last_ts = p.timestamp();
                if let Some(ssid) = p.ssid() {
                    inst.ssids.insert(ssid.to_vec());
                }
                inst.has_wps |= p.has_wps();
                if inst.uuid_e.is_none() {
                    inst.uuid_e = p.uuid_e();
                }
                open.last_index = index;
                return;
            }
        }
        let slot = self.built.len();
        self.built.push(Open {
            instance: ScanInstance {
                id: slot,
                mac: p.mac(),
                first_ts: p.timestamp(),
                last_ts: p.timestamp(),
                probe_indices: vec![index],
                ssids: p.ssid().map(|s| s.to_vec()).into_iter().collect(),
                fingerprint: *fp,
                has_wps: p.has_wps(),
                uuid_e: p.uuid_e(),
            },
            last_index: index,
        });
        self.open_by_mac.insert(p.mac(), slot);
    }

    /// Instances in order of their first probe.
    pub fn finish(self) -> Vec<ScanInstance> {
        self.built.into_iter().map(|o| o.instance).collect()
    }
}

/// Capture indices in time order; ties keep capture order.
pub fn time_order(probes: &[ProbeRequest]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probes.len()).collect();
    order.sort_by_key(|&i| probes[i].timestamp());
    order
}

pub fn group_instances(probes: &[ProbeRequest], cfg: &InstanceConfig) -> Vec<ScanInstance> {
    let mut grouper = InstanceGrouper::new(probes, *cfg);
    for i in time_order(probes) {
        grouper.push(i);
    }
    grouper.finish()
}

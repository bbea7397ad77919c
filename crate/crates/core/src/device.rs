//! Clustering scan instances into devices.
//!
//! Two instances are the same device when their MACs match; otherwise, when
//! both carry WPS, when their UUID-Es match; otherwise, when their
//! fingerprints match and their SSID sets are similar enough. Devices are the
//! connected components of that relation.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprint;
use crate::frame::{MacAddress, MacClass, Timestamp};
use crate::hexser;
use crate::instance::ScanInstance;
use crate::unionfind::UnionFind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMetric {
    /// |A ∩ B| / |A ∪ B|
    #[default]
    Jaccard,
    /// |A ∩ B| / min(|A|, |B|)
    Overlap,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    /// similarity > threshold
    #[default]
    Strict,
    /// similarity ≥ threshold
    Inclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    pub metric: SimilarityMetric,
    pub threshold: f64,
    pub comparator: Comparator,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            metric: SimilarityMetric::Jaccard,
            threshold: 0.5,
            comparator: Comparator::Strict,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    fn accepts(&self, similarity: f64) -> bool {
        match self.comparator {
            Comparator::Strict => similarity > self.threshold,
            Comparator::Inclusive => similarity >= self.threshold,
        }
    }
}

pub fn ssid_similarity(
    a: &BTreeSet<Vec<u8>>,
    b: &BTreeSet<Vec<u8>>,
    metric: SimilarityMetric,
) -> f64 {
    let shared = a.intersection(b).count();
    let denominator = match metric {
        SimilarityMetric::Jaccard => a.len() + b.len() - shared,
        SimilarityMetric::Overlap => a.len().min(b.len()),
    };
    if denominator == 0 {
        0.0
    } else {
        shared as f64 / denominator as f64
    }
}

pub fn same_device(i1: &ScanInstance, i2: &ScanInstance, cfg: &SimilarityConfig) -> bool {
    if i1.mac == i2.mac {
        true
    } else if i1.has_wps && i2.has_wps {
        // two WPS instances without UUID-E carry no evidence either way
        i1.uuid_e.is_some() && i1.uuid_e == i2.uuid_e
    } else if i1.fingerprint == i2.fingerprint {
        cfg.accepts(ssid_similarity(&i1.ssids, &i2.ssids, cfg.metric))
    } else {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceRef {
    pub first_ts: Timestamp,
    pub last_ts: Timestamp,
    pub id: usize,
}

impl From<&ScanInstance> for InstanceRef {
    fn from(i: &ScanInstance) -> Self {
        InstanceRef {
            first_ts: i.first_ts,
            last_ts: i.last_ts,
            id: i.id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceCluster {
    pub id: usize,
    /// Member instances ordered by first timestamp.
    pub instances: Vec<InstanceRef>,
    pub macs: BTreeSet<MacAddress>,
    #[serde(with = "hexser::byte_set")]
    pub ssid_union: BTreeSet<Vec<u8>>,
    pub fingerprints: BTreeSet<Fingerprint>,
    #[serde(with = "hexser::array_set")]
    pub uuid_es: BTreeSet<[u8; 16]>,
    /// Every member MAC is randomized.
    pub randomized: bool,
    /// Only one member instance.
    pub singleton: bool,
}

impl DeviceCluster {
    pub fn from_instances<'a>(id: usize, members: impl IntoIterator<Item = &'a ScanInstance>) -> Self {
        let mut cluster = DeviceCluster {
            id,
            instances: Vec::new(),
            macs: BTreeSet::new(),
            ssid_union: BTreeSet::new(),
            fingerprints: BTreeSet::new(),
            uuid_es: BTreeSet::new(),
            randomized: true,
            singleton: false,
        };
        for inst in members {
            cluster.instances.push(InstanceRef::from(inst));
            cluster.macs.insert(inst.mac);
            cluster.ssid_union.extend(inst.ssids.iter().cloned());
            cluster.fingerprints.insert(inst.fingerprint);
            cluster.uuid_es.extend(inst.uuid_e);
        }
        cluster.finish();
        cluster
    }

    /// Union of several clusters under a new id.
    pub fn merged<'a>(id: usize, parts: impl IntoIterator<Item = &'a DeviceCluster>) -> Self {
        let mut cluster = DeviceCluster {
            id,
            instances: Vec::new(),
            macs: BTreeSet::new(),
            ssid_union: BTreeSet::new(),
            fingerprints: BTreeSet::new(),
            uuid_es: BTreeSet::new(),
            randomized: true,
            singleton: false,
        };
        for part in parts {
            cluster.instances.extend_from_slice(&part.instances);
            cluster.macs.extend(part.macs.iter().copied());
            cluster.ssid_union.extend(part.ssid_union.iter().cloned());
            cluster.fingerprints.extend(part.fingerprints.iter().copied());
            cluster.uuid_es.extend(part.uuid_es.iter().copied());
        }
        cluster.finish();
        cluster
    }

    fn finish(&mut self) {
        self.instances.sort();
        self.randomized = !self.macs.is_empty()
            && self.macs.iter().all(|m| m.classify() == MacClass::Randomized);
        self.singleton = self.instances.len() == 1;
    }

    pub fn earliest(&self) -> Timestamp {
        self.instances.first().map(|i| i.first_ts).unwrap_or_default()
    }

    pub fn instance_ids(&self) -> BTreeSet<usize> {
        self.instances.iter().map(|i| i.id).collect()
    }
}

/// Orders clusters by earliest member (ties by smallest instance id) and
/// renumbers them.
pub(crate) fn order_and_number(mut clusters: Vec<DeviceCluster>) -> Vec<DeviceCluster> {
    clusters.sort_by_key(|c| {
        (
            c.earliest(),
            c.instances.iter().map(|i| i.id).min().unwrap_or(usize::MAX),
        )
    });
    for (id, c) in clusters.iter_mut().enumerate() {
        c.id = id;
    }
    clusters
}

/// Drops instances whose source MAC is a group address.
pub fn individual_instances(instances: &[ScanInstance]) -> Vec<ScanInstance> {
    instances
        .iter()
        .filter(|i| i.class() != MacClass::Group)
        .cloned()
        .collect()
}

/// Connected components of `same_device` over all instance pairs.
pub fn cluster_devices(instances: &[ScanInstance], cfg: &SimilarityConfig) -> Vec<DeviceCluster> {
    let n = instances.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..n)
                .filter(move |&j| same_device(&instances[i], &instances[j], cfg))
                .map(move |j| (i, j))
        })
        .collect();
    let mut uf = UnionFind::new(n);
    for (i, j) in edges {
        uf.union(i, j);
    }
    let clusters = uf
        .groups()
        .into_iter()
        .map(|members| DeviceCluster::from_instances(0, members.into_iter().map(|k| &instances[k])))
        .collect();
    order_and_number(clusters)
}

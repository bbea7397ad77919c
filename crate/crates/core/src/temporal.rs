//! Temporal pattern matching: a device's scan instances are grouped into
//! presence sessions, and devices with the same number of sessions that
//! overlap in time are merged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{order_and_number, DeviceCluster};
use crate::error::{Error, Result};
use crate::frame::Timestamp;
use crate::unionfind::UnionFind;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MergeScope {
    /// Only devices whose MACs are all randomized take part.
    #[default]
    #[value(name = "randomized")]
    RandomizedOnly,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    /// Seconds between instances that start a new appearance cluster.
    pub gap: f64,
    /// Seconds added on both sides of each appearance cluster.
    pub pad: f64,
    /// Minimum mean interval overlap for a merge.
    pub overlap: f64,
    pub scope: MergeScope,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            gap: 600.0,
            pad: 30.0,
            overlap: 0.5,
            scope: MergeScope::RandomizedOnly,
        }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap > 0.0 && self.gap.is_finite()) {
            return Err(Error::config(format!("gap must be positive, got {}", self.gap)));
        }
        if !(self.pad >= 0.0 && self.pad.is_finite()) {
            return Err(Error::config(format!("pad must be non-negative, got {}", self.pad)));
        }
        if !(self.overlap > 0.0 && self.overlap <= 1.0) {
            return Err(Error::config(format!(
                "overlap threshold must lie in (0, 1], got {}",
                self.overlap
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppearanceCluster {
    pub start: Timestamp,
    pub end: Timestamp,
    /// Instance ids.
    pub member_instances: Vec<usize>,
}

impl AppearanceCluster {
    fn len_micros(&self) -> i64 {
        self.end.0 - self.start.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalProfile {
    pub device: usize,
    pub clusters: Vec<AppearanceCluster>,
}

fn micros(secs: f64) -> i64 {
    (secs * 1e6).round() as i64
}

/// Single-linkage clustering of instance start times.
pub fn cluster_appearances(device: &DeviceCluster, gap: f64, pad: f64) -> TemporalProfile {
    let gap = micros(gap);
    let pad = micros(pad);
    let mut starts: Vec<(Timestamp, usize)> = device.instances.iter().map(|i| (i.first_ts, i.id)).collect();
    starts.sort();

    let mut clusters: Vec<AppearanceCluster> = Vec::new();
    let mut last: Option<Timestamp> = None;
    for (ts, id) in starts {
        match (last, clusters.last_mut()) {
            (Some(prev), Some(c)) if ts.0 - prev.0 <= gap => {
                c.end = Timestamp(ts.0 + pad);
                c.member_instances.push(id);
            }
            _ => clusters.push(AppearanceCluster {
                start: Timestamp(ts.0 - pad),
                end: Timestamp(ts.0 + pad),
                member_instances: vec![id],
            }),
        }
        last = Some(ts);
    }
    TemporalProfile {
        device: device.id,
        clusters,
    }
}

fn interval_score(a: &AppearanceCluster, b: &AppearanceCluster) -> f64 {
    let inter = a.end.0.min(b.end.0) - a.start.0.max(b.start.0);
    if inter < 0 {
        return 0.0;
    }
    let union = a.len_micros() + b.len_micros() - inter;
    if union == 0 {
        // two identical points
        return 1.0;
    }
    inter as f64 / union as f64
}

/// Mean intersection-over-union of rank-paired clusters.
///
/// Panics if the profiles have different cluster counts.
pub fn profile_overlap(a: &TemporalProfile, b: &TemporalProfile) -> f64 {
    assert_eq!(
        a.clusters.len(),
        b.clusters.len(),
        "profile_overlap needs equal appearance-cluster counts"
    );
    if a.clusters.is_empty() {
        return 0.0;
    }
    let total: f64 = a
        .clusters
        .iter()
        .zip(&b.clusters)
        .map(|(x, y)| interval_score(x, y))
        .sum();
    total / a.clusters.len() as f64
}

fn in_scope(device: &DeviceCluster, scope: MergeScope) -> bool {
    match scope {
        MergeScope::All => true,
        MergeScope::RandomizedOnly => device.randomized,
    }
}

/// Merges devices with matching temporal patterns until nothing changes.
pub fn temporal_merge(devices: &[DeviceCluster], cfg: &MergeConfig) -> Vec<DeviceCluster> {
    let mut current = order_and_number(devices.to_vec());
    loop {
        let candidates: Vec<usize> = (0..current.len())
            .filter(|&i| in_scope(&current[i], cfg.scope))
            .collect();
        let profiles: Vec<TemporalProfile> = candidates
            .par_iter()
            .map(|&i| cluster_appearances(&current[i], cfg.gap, cfg.pad))
            .collect();

        let mut uf = UnionFind::new(current.len());
        let mut merged_any = false;
        for a in 0..candidates.len() {
            for b in (a + 1)..candidates.len() {
                let (pa, pb) = (&profiles[a], &profiles[b]);
                if pa.clusters.len() == pb.clusters.len() && profile_overlap(pa, pb) >= cfg.overlap {
                    merged_any |= uf.union(candidates[a], candidates[b]);
                }
            }
        }
        if !merged_any {
            return current;
        }
        let next = uf
            .groups()
            .into_iter()
            .map(|g| DeviceCluster::merged(0, g.iter().map(|&i| &current[i])))
            .collect();
        current = order_and_number(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::InstanceRef;
    use crate::frame::MacAddress;
    use proptest::prelude::*;

    const S: i64 = 1_000_000;

    fn device(id: usize, mac_first: u8, times: &[i64]) -> DeviceCluster {
        let mut d = DeviceCluster {
            id,
            instances: times
                .iter()
                .enumerate()
                .map(|(k, &t)| InstanceRef {
                    first_ts: Timestamp(t * S),
                    last_ts: Timestamp(t * S + 40_000),
                    id: id * 1000 + k,
                })
                .collect(),
            macs: [MacAddress([mac_first, 0, 0, 0, 0, id as u8])].into(),
            ssid_union: Default::default(),
            fingerprints: Default::default(),
            uuid_es: Default::default(),
            randomized: false,
            singleton: false,
        };
        d = DeviceCluster::merged(id, [&d]);
        d
    }

    fn profile(intervals: &[(i64, i64)]) -> TemporalProfile {
        TemporalProfile {
            device: 0,
            clusters: intervals
                .iter()
                .map(|&(s, e)| AppearanceCluster {
                    start: Timestamp(s * S),
                    end: Timestamp(e * S),
                    member_instances: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn gap_splits_clusters() {
        let p = cluster_appearances(&device(0, 2, &[0, 10, 3600]), 600.0, 30.0);
        assert_eq!(p.clusters.len(), 2);
        assert_eq!((p.clusters[0].start, p.clusters[0].end), (Timestamp(-30 * S), Timestamp(40 * S)));
        assert_eq!(p.clusters[1].member_instances, vec![2]);
    }

    #[test]
    fn single_instance_point_cluster() {
        let p = cluster_appearances(&device(0, 2, &[100]), 600.0, 30.0);
        assert_eq!(p.clusters.len(), 1);
        assert_eq!(p.clusters[0].len_micros(), 60 * S);
    }

    #[test]
    fn overlap_examples() {
        let a = profile(&[(0, 100), (200, 300)]);
        assert_eq!(profile_overlap(&a, &a), 1.0);
        assert_eq!(profile_overlap(&a, &profile(&[(500, 600), (700, 800)])), 0.0);
        assert_eq!(profile_overlap(&profile(&[(0, 100)]), &profile(&[(50, 150)])), 1.0 / 3.0);
        assert_eq!(profile_overlap(&profile(&[(5, 5)]), &profile(&[(5, 5)])), 1.0);
    }

    #[test]
    #[should_panic(expected = "equal appearance-cluster counts")]
    fn unequal_counts_are_a_caller_bug() {
        profile_overlap(&profile(&[(0, 1)]), &profile(&[(0, 1), (2, 3)]));
    }

    #[test]
    fn interleaved_pseudo_devices_collapse() {
        // three pseudo-devices taking turns every 60 s across two sessions
        let sessions = [0i64, 10_000];
        let devs: Vec<_> = (0..3)
            .map(|k| {
                let times: Vec<i64> = sessions
                    .iter()
                    .flat_map(|&s| (0..10).map(move |j| s + 60 * (3 * j + k)))
                    .collect();
                device(k as usize, 0x06, &times)
            })
            .collect();
        let merged = temporal_merge(&devs, &MergeConfig::default());
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].instances.len(), 60);
    }

    #[test]
    fn unequal_counts_never_merge() {
        let a = device(0, 0x06, &[0, 60, 5000]);
        let b = device(1, 0x06, &[30, 90]);
        assert_eq!(temporal_merge(&[a, b], &MergeConfig::default()).len(), 2);
    }

    #[test]
    fn disjoint_presence_stays_apart() {
        let a = device(0, 0x06, &[0, 60, 120]);
        let b = device(1, 0x06, &[5000, 5060]);
        assert_eq!(temporal_merge(&[a, b], &MergeConfig::default()).len(), 2);
    }

    #[test]
    fn scope_excludes_global_devices() {
        let a = device(0, 0x00, &[0, 60, 120]);
        let b = device(1, 0x00, &[30, 90, 150]);
        assert_eq!(temporal_merge(&[a.clone(), b.clone()], &MergeConfig::default()).len(), 2);
        let all = MergeConfig { scope: MergeScope::All, ..Default::default() };
        assert_eq!(temporal_merge(&[a, b], &all).len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(MergeConfig::default().validate().is_ok());
        assert!(MergeConfig { gap: 0.0, ..Default::default() }.validate().is_err());
        assert!(MergeConfig { pad: -1.0, ..Default::default() }.validate().is_err());
        assert!(MergeConfig { overlap: 0.0, ..Default::default() }.validate().is_err());
        assert!(MergeConfig { overlap: 1.0, ..Default::default() }.validate().is_ok());
    }

    fn arb_devices() -> impl Strategy<Value = Vec<DeviceCluster>> {
        proptest::collection::vec(proptest::collection::vec(0i64..20_000, 1..8), 1..8).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, times)| device(i, 0x02, &times))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn merge_coarsens_and_conserves(devs in arb_devices(), tau in 0.05f64..=1.0) {
            let cfg = MergeConfig { overlap: tau, ..Default::default() };
            let merged = temporal_merge(&devs, &cfg);
            prop_assert!(merged.len() <= devs.len());
            let before: usize = devs.iter().map(|d| d.instances.len()).sum();
            let after: usize = merged.iter().map(|d| d.instances.len()).sum();
            prop_assert_eq!(before, after);
            for d in &devs {
                let ids = d.instance_ids();
                prop_assert!(merged.iter().any(|m| ids.is_subset(&m.instance_ids())));
            }
        }

        #[test]
        fn tau_one_merges_only_identical_profiles(devs in arb_devices()) {
            let cfg = MergeConfig { overlap: 1.0, ..Default::default() };
            let merged = temporal_merge(&devs, &cfg);
            let profiles: Vec<_> = devs.iter().map(|d| cluster_appearances(d, cfg.gap, cfg.pad)).collect();
            for m in &merged {
                let ids = m.instance_ids();
                let parts: Vec<_> = devs.iter().enumerate().filter(|(_, d)| d.instance_ids().is_subset(&ids)).map(|(i, _)| i).collect();
                if parts.len() > 1 {
                    let spans = |p: &TemporalProfile| p.clusters.iter().map(|c| (c.start, c.end)).collect::<Vec<_>>();
                    let first = spans(&profiles[parts[0]]);
                    prop_assert!(parts.iter().all(|&p| spans(&profiles[p]) == first));
                }
            }
        }
    }
}

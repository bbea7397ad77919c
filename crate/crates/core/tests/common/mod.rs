#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use probelink::device::DeviceCluster;
use probelink::instance::ScanInstance;
use probelink::synth::{DeviceProfile, IeConfig, PnlPolicy, Randomization, Scenario, WpsConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Partition = BTreeSet<BTreeSet<usize>>;

pub const VENDOR_MS: &str = "0050f208002400";
pub const VENDOR_BCM: &str = "00904c0408bf0c";
pub const VENDOR_APPLE: &str = "0017f20a000104";
pub const HT_CAP: &str = "2d1a2d4017ffff000000000000000000000000000000000000000000";
pub const VHT_CAP: &str = "b2f9838fbaff0000";
pub const EXT_CAP: &str = "0400000000000040";

pub fn ie_preset(n: usize) -> IeConfig {
    let mut ie = IeConfig::default();
    match n % 4 {
        0 => {}
        1 => {
            ie.ht_cap = Some(HT_CAP.into());
            ie.vendor = vec![VENDOR_MS.into()];
        }
        2 => {
            ie.ht_cap = Some(HT_CAP.into());
            ie.vht_cap = Some(VHT_CAP.into());
            ie.ext_cap = Some(EXT_CAP.into());
            ie.vendor = vec![VENDOR_BCM.into(), VENDOR_APPLE.into()];
        }
        _ => {
            ie.ext_rates = None;
            ie.ext_cap = Some(EXT_CAP.into());
        }
    }
    ie
}

/// Small mixed scenario; every knob drawn from `seed`.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let devices = (0..n)
        .map(|i| {
            let mut t = rng.random_range(0.0..2000.0f64).round();
            let sessions = (0..rng.random_range(1..=3))
                .map(|_| {
                    let start = t;
                    let end = start + rng.random_range(200.0..900.0f64).round();
                    t = end + rng.random_range(700.0..5000.0f64).round();
                    [start, end]
                })
                .collect();
            let mut d = DeviceProfile::new(format!("dev{i}"), sessions);
            d.randomization = match rng.random_range(0..4) {
                0 => Randomization::None,
                1 => Randomization::PerSession,
                2 => Randomization::PerScan,
                _ => Randomization::PerProbe,
            };
            d.scan_period_s = rng.random_range(30..=120) as f64;
            d.burst_size = rng.random_range(1..=4);
            d.pnl = (0..rng.random_range(0..=5)).map(|j| format!("d{i}-net{j}")).collect();
            d.pnl_policy = if d.pnl.is_empty() {
                PnlPolicy::WildcardOnly
            } else {
                let m = d.pnl.len();
                let min_k = m.div_ceil(d.burst_size);
                match rng.random_range(0..3) {
                    0 if min_k == 1 => PnlPolicy::Full,
                    0 | 1 => PnlPolicy::RotatingSubset(rng.random_range(min_k..=m)),
                    _ => PnlPolicy::WildcardOnly,
                }
            };
            d.ie = ie_preset(rng.random_range(0..4));
            if rng.random_bool(0.15) {
                let uuid: [u8; 16] = rng.random();
                d.wps = Some(WpsConfig {
                    uuid_e: Some(hex::encode(uuid)),
                    name: Some(format!("dev{i}")),
                    manufacturer: Some("Acme".into()),
                    model: None,
                });
            }
            d
        })
        .collect();
    Scenario {
        seed,
        epoch_s: 1_638_316_800,
        devices,
    }
}

pub fn partition<I: IntoIterator<Item = usize>>(groups: impl IntoIterator<Item = I>) -> Partition {
    groups.into_iter().map(|g| g.into_iter().collect()).collect()
}

pub fn partition_from_labels(labels: &[usize]) -> Partition {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().insert(i);
    }
    groups.into_values().collect()
}

pub fn instance_partition(instances: &[ScanInstance]) -> Partition {
    partition(instances.iter().map(|i| i.probe_indices.iter().copied()))
}

/// Devices as sets of probe indices.
pub fn device_partition(devices: &[DeviceCluster], instances: &[ScanInstance]) -> Partition {
    partition(devices.iter().map(|d| {
        d.instance_ids()
            .into_iter()
            .flat_map(|id| instances[id].probe_indices.iter().copied())
            .collect::<Vec<_>>()
    }))
}

/// Per-probe cluster label; probes outside every group get their own label.
pub fn labels_of(p: &Partition, n: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| p.len() + i).collect();
    for (k, g) in p.iter().enumerate() {
        for &i in g {
            labels[i] = k;
        }
    }
    labels
}

fn choose2(n: u128) -> u128 {
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand index from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as u128;
    let mut table: BTreeMap<(usize, usize), u128> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u128> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u128> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: u128 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: u128 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: u128 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n) as f64;
    let expected = sum_a as f64 * sum_b as f64 / total;
    let max = (sum_a + sum_b) as f64 / 2.0;
    if max == expected {
        return if index as f64 == expected { 1.0 } else { 0.0 };
    }
    (index as f64 - expected) / (max - expected)
}

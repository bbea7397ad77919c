//! Synthetic probe-request captures with ground-truth labels.
//!
//! Each device emits scan bursts every `scan_period_s` seconds during its
//! presence sessions. Probes within a burst carry consecutive sequence
//! numbers; between bursts the counter jumps by 5 to 200. Intra-burst gaps
//! come from a lognormal body capped at 65 ms plus a uniform tail up to
//! `tail_max_s`, with `fast_fraction` of the mass in the body.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capture::CaptureRecord;
use crate::error::{Error, Result};
use crate::frame::{
    encode_wps_attributes, InformationElement, MacAddress, ProbeRequest, Timestamp, WpsAttribute,
    SEQ_MODULUS, TAG_EXT_CAPABILITIES, TAG_EXT_SUPPORTED_RATES, TAG_HT_CAPABILITIES, TAG_SSID,
    TAG_SUPPORTED_RATES, TAG_VENDOR_SPECIFIC, TAG_VHT_CAPABILITIES, WPS_ATTR_DEVICE_NAME,
    WPS_ATTR_MANUFACTURER, WPS_ATTR_MODEL_NAME, WPS_ATTR_UUID_E,
};

/// Upper bound of the fast body of the intra-burst gap distribution.
pub const BURST_GAP_LIMIT_S: f64 = 0.065;
pub const DEFAULT_EPOCH_S: i64 = 1_638_316_800;

const SCAN_SEQ_JUMP: std::ops::RangeInclusive<u16> = 5..=200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Randomization {
    #[default]
    None,
    PerSession,
    PerScan,
    PerProbe,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PnlPolicy {
    /// Every scan transmits the whole list.
    Full,
    /// The list is dealt into `k` disjoint subsets; scan `n` sends subset `n % k`.
    RotatingSubset(usize),
    #[default]
    WildcardOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IeConfig {
    #[serde(default = "default_rates")]
    pub rates: String,
    #[serde(default = "default_ext_rates")]
    pub ext_rates: Option<String>,
    #[serde(default)]
    pub ht_cap: Option<String>,
    #[serde(default)]
    pub ext_cap: Option<String>,
    #[serde(default)]
    pub vht_cap: Option<String>,
    /// Vendor-specific element payloads, OUI first.
    #[serde(default)]
    pub vendor: Vec<String>,
}

fn default_rates() -> String {
    "82848b96".into()
}

fn default_ext_rates() -> Option<String> {
    Some("0c1218243048606c".into())
}

impl Default for IeConfig {
    fn default() -> Self {
        IeConfig {
            rates: default_rates(),
            ext_rates: default_ext_rates(),
            ht_cap: None,
            ext_cap: None,
            vht_cap: None,
            vendor: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WpsConfig {
    pub uuid_e: Option<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub manufacturer: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapModel {
    pub fast_fraction: f64,
    pub median_ms: f64,
    pub sigma: f64,
    pub tail_max_s: f64,
}

impl Default for GapModel {
    fn default() -> Self {
        GapModel {
            fast_fraction: 0.98,
            median_ms: 15.0,
            sigma: 0.6,
            tail_max_s: 2.0,
        }
    }
}

impl GapModel {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random_bool(self.fast_fraction) {
            let body = LogNormal::new((self.median_ms / 1000.0).ln(), self.sigma)
                .expect("validated parameters");
            loop {
                let g = body.sample(rng);
                if g < BURST_GAP_LIMIT_S {
                    return g;
                }
            }
        } else {
            rng.random_range(BURST_GAP_LIMIT_S..self.tail_max_s)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub id: String,
    #[serde(default)]
    pub randomization: Randomization,
    pub scan_period_s: f64,
    pub burst_size: usize,
    /// `[start_s, end_s)` offsets from the scenario epoch.
    pub sessions: Vec<[f64; 2]>,
    #[serde(default)]
    pub pnl: Vec<String>,
    #[serde(default)]
    pub pnl_policy: PnlPolicy,
    #[serde(default)]
    pub ie: IeConfig,
    #[serde(default)]
    pub wps: Option<WpsConfig>,
    /// Three hex octets for the global address; random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oui: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_sn: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapModel>,
}

impl DeviceProfile {
    /// A minimal profile: global MAC, wildcard probes only.
    pub fn new(id: impl Into<String>, sessions: Vec<[f64; 2]>) -> Self {
        DeviceProfile {
            id: id.into(),
            randomization: Randomization::None,
            scan_period_s: 60.0,
            burst_size: 4,
            sessions,
            pnl: Vec::new(),
            pnl_policy: PnlPolicy::WildcardOnly,
            ie: IeConfig::default(),
            wps: None,
            oui: None,
            initial_sn: None,
            gap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_epoch")]
    pub epoch_s: i64,
    pub devices: Vec<DeviceProfile>,
}

fn default_epoch() -> i64 {
    DEFAULT_EPOCH_S
}

fn parse_hex(path: &str, s: &str) -> Result<Vec<u8>> {
    hex::decode(s).map_err(|e| Error::config(format!("{path}: invalid hex: {e}")))
}

fn element(path: &str, tag: u8, payload: Vec<u8>) -> Result<InformationElement> {
    InformationElement::new(tag, payload).map_err(|e| Error::config(format!("{path}: {e}")))
}

/// Validated, byte-level form of a profile.
struct DevicePlan {
    stable: Vec<InformationElement>,
    wps: Option<InformationElement>,
    scan_sets: Vec<Vec<Vec<u8>>>,
    oui: Option<[u8; 3]>,
    gap: GapModel,
}

fn build_wps(path: &str, w: &WpsConfig) -> Result<InformationElement> {
    let attr = |kind: u16, value: &[u8]| WpsAttribute {
        kind,
        value: value.to_vec(),
    };
    let mut attrs = vec![
        attr(0x104A, &[0x10]),
        attr(0x103A, &[0x00]),
        attr(0x1008, &[0x31, 0x48]),
    ];
    if let Some(uuid) = &w.uuid_e {
        let uuid = parse_hex(&format!("{path}.uuid_e"), uuid)?;
        if uuid.len() != 16 {
            return Err(Error::config(format!("{path}.uuid_e: must be 16 bytes, got {}", uuid.len())));
        }
        attrs.push(attr(WPS_ATTR_UUID_E, &uuid));
    }
    attrs.push(attr(0x1054, &[0x00, 0x0A, 0x00, 0x50, 0xF2, 0x04, 0x00, 0x05]));
    attrs.push(attr(0x103C, &[0x03]));
    attrs.push(attr(0x1002, &[0x00, 0x00]));
    attrs.push(attr(0x1009, &[0x00, 0x00]));
    attrs.push(attr(0x1012, &[0x00, 0x00]));
    if let Some(m) = &w.manufacturer {
        attrs.push(attr(WPS_ATTR_MANUFACTURER, m.as_bytes()));
    }
    if let Some(m) = &w.model {
        attrs.push(attr(WPS_ATTR_MODEL_NAME, m.as_bytes()));
    }
    attrs.push(attr(0x1024, b"1"));
    if let Some(n) = &w.name {
        attrs.push(attr(WPS_ATTR_DEVICE_NAME, n.as_bytes()));
    }
    element(path, TAG_VENDOR_SPECIFIC, encode_wps_attributes(&attrs))
}

impl DeviceProfile {
    fn plan(&self, path: &str) -> Result<DevicePlan> {
        let err = |field: &str, msg: String| Error::config(format!("{path}.{field}: {msg}"));
        if !(self.scan_period_s > 0.0 && self.scan_period_s.is_finite()) {
            return Err(err("scan_period_s", format!("must be positive, got {}", self.scan_period_s)));
        }
        if self.burst_size == 0 {
            return Err(err("burst_size", "must be at least 1".into()));
        }
        let gap = self.gap.unwrap_or_default();
        if !(0.0..=1.0).contains(&gap.fast_fraction)
            || !(gap.median_ms > 0.0 && gap.median_ms < BURST_GAP_LIMIT_S * 1000.0)
            || !(gap.sigma > 0.0 && gap.tail_max_s > BURST_GAP_LIMIT_S)
        {
            return Err(err("gap", format!("invalid gap model {gap:?}")));
        }
        if self.scan_period_s <= self.burst_size as f64 * gap.tail_max_s {
            return Err(err(
                "scan_period_s",
                format!(
                    "must exceed burst_size × gap.tail_max_s = {} so bursts cannot overlap",
                    self.burst_size as f64 * gap.tail_max_s
                ),
            ));
        }
        let mut last_end = f64::NEG_INFINITY;
        for (i, &[start, end]) in self.sessions.iter().enumerate() {
            if !(start.is_finite() && end.is_finite() && start >= 0.0 && start < end) {
                return Err(err(&format!("sessions[{i}]"), format!("invalid interval [{start}, {end}]")));
            }
            if start < last_end {
                return Err(err(&format!("sessions[{i}]"), "overlaps or precedes the previous session".into()));
            }
            last_end = end;
        }
        if let Some(sn) = self.initial_sn {
            if sn >= SEQ_MODULUS {
                return Err(err("initial_sn", format!("{sn} does not fit in 12 bits")));
            }
        }
        for (i, s) in self.pnl.iter().enumerate() {
            if s.is_empty() || s.len() > 32 {
                return Err(err(&format!("pnl[{i}]"), "SSID must be 1 to 32 bytes".into()));
            }
        }
        let distinct: BTreeSet<_> = self.pnl.iter().collect();
        if distinct.len() != self.pnl.len() {
            return Err(err("pnl", "duplicate SSID".into()));
        }
        let scan_sets: Vec<Vec<Vec<u8>>> = match self.pnl_policy {
            PnlPolicy::WildcardOnly => vec![Vec::new()],
            PnlPolicy::Full => {
                if self.pnl.is_empty() {
                    return Err(err("pnl", "empty PNL requires pnl_policy wildcard-only".into()));
                }
                vec![self.pnl.iter().map(|s| s.as_bytes().to_vec()).collect()]
            }
            PnlPolicy::RotatingSubset(k) => {
                if k == 0 || k > self.pnl.len() {
                    return Err(err("pnl_policy", format!("rotating-subset {k} needs 1 ≤ k ≤ |pnl| = {}", self.pnl.len())));
                }
                (0..k)
                    .map(|j| {
                        self.pnl
                            .iter()
                            .skip(j)
                            .step_by(k)
                            .map(|s| s.as_bytes().to_vec())
                            .collect()
                    })
                    .collect()
            }
        };
        let widest = scan_sets.iter().map(Vec::len).max().unwrap_or(0);
        if widest > self.burst_size {
            return Err(err(
                "burst_size",
                format!("must be at least {widest} to transmit every SSID of a scan"),
            ));
        }

        let mut stable = vec![element(
            &format!("{path}.ie.rates"),
            TAG_SUPPORTED_RATES,
            parse_hex(&format!("{path}.ie.rates"), &self.ie.rates)?,
        )?];
        let optional = [
            ("ext_rates", TAG_EXT_SUPPORTED_RATES, &self.ie.ext_rates),
            ("ht_cap", TAG_HT_CAPABILITIES, &self.ie.ht_cap),
            ("ext_cap", TAG_EXT_CAPABILITIES, &self.ie.ext_cap),
            ("vht_cap", TAG_VHT_CAPABILITIES, &self.ie.vht_cap),
        ];
        for (name, tag, value) in optional {
            if let Some(v) = value {
                let p = format!("{path}.ie.{name}");
                stable.push(element(&p, tag, parse_hex(&p, v)?)?);
            }
        }
        for (i, v) in self.ie.vendor.iter().enumerate() {
            let p = format!("{path}.ie.vendor[{i}]");
            let payload = parse_hex(&p, v)?;
            if payload.len() < 3 {
                return Err(Error::config(format!("{p}: vendor payload needs a 3-byte OUI")));
            }
            stable.push(element(&p, TAG_VENDOR_SPECIFIC, payload)?);
        }
        let wps = self
            .wps
            .as_ref()
            .map(|w| build_wps(&format!("{path}.wps"), w))
            .transpose()?;
        let oui = match &self.oui {
            Some(s) => {
                let b = parse_hex(&format!("{path}.oui"), s)?;
                let oui: [u8; 3] = b
                    .try_into()
                    .map_err(|_| err("oui", "must be 3 bytes".into()))?;
                if oui[0] & 0x03 != 0 {
                    return Err(err("oui", "must be a global unicast OUI".into()));
                }
                Some(oui)
            }
            None => None,
        };
        Ok(DevicePlan {
            stable,
            wps,
            scan_sets,
            oui,
            gap,
        })
    }
}

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            Error::config(format!("{}: {}", e.path(), e.inner()))
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.plans().map(|_| ())
    }

    fn plans(&self) -> Result<Vec<DevicePlan>> {
        let mut seen = HashMap::new();
        for (i, d) in self.devices.iter().enumerate() {
            if let Some(prev) = seen.insert(d.id.as_str(), i) {
                return Err(Error::config(format!(
                    "devices[{i}].id: {:?} already used by devices[{prev}]",
                    d.id
                )));
            }
        }
        self.devices
            .iter()
            .enumerate()
            .map(|(i, d)| d.plan(&format!("devices[{i}] ({})", d.id)))
            .collect()
    }
}

pub fn scenario_from_file(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_json_str(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeLabel {
    /// Index into the scenario's device list.
    pub device: usize,
    pub session: usize,
    /// Scan number within the device.
    pub scan: usize,
    /// Globally unique id of the true scan instance; per-probe randomized
    /// devices get one per probe since no observer can join them.
    pub instance: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub device_ids: Vec<String>,
    pub labels: Vec<ProbeLabel>,
    pub expected_instances: usize,
    pub expected_devices: usize,
}

#[derive(Serialize, Deserialize)]
struct TruthSummary {
    probes: usize,
    expected_instances: usize,
    expected_devices: usize,
    device_ids: Vec<String>,
}

impl GroundTruth {
    /// JSON-lines: a summary line followed by one label per probe.
    pub fn to_jsonl(&self) -> String {
        let summary = TruthSummary {
            probes: self.labels.len(),
            expected_instances: self.expected_instances,
            expected_devices: self.expected_devices,
            device_ids: self.device_ids.clone(),
        };
        let mut out = serde_json::to_string(&summary).expect("serializable");
        out.push('\n');
        for l in &self.labels {
            out.push_str(&serde_json::to_string(l).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let summary: TruthSummary = serde_json::from_str(
            lines.next().ok_or_else(|| Error::format("empty ground-truth file"))?,
        )?;
        let labels = lines
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<ProbeLabel>, _>>()?;
        if labels.len() != summary.probes {
            return Err(Error::format(format!(
                "ground truth declares {} probes but has {} labels",
                summary.probes,
                labels.len()
            )));
        }
        Ok(GroundTruth {
            device_ids: summary.device_ids,
            labels,
            expected_instances: summary.expected_instances,
            expected_devices: summary.expected_devices,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub probes: Vec<ProbeRequest>,
    pub truth: GroundTruth,
}

impl SynthOutput {
    pub fn records(&self) -> Vec<CaptureRecord> {
        self.probes.iter().cloned().map(CaptureRecord::from_probe).collect()
    }
}

struct Emitted {
    probe: ProbeRequest,
    device: usize,
    session: usize,
    scan: usize,
    burst_index: usize,
    per_probe: bool,
}

fn random_local_mac(rng: &mut ChaCha8Rng) -> MacAddress {
    let mut o = [0u8; 6];
    rng.fill_bytes(&mut o);
    o[0] = (o[0] & 0xFC) | 0x02;
    MacAddress(o)
}

fn global_mac(rng: &mut ChaCha8Rng, oui: Option<[u8; 3]>) -> MacAddress {
    let mut o = [0u8; 6];
    rng.fill_bytes(&mut o);
    match oui {
        Some(oui) => o[..3].copy_from_slice(&oui),
        None => o[0] &= 0xFC,
    }
    MacAddress(o)
}

fn generate_device(
    index: usize,
    profile: &DeviceProfile,
    plan: &DevicePlan,
    seed: u64,
    epoch_us: i64,
) -> Vec<Emitted> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);

    let mut sn = profile
        .initial_sn
        .unwrap_or_else(|| rng.random_range(0..SEQ_MODULUS));
    let fixed_mac = global_mac(&mut rng, plan.oui);
    let mut out = Vec::new();
    let mut scan = 0usize;
    for (session, &[start, end]) in profile.sessions.iter().enumerate() {
        let session_mac = random_local_mac(&mut rng);
        let mut k = 0u64;
        loop {
            let t = start + k as f64 * profile.scan_period_s;
            if t >= end {
                break;
            }
            if scan > 0 {
                sn = (sn + rng.random_range(SCAN_SEQ_JUMP)) % SEQ_MODULUS;
            }
            let scan_mac = random_local_mac(&mut rng);
            let ssids = &plan.scan_sets[scan % plan.scan_sets.len()];
            let mut ts = epoch_us + (t * 1e6).round() as i64;
            for burst_index in 0..profile.burst_size {
                if burst_index > 0 {
                    ts += ((plan.gap.sample(&mut rng) * 1e6).round() as i64).max(1);
                    sn = (sn + 1) % SEQ_MODULUS;
                }
                let mac = match profile.randomization {
                    Randomization::None => fixed_mac,
                    Randomization::PerSession => session_mac,
                    Randomization::PerScan => scan_mac,
                    Randomization::PerProbe => random_local_mac(&mut rng),
                };
                let ssid = ssids.get(burst_index).cloned().unwrap_or_default();
                let mut elements = Vec::with_capacity(plan.stable.len() + 2);
                elements.push(InformationElement::new(TAG_SSID, ssid).expect("SSID ≤ 32 bytes"));
                elements.extend(plan.stable.iter().cloned());
                elements.extend(plan.wps.iter().cloned());
                out.push(Emitted {
                    probe: ProbeRequest::new(Timestamp(ts), mac, sn, elements)
                        .expect("sequence number reduced mod 4096"),
                    device: index,
                    session,
                    scan,
                    burst_index,
                    per_probe: profile.randomization == Randomization::PerProbe,
                });
            }
            scan += 1;
            k += 1;
        }
    }
    out
}

/// Generates the scenario's capture in timestamp order.
pub fn generate(scenario: &Scenario) -> Result<SynthOutput> {
    let plans = scenario.plans()?;
    let epoch_us = scenario.epoch_s * 1_000_000;
    let mut emitted: Vec<Emitted> = scenario
        .devices
        .par_iter()
        .zip(plans.par_iter())
        .enumerate()
        .flat_map_iter(|(i, (profile, plan))| generate_device(i, profile, plan, scenario.seed, epoch_us))
        .collect();
    emitted.sort_by_key(|e| (e.probe.timestamp(), e.device, e.scan, e.burst_index));

    let mut instance_ids: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut labels = Vec::with_capacity(emitted.len());
    let mut probes = Vec::with_capacity(emitted.len());
    for e in emitted {
        let key = (e.device, e.scan, if e.per_probe { e.burst_index } else { 0 });
        let next = instance_ids.len();
        let instance = *instance_ids.entry(key).or_insert(next);
        labels.push(ProbeLabel {
            device: e.device,
            session: e.session,
            scan: e.scan,
            instance,
        });
        probes.push(e.probe);
    }
    let expected_devices = labels.iter().map(|l| l.device).collect::<BTreeSet<_>>().len();
    Ok(SynthOutput {
        probes,
        truth: GroundTruth {
            device_ids: scenario.devices.iter().map(|d| d.id.clone()).collect(),
            expected_instances: instance_ids.len(),
            expected_devices,
            labels,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{classify_mac, MacClass};

    fn one_device(randomization: Randomization) -> Scenario {
        let mut d = DeviceProfile::new("a", vec![[0.0, 30.0]]);
        d.scan_period_s = 10.0;
        d.randomization = randomization;
        Scenario {
            seed: 11,
            epoch_s: DEFAULT_EPOCH_S,
            devices: vec![d],
        }
    }

    #[test]
    fn counts_forced_by_construction() {
        let out = generate(&one_device(Randomization::None)).unwrap();
        assert_eq!(out.probes.len(), 12);
        assert_eq!(out.truth.expected_instances, 3);
        assert_eq!(out.truth.expected_devices, 1);
        assert_eq!(out.truth.labels.len(), 12);
        assert!(out.probes.iter().all(|p| classify_mac(p.mac()) == MacClass::Global));
    }

    #[test]
    fn per_probe_gives_distinct_randomized_macs() {
        let out = generate(&one_device(Randomization::PerProbe)).unwrap();
        let first_burst: BTreeSet<_> = out
            .probes
            .iter()
            .zip(&out.truth.labels)
            .filter(|(_, l)| l.scan == 0)
            .map(|(p, _)| p.mac())
            .collect();
        assert_eq!(first_burst.len(), 4);
        assert!(first_burst.iter().all(|m| classify_mac(*m) == MacClass::Randomized));
        assert_eq!(out.truth.expected_instances, 12);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = one_device(Randomization::PerScan);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.probes, b.probes);
        assert_eq!(a.truth, b.truth);
        let mut other = s.clone();
        other.seed = 12;
        assert_ne!(generate(&other).unwrap().probes, a.probes);
    }

    #[test]
    fn sequence_numbers_advance_per_device() {
        let mut s = one_device(Randomization::PerScan);
        s.devices[0].sessions = vec![[0.0, 2000.0], [3000.0, 5000.0]];
        s.devices[0].initial_sn = Some(4000);
        let out = generate(&s).unwrap();
        for w in out.probes.windows(2) {
            let d = (w[1].sequence_number() + SEQ_MODULUS - w[0].sequence_number()) % SEQ_MODULUS;
            assert!((1..=200).contains(&d), "step {d}");
        }
        assert_eq!(out.probes[0].sequence_number(), 4000);
    }

    #[test]
    fn rotating_subsets_are_disjoint_and_cycle() {
        let mut s = one_device(Randomization::PerScan);
        s.devices[0].pnl = (0..6).map(|i| format!("net{i}")).collect();
        s.devices[0].pnl_policy = PnlPolicy::RotatingSubset(3);
        s.devices[0].sessions = vec![[0.0, 60.0]];
        let out = generate(&s).unwrap();
        let per_scan = |scan: usize| -> BTreeSet<Vec<u8>> {
            out.probes
                .iter()
                .zip(&out.truth.labels)
                .filter(|(_, l)| l.scan == scan)
                .filter_map(|(p, _)| p.ssid().map(<[u8]>::to_vec))
                .collect()
        };
        assert_eq!(per_scan(0), [b"net0".to_vec(), b"net3".to_vec()].into());
        assert_eq!(per_scan(1), [b"net1".to_vec(), b"net4".to_vec()].into());
        assert_eq!(per_scan(3), per_scan(0));
        assert!(per_scan(0).is_disjoint(&per_scan(1)));
    }

    #[test]
    fn gap_fraction_near_target() {
        let model = GapModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let fast = (0..n).filter(|_| model.sample(&mut rng) < BURST_GAP_LIMIT_S).count();
        let frac = fast as f64 / n as f64;
        assert!((frac - 0.98).abs() < 0.01, "{frac}");
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = r#"{"seed":1,"devices":[{"id":"x","scan_period_s":-5,"burst_size":1,"sessions":[[0,10]]}]}"#;
        let e = Scenario::from_json_str(bad).unwrap_err().to_string();
        assert!(e.contains("scan_period"), "{e}");

        let unknown = r#"{"seed":1,"devices":[{"id":"x","scan_period_s":60,"burst_size":1,"sessions":[[0,10]],"colour":1}]}"#;
        let e = Scenario::from_json_str(unknown).unwrap_err().to_string();
        assert!(e.contains("devices[0]") && e.contains("colour"), "{e}");

        let overlap = r#"{"seed":1,"devices":[{"id":"x","scan_period_s":60,"burst_size":1,"sessions":[[0,100],[50,200]]}]}"#;
        assert!(Scenario::from_json_str(overlap).unwrap_err().to_string().contains("sessions[1]"));

        let empty_pnl = r#"{"seed":1,"devices":[{"id":"x","scan_period_s":60,"burst_size":1,"sessions":[[0,10]],"pnl_policy":"full"}]}"#;
        let e = Scenario::from_json_str(empty_pnl).unwrap_err();
        assert!(matches!(e, Error::Config(_)) && e.to_string().contains("(x)"));
    }

    #[test]
    fn minimal_config_parses() {
        let s = Scenario::from_json_str(
            r#"{"seed":3,"devices":[{"id":"p","scan_period_s":30,"burst_size":2,"sessions":[[0,60]]}]}"#,
        )
        .unwrap();
        assert_eq!(s.devices.len(), 1);
        assert_eq!(s.epoch_s, DEFAULT_EPOCH_S);
        assert_eq!(generate(&s).unwrap().probes.len(), 4);
    }

    #[test]
    fn truth_sidecar_round_trip() {
        let out = generate(&one_device(Randomization::PerSession)).unwrap();
        let text = out.truth.to_jsonl();
        assert_eq!(text.lines().count(), out.probes.len() + 1);
        assert_eq!(GroundTruth::from_jsonl(&text).unwrap(), out.truth);
    }

    #[test]
    fn wps_profile_carries_uuid() {
        let mut s = one_device(Randomization::PerProbe);
        s.devices[0].wps = Some(WpsConfig {
            uuid_e: Some("00112233445566778899aabbccddeeff".into()),
            name: Some("Printer".into()),
            manufacturer: Some("ACME".into()),
            model: Some("P-1".into()),
        });
        let out = generate(&s).unwrap();
        let w = out.probes[0].wps().unwrap();
        assert_eq!(w.uuid_e.unwrap()[15], 0xff);
        assert_eq!(w.model.as_deref(), Some(&b"P-1"[..]));
    }
}

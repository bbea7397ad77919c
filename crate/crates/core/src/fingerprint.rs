//! Device fingerprints over the stable information elements, and the
//! per-field occurrence table.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha512};

use crate::frame::{
    encode_wps_attributes, parse_wps_attributes, InformationElement, ProbeRequest,
    TAG_EXT_CAPABILITIES, TAG_EXT_SUPPORTED_RATES, TAG_HT_CAPABILITIES, TAG_SUPPORTED_RATES,
    TAG_VENDOR_SPECIFIC, TAG_VHT_CAPABILITIES, WPS_ATTR_DEVICE_NAME, WPS_ATTR_MANUFACTURER,
    WPS_ATTR_MODEL_NAME, WPS_ATTR_UUID_E, WPS_PREFIX,
};
use crate::hexser;

/// Element tags that stay constant for a device between transmissions.
pub const STABLE_TAGS: [u8; 6] = [
    TAG_SUPPORTED_RATES,
    TAG_EXT_SUPPORTED_RATES,
    TAG_HT_CAPABILITIES,
    TAG_VHT_CAPABILITIES,
    TAG_EXT_CAPABILITIES,
    TAG_VENDOR_SPECIFIC,
];

/// WPS attributes that identify the individual device rather than the model.
pub const WPS_IDENTITY_ATTRS: [u16; 4] = [
    WPS_ATTR_UUID_E,
    WPS_ATTR_DEVICE_NAME,
    WPS_ATTR_MANUFACTURER,
    WPS_ATTR_MODEL_NAME,
];

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldPresence(u8);

impl FieldPresence {
    pub const SUPPORTED_RATES: u8 = 1 << 0;
    pub const EXT_RATES: u8 = 1 << 1;
    pub const HT_CAP: u8 = 1 << 2;
    pub const VHT_CAP: u8 = 1 << 3;
    pub const EXT_CAP: u8 = 1 << 4;
    pub const VENDOR_SPECIFIC: u8 = 1 << 5;
    pub const WPS: u8 = 1 << 6;

    pub fn contains(&self, flag: u8) -> bool {
        self.0 & flag == flag
    }

    pub fn bits(&self) -> u8 {
        self.0
    }
}

impl fmt::Debug for FieldPresence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldPresence({:#09b})", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint {
    #[serde(with = "hexser::array")]
    pub digest: [u8; 64],
    pub field_presence: FieldPresence,
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({}..)", hex::encode(&self.digest[..8]))
    }
}

impl Fingerprint {
    pub fn short_hex(&self) -> String {
        hex::encode(&self.digest[..8])
    }
}

/// WPS element payload with the identity attributes removed.
fn wps_without_identity(ie: &InformationElement) -> Vec<u8> {
    let attrs: Vec<_> = parse_wps_attributes(&ie.payload()[WPS_PREFIX.len()..])
        .into_iter()
        .filter(|a| !WPS_IDENTITY_ATTRS.contains(&a.kind))
        .collect();
    encode_wps_attributes(&attrs)
}

/// The byte string the digest is taken over: tag, length and payload of every
/// stable element in on-air order.
pub fn canonical_bytes(p: &ProbeRequest) -> Vec<u8> {
    let mut out = Vec::new();
    for ie in p.elements() {
        if !STABLE_TAGS.contains(&ie.tag()) {
            continue;
        }
        if ie.is_wps() {
            let payload = wps_without_identity(ie);
            out.push(ie.tag());
            out.push(payload.len() as u8);
            out.extend_from_slice(&payload);
        } else {
            ie.encode_into(&mut out);
        }
    }
    out
}

pub fn field_presence(p: &ProbeRequest) -> FieldPresence {
    let mut bits = 0u8;
    for ie in p.elements() {
        bits |= match ie.tag() {
            TAG_SUPPORTED_RATES => FieldPresence::SUPPORTED_RATES,
            TAG_EXT_SUPPORTED_RATES => FieldPresence::EXT_RATES,
            TAG_HT_CAPABILITIES => FieldPresence::HT_CAP,
            TAG_VHT_CAPABILITIES => FieldPresence::VHT_CAP,
            TAG_EXT_CAPABILITIES => FieldPresence::EXT_CAP,
            TAG_VENDOR_SPECIFIC if ie.is_wps() => {
                FieldPresence::VENDOR_SPECIFIC | FieldPresence::WPS
            }
            TAG_VENDOR_SPECIFIC => FieldPresence::VENDOR_SPECIFIC,
            _ => 0,
        };
    }
    FieldPresence(bits)
}

pub fn fingerprint(p: &ProbeRequest) -> Fingerprint {
    let mut digest = [0u8; 64];
    digest.copy_from_slice(&Sha512::digest(canonical_bytes(p)));
    Fingerprint {
        digest,
        field_presence: field_presence(p),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatRow {
    pub field: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IeStatistics {
    pub total: usize,
    pub rows: Vec<StatRow>,
}

/// Highest vendor-element count with its own histogram row; larger counts
/// share an overflow row so the histogram always sums to the vendor row.
pub const VENDOR_HISTOGRAM_MAX: usize = 5;

#[derive(Clone, Copy, Default)]
struct Counts {
    total: usize,
    rates: usize,
    ext_rates: usize,
    ht: usize,
    vht: usize,
    ext_cap: usize,
    vendor_any: usize,
    vendor_hist: [usize; VENDOR_HISTOGRAM_MAX + 1],
    uuid_e: usize,
}

impl Counts {
    fn add(mut self, p: &ProbeRequest) -> Self {
        let presence = field_presence(p);
        self.total += 1;
        self.rates += presence.contains(FieldPresence::SUPPORTED_RATES) as usize;
        self.ext_rates += presence.contains(FieldPresence::EXT_RATES) as usize;
        self.ht += presence.contains(FieldPresence::HT_CAP) as usize;
        self.vht += presence.contains(FieldPresence::VHT_CAP) as usize;
        self.ext_cap += presence.contains(FieldPresence::EXT_CAP) as usize;
        let vendor = p
            .elements()
            .iter()
            .filter(|ie| ie.tag() == TAG_VENDOR_SPECIFIC)
            .count();
        if vendor > 0 {
            self.vendor_any += 1;
            self.vendor_hist[vendor.min(VENDOR_HISTOGRAM_MAX + 1) - 1] += 1;
        }
        self.uuid_e += p.uuid_e().is_some() as usize;
        self
    }

    fn merge(mut self, o: Counts) -> Self {
        self.total += o.total;
        self.rates += o.rates;
        self.ext_rates += o.ext_rates;
        self.ht += o.ht;
        self.vht += o.vht;
        self.ext_cap += o.ext_cap;
        self.vendor_any += o.vendor_any;
        for (a, b) in self.vendor_hist.iter_mut().zip(o.vendor_hist) {
            *a += b;
        }
        self.uuid_e += o.uuid_e;
        self
    }
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (count as f64 * 10_000.0 / total as f64).round() / 100.0
}

pub fn ie_statistics(probes: &[ProbeRequest]) -> IeStatistics {
    let c = probes
        .par_iter()
        .fold(Counts::default, |acc, p| acc.add(p))
        .reduce(Counts::default, Counts::merge);
    let mut rows = vec![
        ("Supported Rates".to_string(), c.rates),
        ("Extended Supported Rates".to_string(), c.ext_rates),
        ("HT Capabilities".to_string(), c.ht),
        ("VHT Capabilities".to_string(), c.vht),
        ("Extended Capabilities".to_string(), c.ext_cap),
        ("Vendor Specific Elements".to_string(), c.vendor_any),
    ];
    for n in 1..=VENDOR_HISTOGRAM_MAX {
        let label = if n == 1 { "Element" } else { "Elements" };
        rows.push((format!("{n} Vendor Specific {label}"), c.vendor_hist[n - 1]));
    }
    rows.push((
        format!("{}+ Vendor Specific Elements", VENDOR_HISTOGRAM_MAX + 1),
        c.vendor_hist[VENDOR_HISTOGRAM_MAX],
    ));
    rows.push(("WPS - UUID-E".to_string(), c.uuid_e));
    IeStatistics {
        total: c.total,
        rows: rows
            .into_iter()
            .map(|(field, count)| StatRow {
                percent: percent(count, c.total),
                field,
                count,
            })
            .collect(),
    }
}

impl IeStatistics {
    pub fn row(&self, field: &str) -> Option<&StatRow> {
        self.rows.iter().find(|r| r.field == field)
    }

    /// Histogram rows, 1 through the overflow bucket.
    pub fn vendor_histogram(&self) -> &[StatRow] {
        let start = self
            .rows
            .iter()
            .position(|r| r.field == "1 Vendor Specific Element")
            .expect("histogram rows are always present");
        &self.rows[start..start + VENDOR_HISTOGRAM_MAX + 1]
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.field.len()).max().unwrap_or(0).max(30);
        let mut out = format!("{:<width$}  {:>10}  {:>7}\n", "Information Element", "Probes", "[%]");
        for r in &self.rows {
            out.push_str(&format!("{:<width$}  {:>10}  {:>7.2}\n", r.field, r.count, r.percent));
        }
        out.push_str(&format!("{:<width$}  {:>10}\n", "Total Collected Probe Requests", self.total));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("field,count,percent\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.2}\n", r.field, r.count, r.percent));
        }
        out.push_str(&format!("Total Collected Probe Requests,{},100.00\n", self.total));
        out
    }
}

//! Probe-request domain model and the MAC address functional bits.
//!
//! The first octet of a MAC address carries two flag bits: bit 0 (`0x01`)
//! marks a group (multicast) address and bit 1 (`0x02`) marks a locally
//! administered address. Randomized client addresses are individual and
//! locally administered, so their second hex digit is always one of
//! `2`, `6`, `A` or `E`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const TAG_SSID: u8 = 0;
pub const TAG_SUPPORTED_RATES: u8 = 1;
pub const TAG_HT_CAPABILITIES: u8 = 45;
pub const TAG_EXT_SUPPORTED_RATES: u8 = 50;
pub const TAG_EXT_CAPABILITIES: u8 = 127;
pub const TAG_VHT_CAPABILITIES: u8 = 191;
pub const TAG_VENDOR_SPECIFIC: u8 = 221;

/// Microsoft OUI + type 4 prefix of the WPS vendor-specific element.
pub const WPS_PREFIX: [u8; 4] = [0x00, 0x50, 0xF2, 0x04];

pub const WPS_ATTR_UUID_E: u16 = 0x1047;
pub const WPS_ATTR_DEVICE_NAME: u16 = 0x1011;
pub const WPS_ATTR_MANUFACTURER: u16 = 0x1021;
pub const WPS_ATTR_MODEL_NAME: u16 = 0x1023;

/// Sequence numbers are a 12-bit counter.
pub const SEQ_MODULUS: u16 = 4096;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddress(pub [u8; 6]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacClass {
    Global,
    Randomized,
    Group,
}

impl MacAddress {
    pub const BROADCAST: MacAddress = MacAddress([0xFF; 6]);

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    pub fn is_locally_administered(&self) -> bool {
        self.0[0] & 0x02 != 0
    }

    pub fn is_multicast(&self) -> bool {
        self.0[0] & 0x01 != 0
    }

    pub fn classify(&self) -> MacClass {
        if self.is_multicast() {
            MacClass::Group
        } else if self.is_locally_administered() {
            MacClass::Randomized
        } else {
            MacClass::Global
        }
    }
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MacAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut octets = [0u8; 6];
        let mut parts = s.split([':', '-']);
        for octet in octets.iter_mut() {
            let part = parts
                .next()
                .ok_or_else(|| Error::format(format!("invalid MAC address {s:?}")))?;
            if part.len() != 2 {
                return Err(Error::format(format!("invalid MAC address {s:?}")));
            }
            *octet = u8::from_str_radix(part, 16)
                .map_err(|_| Error::format(format!("invalid MAC address {s:?}")))?;
        }
        if parts.next().is_some() {
            return Err(Error::format(format!("invalid MAC address {s:?}")));
        }
        Ok(MacAddress(octets))
    }
}

impl Serialize for MacAddress {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn is_locally_administered(mac: MacAddress) -> bool {
    mac.is_locally_administered()
}

pub fn is_multicast(mac: MacAddress) -> bool {
    mac.is_multicast()
}

pub fn classify_mac(mac: MacAddress) -> MacClass {
    mac.classify()
}

/// Capture time in microseconds since the Unix epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_micros(us: i64) -> Self {
        Timestamp(us)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs * 1e6).round() as i64)
    }

    pub fn micros(&self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Signed difference `self - earlier` in seconds.
    pub fn secs_since(&self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1e6
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_secs_f64())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let secs = f64::deserialize(d)?;
        if !secs.is_finite() {
            return Err(serde::de::Error::custom("timestamp must be finite"));
        }
        Ok(Timestamp::from_secs_f64(secs))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InformationElement {
    tag: u8,
    payload: Vec<u8>,
}

impl InformationElement {
    pub fn new(tag: u8, payload: Vec<u8>) -> Result<Self> {
        if payload.len() > 255 {
            return Err(Error::format(format!(
                "element {tag} payload of {} bytes exceeds 255",
                payload.len()
            )));
        }
        Ok(InformationElement { tag, payload })
    }

    pub fn tag(&self) -> u8 {
        self.tag
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn is_wps(&self) -> bool {
        self.tag == TAG_VENDOR_SPECIFIC && self.payload.starts_with(&WPS_PREFIX)
    }

    /// Appends tag, length and payload.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.tag);
        out.push(self.payload.len() as u8);
        out.extend_from_slice(&self.payload);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct WpsInfo {
    pub uuid_e: Option<[u8; 16]>,
    pub device_name: Option<Vec<u8>>,
    pub manufacturer: Option<Vec<u8>>,
    pub model: Option<Vec<u8>>,
}

/// One attribute of a WPS vendor element, big-endian type/length framing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WpsAttribute {
    pub kind: u16,
    pub value: Vec<u8>,
}

/// Splits a WPS element payload (after the 4-byte prefix) into attributes.
/// A trailing partial attribute is dropped.
pub fn parse_wps_attributes(body: &[u8]) -> Vec<WpsAttribute> {
    let mut attrs = Vec::new();
    let mut rest = body;
    while rest.len() >= 4 {
        let kind = u16::from_be_bytes([rest[0], rest[1]]);
        let len = u16::from_be_bytes([rest[2], rest[3]]) as usize;
        if rest.len() < 4 + len {
            break;
        }
        attrs.push(WpsAttribute {
            kind,
            value: rest[4..4 + len].to_vec(),
        });
        rest = &rest[4 + len..];
    }
    attrs
}

pub fn encode_wps_attributes(attrs: &[WpsAttribute]) -> Vec<u8> {
    let mut out = WPS_PREFIX.to_vec();
    for a in attrs {
        out.extend_from_slice(&a.kind.to_be_bytes());
        out.extend_from_slice(&(a.value.len() as u16).to_be_bytes());
        out.extend_from_slice(&a.value);
    }
    out
}

impl WpsInfo {
    pub fn from_element(ie: &InformationElement) -> Option<WpsInfo> {
        if !ie.is_wps() {
            return None;
        }
        let mut info = WpsInfo::default();
        for attr in parse_wps_attributes(&ie.payload()[WPS_PREFIX.len()..]) {
            match attr.kind {
                WPS_ATTR_UUID_E => {
                    if let Ok(uuid) = <[u8; 16]>::try_from(attr.value.as_slice()) {
                        info.uuid_e = Some(uuid);
                    }
                }
                WPS_ATTR_DEVICE_NAME => info.device_name = Some(attr.value),
                WPS_ATTR_MANUFACTURER => info.manufacturer = Some(attr.value),
                WPS_ATTR_MODEL_NAME => info.model = Some(attr.value),
                _ => {}
            }
        }
        Some(info)
    }
}

/// A decoded probe request.
///
/// `elements` is the authoritative on-air element list; `ssid` and `wps` are
/// views derived from it at construction, so the two can never disagree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProbeRequest {
    timestamp: Timestamp,
    mac: MacAddress,
    sequence_number: u16,
    elements: Vec<InformationElement>,
    ssid: Option<Vec<u8>>,
    wps: Option<WpsInfo>,
}

impl ProbeRequest {
    pub fn new(
        timestamp: Timestamp,
        mac: MacAddress,
        sequence_number: u16,
        elements: Vec<InformationElement>,
    ) -> Result<Self> {
        if sequence_number >= SEQ_MODULUS {
            return Err(Error::format(format!(
                "sequence number {sequence_number} does not fit in 12 bits"
            )));
        }
        let ssid = elements
            .iter()
            .find(|ie| ie.tag == TAG_SSID)
            .filter(|ie| !ie.payload.is_empty())
            .map(|ie| ie.payload.clone());
        let wps = elements.iter().find_map(WpsInfo::from_element);
        Ok(ProbeRequest {
            timestamp,
            mac,
            sequence_number,
            elements,
            ssid,
            wps,
        })
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }

    pub fn mac(&self) -> MacAddress {
        self.mac
    }

    pub fn sequence_number(&self) -> u16 {
        self.sequence_number
    }

    pub fn elements(&self) -> &[InformationElement] {
        &self.elements
    }

    /// `None` for a wildcard probe.
    pub fn ssid(&self) -> Option<&[u8]> {
        self.ssid.as_deref()
    }

    pub fn wps(&self) -> Option<&WpsInfo> {
        self.wps.as_ref()
    }

    pub fn has_wps(&self) -> bool {
        self.wps.is_some()
    }

    pub fn uuid_e(&self) -> Option<[u8; 16]> {
        self.wps.as_ref().and_then(|w| w.uuid_e)
    }

    pub fn with_mac(&self, mac: MacAddress) -> ProbeRequest {
        ProbeRequest { mac, ..self.clone() }
    }

    pub fn with_timestamp(&self, timestamp: Timestamp) -> ProbeRequest {
        ProbeRequest {
            timestamp,
            ..self.clone()
        }
    }

    pub fn with_sequence_number(&self, sequence_number: u16) -> Result<ProbeRequest> {
        ProbeRequest::new(self.timestamp, self.mac, sequence_number, self.elements.clone())
    }

    pub fn with_elements(&self, elements: Vec<InformationElement>) -> ProbeRequest {
        ProbeRequest::new(self.timestamp, self.mac, self.sequence_number, elements)
            .expect("sequence number already validated")
    }
}

/// Lossy SSID rendering for display.
pub fn display_ssid(ssid: &[u8]) -> String {
    String::from_utf8_lossy(ssid).into_owned()
}

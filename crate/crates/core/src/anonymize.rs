//! Keyed pseudonymization of the identifying fields of a capture.
//!
//! Replaced: the last three MAC octets, SSIDs, and the WPS UUID-E, device
//! name, manufacturer and model. Everything else is left untouched, so MAC
//! class, fingerprints, sequence numbers and timing survive unchanged.

use std::fmt;

use hmac::{Hmac, Mac};
use rand::RngCore;
use rayon::prelude::*;
use sha2::Sha256;

use crate::capture::CaptureRecord;
use crate::error::{Error, Result};
use crate::frame::{
    encode_wps_attributes, parse_wps_attributes, InformationElement, MacAddress, ProbeRequest,
    TAG_SSID, WPS_ATTR_DEVICE_NAME, WPS_ATTR_MANUFACTURER, WPS_ATTR_MODEL_NAME, WPS_ATTR_UUID_E,
    WPS_PREFIX,
};

/// Length of SSID and WPS text tokens.
pub const TOKEN_LEN: usize = 12;

#[derive(Clone, PartialEq, Eq)]
pub struct AnonymizationKey {
    salt: [u8; 16],
}

impl fmt::Debug for AnonymizationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AnonymizationKey(..)")
    }
}

impl AnonymizationKey {
    pub fn new(salt: [u8; 16]) -> Self {
        AnonymizationKey { salt }
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let mut salt = [0u8; 16];
        hex::decode_to_slice(s.trim(), &mut salt)
            .map_err(|e| Error::config(format!("salt must be 32 hex characters: {e}")))?;
        Ok(AnonymizationKey { salt })
    }

    pub fn random() -> Self {
        let mut salt = [0u8; 16];
        rand::rng().fill_bytes(&mut salt);
        AnonymizationKey { salt }
    }

    fn digest(&self, domain: &[u8], data: &[u8]) -> [u8; 32] {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.salt).expect("any key length works");
        mac.update(&[domain.len() as u8]);
        mac.update(domain);
        mac.update(data);
        mac.finalize().into_bytes().into()
    }

    /// Printable fixed-length token.
    fn token(&self, domain: &[u8], data: &[u8]) -> Vec<u8> {
        hex::encode(&self.digest(domain, data)[..TOKEN_LEN / 2]).into_bytes()
    }

    pub fn mac(&self, mac: MacAddress) -> MacAddress {
        let mut octets = mac.0;
        let d = self.digest(b"mac", &octets[3..]);
        octets[3..].copy_from_slice(&d[..3]);
        MacAddress(octets)
    }

    pub fn ssid(&self, ssid: &[u8]) -> Vec<u8> {
        self.token(b"ssid", ssid)
    }

    pub fn uuid_e(&self, uuid: &[u8]) -> [u8; 16] {
        let mut out = [0u8; 16];
        out.copy_from_slice(&self.digest(b"uuid-e", uuid)[..16]);
        out
    }
}

fn anonymize_wps(ie: &InformationElement, key: &AnonymizationKey) -> InformationElement {
    let mut attrs = parse_wps_attributes(&ie.payload()[WPS_PREFIX.len()..]);
    for attr in &mut attrs {
        attr.value = match attr.kind {
            WPS_ATTR_UUID_E => key.uuid_e(&attr.value).to_vec(),
            WPS_ATTR_DEVICE_NAME => key.token(b"wps-name", &attr.value),
            WPS_ATTR_MANUFACTURER => key.token(b"wps-manufacturer", &attr.value),
            WPS_ATTR_MODEL_NAME => key.token(b"wps-model", &attr.value),
            _ => continue,
        };
    }
    InformationElement::new(ie.tag(), encode_wps_attributes(&attrs)).unwrap_or_else(|_| {
        // Tokens longer than the originals overflowed the element; keep the
        // attributes but blank the text values.
        for attr in &mut attrs {
            if matches!(
                attr.kind,
                WPS_ATTR_DEVICE_NAME | WPS_ATTR_MANUFACTURER | WPS_ATTR_MODEL_NAME
            ) {
                attr.value.clear();
            }
        }
        InformationElement::new(ie.tag(), encode_wps_attributes(&attrs))
            .expect("blanked attributes are no longer than the original")
    })
}

pub fn anonymize_probe(p: &ProbeRequest, key: &AnonymizationKey) -> ProbeRequest {
    let elements = p
        .elements()
        .iter()
        .map(|ie| {
            if ie.tag() == TAG_SSID && !ie.payload().is_empty() {
                InformationElement::new(TAG_SSID, key.ssid(ie.payload())).expect("token fits")
            } else if ie.is_wps() {
                anonymize_wps(ie, key)
            } else {
                ie.clone()
            }
        })
        .collect();
    p.with_mac(key.mac(p.mac())).with_elements(elements)
}

/// Anonymizes every record in order. Raw frames are dropped since they carry
/// the original identifiers.
pub fn anonymize_capture(records: &[CaptureRecord], key: &AnonymizationKey) -> Vec<CaptureRecord> {
    records
        .par_iter()
        .map(|r| CaptureRecord::from_probe(anonymize_probe(&r.probe, key)))
        .collect()
}

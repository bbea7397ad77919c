//! Hex string encodings for byte fields in the JSON artifacts.

use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

pub mod bytes {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(D::Error::custom)
    }
}

pub mod opt_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_str(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| hex::decode(&s).map_err(D::Error::custom))
            .transpose()
    }
}

pub mod array {
    use super::*;

    pub fn serialize<S: Serializer, const N: usize>(v: &[u8; N], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[u8; N], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; N];
        hex::decode_to_slice(&s, &mut out).map_err(D::Error::custom)?;
        Ok(out)
    }
}

pub mod opt_array {
    use super::*;

    pub fn serialize<S: Serializer, const N: usize>(
        v: &Option<[u8; N]>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_str(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        d: D,
    ) -> Result<Option<[u8; N]>, D::Error> {
        match Option::<String>::deserialize(d)? {
            Some(s) => {
                let mut out = [0u8; N];
                hex::decode_to_slice(&s, &mut out).map_err(D::Error::custom)?;
                Ok(Some(out))
            }
            None => Ok(None),
        }
    }
}

/// A set of byte strings as a sorted list of hex strings.
pub mod byte_set {
    use std::collections::BTreeSet;

    use serde::Serialize;

    use super::*;

    pub fn serialize<S: Serializer>(v: &BTreeSet<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(hex::encode).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|s| hex::decode(&s).map_err(D::Error::custom))
            .collect()
    }
}

/// A set of fixed-size byte arrays as a sorted list of hex strings.
pub mod array_set {
    use std::collections::BTreeSet;

    use serde::Serialize;

    use super::*;

    pub fn serialize<S: Serializer, const N: usize>(
        v: &BTreeSet<[u8; N]>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        v.iter().map(hex::encode).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        d: D,
    ) -> Result<BTreeSet<[u8; N]>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|s| {
                let mut out = [0u8; N];
                hex::decode_to_slice(&s, &mut out).map_err(D::Error::custom)?;
                Ok(out)
            })
            .collect()
    }
}

//! Reading and writing captures: classic pcap (radiotap or raw 802.11) and
//! the line-delimited JSON record format used between pipeline stages.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{InformationElement, MacAddress, ProbeRequest, Timestamp, WpsInfo};
use crate::hexser;

pub const LINKTYPE_IEEE802_11: u32 = 105;
pub const LINKTYPE_RADIOTAP: u32 = 127;

const PCAP_MAGIC_MICROS: u32 = 0xA1B2_C3D4;
const PCAP_MAGIC_NANOS: u32 = 0xA1B2_3C4D;
const PCAP_HEADER_LEN: usize = 24;
const PCAP_RECORD_HEADER_LEN: usize = 16;
const MAX_PACKET_LEN: usize = 256 * 1024;

/// Management header: frame control, duration, three addresses, sequence control.
const MGMT_HEADER_LEN: usize = 24;
const FC_ORDER: u8 = 0x80;
const RADIOTAP_FLAGS_FCS: u8 = 0x10;

/// Minimal radiotap header: version 0, length 8, no fields present.
const MINIMAL_RADIOTAP: [u8; 8] = [0, 0, 8, 0, 0, 0, 0, 0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum CaptureFormat {
    Pcap,
    Records,
}

impl CaptureFormat {
    /// Sniffs the pcap magic; anything else is treated as records.
    pub fn detect(prefix: &[u8]) -> CaptureFormat {
        if prefix.len() >= 4 {
            let le = u32::from_le_bytes([prefix[0], prefix[1], prefix[2], prefix[3]]);
            let be = u32::from_be_bytes([prefix[0], prefix[1], prefix[2], prefix[3]]);
            for magic in [PCAP_MAGIC_MICROS, PCAP_MAGIC_NANOS] {
                if le == magic || be == magic {
                    return CaptureFormat::Pcap;
                }
            }
        }
        CaptureFormat::Records
    }
}

/// Whether frames end in a 4-byte frame check sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum FcsMode {
    /// Radiotap flags decide; without radiotap, no FCS.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReadOptions {
    pub fcs: FcsMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptureRecord {
    pub probe: ProbeRequest,
    /// 802.11 frame bytes as captured, FCS removed.
    pub raw_frame: Option<Vec<u8>>,
}

impl CaptureRecord {
    pub fn from_probe(probe: ProbeRequest) -> Self {
        CaptureRecord {
            probe,
            raw_frame: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CaptureStats {
    pub probes: usize,
    pub skipped_non_probe: usize,
    pub undecodable: usize,
    pub truncated: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Capture {
    pub records: Vec<CaptureRecord>,
    pub stats: CaptureStats,
}

impl Capture {
    pub fn probes(&self) -> Vec<ProbeRequest> {
        self.records.iter().map(|r| r.probe.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame of {0} bytes is shorter than the management header")]
    TooShort(usize),
    #[error("not a probe request (frame control {0:#06x})")]
    NotProbeRequest(u16),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedFrame {
    pub probe: ProbeRequest,
    /// The element list overran the frame and was cut at the last whole element.
    pub truncated: bool,
}

/// Decodes an 802.11 frame starting at its MAC header.
pub fn decode_frame(bytes: &[u8], ts: Timestamp) -> std::result::Result<DecodedFrame, FrameError> {
    if bytes.len() < 2 {
        return Err(FrameError::TooShort(bytes.len()));
    }
    let fc = u16::from_le_bytes([bytes[0], bytes[1]]);
    let frame_type = (bytes[0] >> 2) & 0x03;
    let subtype = bytes[0] >> 4;
    if frame_type != 0 || subtype != 4 {
        return Err(FrameError::NotProbeRequest(fc));
    }
    let header_len = if bytes[1] & FC_ORDER != 0 {
        MGMT_HEADER_LEN + 4
    } else {
        MGMT_HEADER_LEN
    };
    if bytes.len() < header_len {
        return Err(FrameError::TooShort(bytes.len()));
    }
    let mut mac = [0u8; 6];
    mac.copy_from_slice(&bytes[10..16]);
    let sequence_number = u16::from_le_bytes([bytes[22], bytes[23]]) >> 4;

    let mut elements = Vec::new();
    let mut truncated = false;
    let mut rest = &bytes[header_len..];
    while !rest.is_empty() {
        if rest.len() < 2 || rest.len() < 2 + rest[1] as usize {
            truncated = true;
            break;
        }
        let len = rest[1] as usize;
        elements.push(
            InformationElement::new(rest[0], rest[2..2 + len].to_vec())
                .expect("length byte bounds payload"),
        );
        rest = &rest[2 + len..];
    }
    let probe = ProbeRequest::new(ts, MacAddress(mac), sequence_number, elements)
        .expect("12-bit shift bounds sequence number");
    Ok(DecodedFrame { probe, truncated })
}

/// Encodes a probe request as a broadcast management frame without FCS.
pub fn encode_frame(probe: &ProbeRequest) -> Vec<u8> {
    let mut out = Vec::with_capacity(MGMT_HEADER_LEN + 64);
    out.extend_from_slice(&[0x40, 0x00, 0x00, 0x00]);
    out.extend_from_slice(&MacAddress::BROADCAST.0);
    out.extend_from_slice(&probe.mac().0);
    out.extend_from_slice(&MacAddress::BROADCAST.0);
    out.extend_from_slice(&(probe.sequence_number() << 4).to_le_bytes());
    for ie in probe.elements() {
        ie.encode_into(&mut out);
    }
    out
}

/// Returns (radiotap length, FCS flag) or `None` if the header is malformed.
fn parse_radiotap(data: &[u8]) -> Option<(usize, Option<bool>)> {
    if data.len() < 8 || data[0] != 0 {
        return None;
    }
    let len = u16::from_le_bytes([data[2], data[3]]) as usize;
    if len < 8 || len > data.len() {
        return None;
    }
    let present = u32::from_le_bytes([data[4], data[5], data[6], data[7]]);
    let mut offset = 8;
    let mut word = present;
    while word & (1 << 31) != 0 {
        if offset + 4 > len {
            return None;
        }
        word = u32::from_le_bytes([data[offset], data[offset + 1], data[offset + 2], data[offset + 3]]);
        offset += 4;
    }
    if present & 0b10 == 0 {
        return Some((len, None));
    }
    if present & 0b01 != 0 {
        // TSFT: 8 bytes, 8-aligned
        offset = (offset + 7) & !7;
        offset += 8;
    }
    if offset >= len {
        return None;
    }
    Some((len, Some(data[offset] & RADIOTAP_FLAGS_FCS != 0)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcapPacket {
    pub timestamp: Timestamp,
    pub data: Vec<u8>,
}

/// Streaming reader over classic pcap records.
pub struct PcapReader<R> {
    src: R,
    big_endian: bool,
    nanos: bool,
    linktype: u32,
    /// Set once a record header or body is cut off by end of file.
    pub truncated_tail: bool,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut src: R) -> Result<Self> {
        let mut header = [0u8; PCAP_HEADER_LEN];
        read_full(&mut src, &mut header)
            .map_err(|_| Error::format("pcap global header is truncated"))?;
        let le = u32::from_le_bytes([header[0], header[1], header[2], header[3]]);
        let be = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
        let (big_endian, nanos) = match (le, be) {
            (PCAP_MAGIC_MICROS, _) => (false, false),
            (PCAP_MAGIC_NANOS, _) => (false, true),
            (_, PCAP_MAGIC_MICROS) => (true, false),
            (_, PCAP_MAGIC_NANOS) => (true, true),
            _ => return Err(Error::format(format!("bad pcap magic {le:#010x}"))),
        };
        let field = |i: usize| {
            let b = [header[i], header[i + 1], header[i + 2], header[i + 3]];
            if big_endian {
                u32::from_be_bytes(b)
            } else {
                u32::from_le_bytes(b)
            }
        };
        let linktype = field(20) & 0x0FFF_FFFF;
        if linktype != LINKTYPE_RADIOTAP && linktype != LINKTYPE_IEEE802_11 {
            return Err(Error::format(format!(
                "unsupported pcap linktype {linktype} (expected 105 or 127)"
            )));
        }
        Ok(PcapReader {
            src,
            big_endian,
            nanos,
            linktype,
            truncated_tail: false,
        })
    }

    pub fn linktype(&self) -> u32 {
        self.linktype
    }

    fn u32_at(&self, b: &[u8], i: usize) -> u32 {
        let b = [b[i], b[i + 1], b[i + 2], b[i + 3]];
        if self.big_endian {
            u32::from_be_bytes(b)
        } else {
            u32::from_le_bytes(b)
        }
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PcapPacket>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.truncated_tail {
            return None;
        }
        let mut header = [0u8; PCAP_RECORD_HEADER_LEN];
        match read_full(&mut self.src, &mut header) {
            Ok(()) => {}
            Err(ReadFull::Eof(0)) => return None,
            Err(ReadFull::Eof(_)) => {
                self.truncated_tail = true;
                return None;
            }
            Err(ReadFull::Io(e)) => return Some(Err(e.into())),
        }
        let secs = self.u32_at(&header, 0) as i64;
        let frac = self.u32_at(&header, 4) as i64;
        let incl_len = self.u32_at(&header, 8) as usize;
        if incl_len > MAX_PACKET_LEN {
            self.truncated_tail = true;
            return None;
        }
        let micros = if self.nanos { frac / 1000 } else { frac };
        let mut data = vec![0u8; incl_len];
        match read_full(&mut self.src, &mut data) {
            Ok(()) => {}
            Err(ReadFull::Io(e)) => return Some(Err(e.into())),
            Err(ReadFull::Eof(_)) => {
                self.truncated_tail = true;
                return None;
            }
        }
        Some(Ok(PcapPacket {
            timestamp: Timestamp(secs * 1_000_000 + micros),
            data,
        }))
    }
}

enum ReadFull {
    Eof(usize),
    Io(std::io::Error),
}

fn read_full<R: Read>(src: &mut R, buf: &mut [u8]) -> std::result::Result<(), ReadFull> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => return Err(ReadFull::Eof(filled)),
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(ReadFull::Io(e)),
        }
    }
    Ok(())
}

pub fn read_capture<R: Read>(src: R, format: CaptureFormat) -> Result<Capture> {
    read_capture_with(src, format, &ReadOptions::default())
}

pub fn read_capture_with<R: Read>(
    src: R,
    format: CaptureFormat,
    opts: &ReadOptions,
) -> Result<Capture> {
    match format {
        CaptureFormat::Pcap => read_pcap(src, opts),
        CaptureFormat::Records => {
            let records = read_records(BufReader::new(src))?;
            let stats = CaptureStats {
                probes: records.len(),
                ..Default::default()
            };
            Ok(Capture { records, stats })
        }
    }
}

/// Reads either format, choosing by the leading magic bytes.
pub fn read_capture_auto<R: Read>(src: R, opts: &ReadOptions) -> Result<Capture> {
    let mut src = BufReader::new(src);
    let format = CaptureFormat::detect(src.fill_buf()?);
    read_capture_with(src, format, opts)
}

fn read_pcap<R: Read>(src: R, opts: &ReadOptions) -> Result<Capture> {
    let mut reader = PcapReader::new(src)?;
    let linktype = reader.linktype();
    let mut capture = Capture::default();
    for (index, packet) in reader.by_ref().enumerate() {
        let packet = packet?;
        let (offset, radiotap_fcs) = if linktype == LINKTYPE_RADIOTAP {
            match parse_radiotap(&packet.data) {
                Some(r) => r,
                None => {
                    log::warn!("packet {index}: malformed radiotap header, skipped");
                    capture.stats.undecodable += 1;
                    continue;
                }
            }
        } else {
            (0, None)
        };
        let has_fcs = match opts.fcs {
            FcsMode::Present => true,
            FcsMode::Absent => false,
            FcsMode::Auto => radiotap_fcs.unwrap_or(false),
        };
        let mut frame = &packet.data[offset..];
        if has_fcs {
            if frame.len() < 4 {
                log::warn!("packet {index}: too short to carry an FCS, skipped");
                capture.stats.undecodable += 1;
                continue;
            }
            frame = &frame[..frame.len() - 4];
        }
        match decode_frame(frame, packet.timestamp) {
            Ok(decoded) => {
                if decoded.truncated {
                    log::warn!("packet {index}: element list overruns frame, truncated");
                    capture.stats.truncated += 1;
                }
                capture.records.push(CaptureRecord {
                    probe: decoded.probe,
                    raw_frame: Some(frame.to_vec()),
                });
            }
            Err(FrameError::NotProbeRequest(_)) => capture.stats.skipped_non_probe += 1,
            Err(e @ FrameError::TooShort(_)) => {
                log::warn!("packet {index}: {e}, skipped");
                capture.stats.undecodable += 1;
            }
        }
    }
    if reader.truncated_tail {
        log::warn!("capture ends inside a packet record");
        capture.stats.undecodable += 1;
    }
    capture.stats.probes = capture.records.len();
    Ok(capture)
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes).map_err(|source| Error::Write {
            written: self.written,
            source,
        })?;
        self.written += bytes.len() as u64;
        Ok(())
    }

    fn finish(mut self) -> Result<u64> {
        self.inner.flush().map_err(|source| Error::Write {
            written: self.written,
            source,
        })?;
        Ok(self.written)
    }
}

/// Writes records and returns the number of bytes written.
///
/// Pcap output uses the radiotap linktype with a minimal radiotap header.
/// A record's `raw_frame` is written verbatim when present; otherwise the
/// probe is re-encoded.
pub fn write_capture<W: Write>(
    records: &[CaptureRecord],
    sink: W,
    format: CaptureFormat,
) -> Result<u64> {
    match format {
        CaptureFormat::Records => write_records(records, sink),
        CaptureFormat::Pcap => write_pcap(records, sink),
    }
}

fn write_pcap<W: Write>(records: &[CaptureRecord], sink: W) -> Result<u64> {
    let mut out = CountingWriter {
        inner: sink,
        written: 0,
    };
    let mut header = Vec::with_capacity(PCAP_HEADER_LEN);
    header.extend_from_slice(&PCAP_MAGIC_MICROS.to_le_bytes());
    header.extend_from_slice(&2u16.to_le_bytes());
    header.extend_from_slice(&4u16.to_le_bytes());
    header.extend_from_slice(&0i32.to_le_bytes());
    header.extend_from_slice(&0u32.to_le_bytes());
    header.extend_from_slice(&65535u32.to_le_bytes());
    header.extend_from_slice(&LINKTYPE_RADIOTAP.to_le_bytes());
    out.put(&header)?;

    for record in records {
        let frame = match &record.raw_frame {
            Some(raw) => raw.clone(),
            None => encode_frame(&record.probe),
        };
        let us = record.probe.timestamp().micros();
        let secs = u32::try_from(us.div_euclid(1_000_000))
            .map_err(|_| Error::format(format!("timestamp {us}us does not fit pcap seconds")))?;
        let frac = us.rem_euclid(1_000_000) as u32;
        let len = (MINIMAL_RADIOTAP.len() + frame.len()) as u32;
        let mut packet = Vec::with_capacity(PCAP_RECORD_HEADER_LEN + len as usize);
        packet.extend_from_slice(&secs.to_le_bytes());
        packet.extend_from_slice(&frac.to_le_bytes());
        packet.extend_from_slice(&len.to_le_bytes());
        packet.extend_from_slice(&len.to_le_bytes());
        packet.extend_from_slice(&MINIMAL_RADIOTAP);
        packet.extend_from_slice(&frame);
        out.put(&packet)?;
    }
    out.finish()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IeLine {
    tag: u8,
    #[serde(with = "hexser::bytes")]
    payload: Vec<u8>,
}

#[derive(Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
struct WpsLine {
    #[serde(with = "hexser::opt_array")]
    uuid_e: Option<[u8; 16]>,
    #[serde(with = "hexser::opt_bytes")]
    name: Option<Vec<u8>>,
    #[serde(with = "hexser::opt_bytes")]
    manufacturer: Option<Vec<u8>>,
    #[serde(with = "hexser::opt_bytes")]
    model: Option<Vec<u8>>,
}

impl From<&WpsInfo> for WpsLine {
    fn from(w: &WpsInfo) -> Self {
        WpsLine {
            uuid_e: w.uuid_e,
            name: w.device_name.clone(),
            manufacturer: w.manufacturer.clone(),
            model: w.model.clone(),
        }
    }
}

/// One line of the records format.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    ts: Timestamp,
    mac: MacAddress,
    sn: u16,
    #[serde(with = "hexser::opt_bytes")]
    ssid: Option<Vec<u8>>,
    ies: Vec<IeLine>,
    wps: Option<WpsLine>,
}

impl From<&ProbeRequest> for RecordLine {
    fn from(p: &ProbeRequest) -> Self {
        RecordLine {
            ts: p.timestamp(),
            mac: p.mac(),
            sn: p.sequence_number(),
            ssid: p.ssid().map(<[u8]>::to_vec),
            ies: p
                .elements()
                .iter()
                .map(|ie| IeLine {
                    tag: ie.tag(),
                    payload: ie.payload().to_vec(),
                })
                .collect(),
            wps: p.wps().map(WpsLine::from),
        }
    }
}

impl RecordLine {
    fn into_probe(self) -> Result<ProbeRequest> {
        let elements = self
            .ies
            .into_iter()
            .map(|ie| InformationElement::new(ie.tag, ie.payload))
            .collect::<Result<Vec<_>>>()?;
        let probe = ProbeRequest::new(self.ts, self.mac, self.sn, elements)?;
        if probe.ssid() != self.ssid.as_deref() {
            return Err(Error::format("ssid disagrees with the SSID element"));
        }
        if probe.wps().map(WpsLine::from) != self.wps {
            return Err(Error::format("wps disagrees with the WPS element"));
        }
        Ok(probe)
    }
}

pub fn probe_to_json_line(p: &ProbeRequest) -> String {
    serde_json::to_string(&RecordLine::from(p)).expect("record lines always serialize")
}

pub fn probe_from_json_line(line: &str) -> Result<ProbeRequest> {
    serde_json::from_str::<RecordLine>(line)?.into_probe()
}

fn write_records<W: Write>(records: &[CaptureRecord], sink: W) -> Result<u64> {
    let mut out = CountingWriter {
        inner: sink,
        written: 0,
    };
    for record in records {
        let mut line = probe_to_json_line(&record.probe);
        line.push('\n');
        out.put(line.as_bytes())?;
    }
    out.finish()
}

fn read_records<R: BufRead>(src: R) -> Result<Vec<CaptureRecord>> {
    let mut records = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let probe = probe_from_json_line(&line)
            .map_err(|e| Error::format(format!("record line {}: {e}", n + 1)))?;
        records.push(CaptureRecord::from_probe(probe));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{TAG_SSID, TAG_SUPPORTED_RATES, TAG_VENDOR_SPECIFIC, WPS_PREFIX};

    fn probe(sn: u16, ssid: &[u8]) -> ProbeRequest {
        ProbeRequest::new(
            Timestamp(1_638_316_800_000_123),
            "da:a1:19:00:00:01".parse().unwrap(),
            sn,
            vec![
                InformationElement::new(TAG_SSID, ssid.to_vec()).unwrap(),
                InformationElement::new(TAG_SUPPORTED_RATES, vec![0x82, 0x84, 0x8b, 0x96]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn beacon() -> Vec<u8> {
        let mut f = vec![0x80, 0x00, 0, 0];
        f.extend_from_slice(&[0xff; 6]);
        f.extend_from_slice(&[0x00, 0x11, 0x22, 0x33, 0x44, 0x55]);
        f.extend_from_slice(&[0x00, 0x11, 0x22, 0x33, 0x44, 0x55]);
        f.extend_from_slice(&[0x10, 0x00]);
        f.extend_from_slice(&[0u8; 12]);
        f
    }

    fn pcap_of(frames: &[Vec<u8>], linktype: u32) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&PCAP_MAGIC_MICROS.to_le_bytes());
        out.extend_from_slice(&[2, 0, 4, 0]);
        out.extend_from_slice(&[0; 8]);
        out.extend_from_slice(&65535u32.to_le_bytes());
        out.extend_from_slice(&linktype.to_le_bytes());
        for (i, f) in frames.iter().enumerate() {
            out.extend_from_slice(&(1000 + i as u32).to_le_bytes());
            out.extend_from_slice(&5u32.to_le_bytes());
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
            out.extend_from_slice(&(f.len() as u32).to_le_bytes());
            out.extend_from_slice(f);
        }
        out
    }

    #[test]
    fn sequence_control_upper_twelve_bits() {
        let mut frame = encode_frame(&probe(0, b"x"));
        frame[22] = 0xB0;
        frame[23] = 0x06;
        let decoded = decode_frame(&frame, Timestamp(0)).unwrap();
        assert_eq!(decoded.probe.sequence_number(), 107);
    }

    #[test]
    fn zero_length_ssid_is_wildcard() {
        let decoded = decode_frame(&encode_frame(&probe(5, b"")), Timestamp(0)).unwrap();
        assert_eq!(decoded.probe.ssid(), None);
        assert!(!decoded.truncated);
    }

    #[test]
    fn probes_kept_beacons_counted() {
        let frames = vec![
            encode_frame(&probe(1, b"a")),
            beacon(),
            encode_frame(&probe(2, b"b")),
            beacon(),
            encode_frame(&probe(3, b"")),
        ];
        let cap = read_capture(&pcap_of(&frames, LINKTYPE_IEEE802_11)[..], CaptureFormat::Pcap).unwrap();
        assert_eq!(cap.records.len(), 3);
        assert_eq!(cap.stats.skipped_non_probe, 2);
        assert_eq!(cap.records[1].probe.timestamp(), Timestamp(1002 * 1_000_000 + 5));
    }

    #[test]
    fn header_only_pcap_is_empty() {
        let cap = read_capture(&pcap_of(&[], LINKTYPE_RADIOTAP)[..], CaptureFormat::Pcap).unwrap();
        assert!(cap.records.is_empty());
        assert_eq!(cap.stats, CaptureStats::default());
    }

    #[test]
    fn bad_global_header_is_fatal() {
        assert!(matches!(
            read_capture(&b"not a pcap at all, really"[..], CaptureFormat::Pcap),
            Err(Error::Format(_))
        ));
        assert!(read_capture(&[0xd4, 0xc3, 0xb2][..], CaptureFormat::Pcap).is_err());
        let mut wrong_link = pcap_of(&[], 1);
        wrong_link[20] = 1;
        assert!(read_capture(&wrong_link[..], CaptureFormat::Pcap).is_err());
    }

    #[test]
    fn overrunning_elements_are_truncated() {
        let mut frame = encode_frame(&probe(9, b"abc"));
        frame.extend_from_slice(&[TAG_VENDOR_SPECIFIC, 40, 1, 2, 3]);
        let decoded = decode_frame(&frame, Timestamp(0)).unwrap();
        assert!(decoded.truncated);
        assert_eq!(decoded.probe.elements().len(), 2);

        let cap = read_capture(&pcap_of(&[frame], LINKTYPE_IEEE802_11)[..], CaptureFormat::Pcap).unwrap();
        assert_eq!(cap.stats.truncated, 1);
        assert_eq!(cap.records.len(), 1);
    }

    #[test]
    fn short_frames_are_skipped_not_fatal() {
        let frames = vec![vec![0x40, 0x00, 1, 2, 3], encode_frame(&probe(1, b"a"))];
        let cap = read_capture(&pcap_of(&frames, LINKTYPE_IEEE802_11)[..], CaptureFormat::Pcap).unwrap();
        assert_eq!(cap.records.len(), 1);
        assert_eq!(cap.stats.undecodable, 1);
    }

    #[test]
    fn radiotap_fcs_flag_strips_trailer() {
        // present = TSFT | Flags; TSFT at 8..16, flags at 16
        let mut rt = vec![0, 0, 20, 0, 0b11, 0, 0, 0];
        rt.extend_from_slice(&[0; 8]);
        rt.extend_from_slice(&[RADIOTAP_FLAGS_FCS, 0, 0, 0]);
        let p = probe(77, b"corp");
        let mut packet = rt.clone();
        packet.extend_from_slice(&encode_frame(&p));
        packet.extend_from_slice(&[0xde, 0xad, 0xbe, 0xef]);
        let cap = read_capture(&pcap_of(&[packet], LINKTYPE_RADIOTAP)[..], CaptureFormat::Pcap).unwrap();
        assert_eq!(cap.stats.truncated, 0);
        assert_eq!(cap.records[0].probe.elements(), p.elements());
    }

    #[test]
    fn wps_uuid_decoded() {
        let mut wps = WPS_PREFIX.to_vec();
        wps.extend_from_slice(&[0x10, 0x47, 0x00, 0x10]);
        wps.extend_from_slice(&[0xAB; 16]);
        let p = probe(3, b"x").with_elements(vec![
            InformationElement::new(TAG_SSID, vec![]).unwrap(),
            InformationElement::new(TAG_VENDOR_SPECIFIC, wps).unwrap(),
        ]);
        let decoded = decode_frame(&encode_frame(&p), Timestamp(0)).unwrap();
        assert_eq!(decoded.probe.uuid_e(), Some([0xAB; 16]));
    }

    #[test]
    fn records_round_trip_single_probe() {
        let p = probe(4095, b"\xff\x00not utf8");
        let mut buf = Vec::new();
        let n = write_capture(&[CaptureRecord::from_probe(p.clone())], &mut buf, CaptureFormat::Records).unwrap();
        assert_eq!(n as usize, buf.len());
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 1);
        let back = read_capture(&buf[..], CaptureFormat::Records).unwrap();
        assert_eq!(back.records[0].probe, p);
    }

    #[test]
    fn records_reject_inconsistent_ssid() {
        let line = probe_to_json_line(&probe(1, b"abc")).replace("\"ssid\":\"616263\"", "\"ssid\":null");
        assert!(probe_from_json_line(&line).is_err());
        let extra = probe_to_json_line(&probe(1, b"abc")).replace("{\"ts\"", "{\"bogus\":1,\"ts\"");
        assert!(probe_from_json_line(&extra).is_err());
    }

    #[test]
    fn write_failure_reports_partial_count() {
        struct Limited(usize);
        impl Write for Limited {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                if self.0 == 0 {
                    return Err(std::io::Error::other("full"));
                }
                let n = buf.len().min(self.0);
                self.0 -= n;
                Ok(n)
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let recs = vec![CaptureRecord::from_probe(probe(1, b"a")); 3];
        match write_capture(&recs, Limited(30), CaptureFormat::Pcap) {
            Err(Error::Write { written, .. }) => assert_eq!(written, 24),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn format_detection() {
        assert_eq!(CaptureFormat::detect(&pcap_of(&[], 127)), CaptureFormat::Pcap);
        assert_eq!(CaptureFormat::detect(b"{\"ts\":1}"), CaptureFormat::Records);
        assert_eq!(CaptureFormat::detect(b""), CaptureFormat::Records);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
                let _ = decode_frame(&bytes, Timestamp(0));
                let _ = read_capture(&bytes[..], CaptureFormat::Pcap);
                let mut framed = pcap_of(std::slice::from_ref(&bytes), LINKTYPE_RADIOTAP);
                let _ = read_capture(&framed[..], CaptureFormat::Pcap);
                framed.truncate(framed.len().saturating_sub(3));
                let _ = read_capture(&framed[..], CaptureFormat::Pcap);
            }

            #[test]
            fn decoded_raw_frame_redecodes_identically(
                sn in 0u16..4096,
                ies in proptest::collection::vec((any::<u8>(), proptest::collection::vec(any::<u8>(), 0..40)), 0..8),
            ) {
                let elements = ies.into_iter().map(|(t, p)| InformationElement::new(t, p).unwrap()).collect();
                let p = ProbeRequest::new(Timestamp(42), MacAddress([2, 0, 0, 0, 0, 9]), sn, elements).unwrap();
                let cap = read_capture(&pcap_of(&[encode_frame(&p)], LINKTYPE_IEEE802_11)[..], CaptureFormat::Pcap).unwrap();
                let rec = &cap.records[0];
                let again = decode_frame(rec.raw_frame.as_ref().unwrap(), rec.probe.timestamp()).unwrap();
                prop_assert_eq!(&again.probe, &rec.probe);
                let line = probe_to_json_line(&rec.probe);
                prop_assert_eq!(&probe_from_json_line(&line).unwrap(), &rec.probe);
            }
        }
    }
}

//! Device re-identification from 802.11 probe-request captures.
//!
//! The pipeline groups probes into scan instances, clusters instances into
//! devices, then merges devices whose presence patterns coincide:
//!
//! ```text
//! capture ─▶ [anonymize] ─▶ group_instances ─▶ cluster_devices ─▶ temporal_merge ─▶ report
//! ```
//!
//! [`synth`] generates labelled captures for checking each stage.

pub mod anonymize;
pub mod capture;
pub mod device;
pub mod error;
pub mod fingerprint;
pub mod frame;
mod hexser;
pub mod instance;
pub mod jsonl;
pub mod report;
pub mod synth;
pub mod temporal;
pub mod unionfind;

pub use anonymize::{anonymize_capture, anonymize_probe, AnonymizationKey};
pub use capture::{
    decode_frame, encode_frame, read_capture, read_capture_auto, write_capture, Capture,
    CaptureFormat, CaptureRecord,
};
pub use device::{cluster_devices, same_device, ssid_similarity, DeviceCluster, SimilarityConfig};
pub use error::{Error, Result};
pub use fingerprint::{fingerprint, ie_statistics, Fingerprint};
pub use frame::{classify_mac, MacAddress, MacClass, ProbeRequest, Timestamp};
pub use instance::{group_instances, same_instance, InstanceConfig, ScanInstance};
pub use report::{analyze, render_timeline, run_analysis, verify, AnalysisConfig, AnalysisReport};
pub use synth::{generate, scenario_from_file, GroundTruth, Scenario};
pub use temporal::{cluster_appearances, profile_overlap, temporal_merge, MergeConfig};

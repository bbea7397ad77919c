//! End-to-end analysis, the funnel report, presence timelines and the
//! consistency check over emitted artifacts.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::anonymize::{anonymize_probe, AnonymizationKey};
use crate::device::{cluster_devices, individual_instances, DeviceCluster, SimilarityConfig};
use crate::error::{Error, Result};
use crate::frame::{MacClass, ProbeRequest, Timestamp};
use crate::instance::{group_instances, InstanceConfig, ScanInstance};
use crate::temporal::{cluster_appearances, temporal_merge, MergeConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub instance: InstanceConfig,
    pub similarity: SimilarityConfig,
    pub merge: MergeConfig,
    /// 32 hex characters; anonymize before analysis when set. Never echoed.
    #[serde(skip_serializing)]
    pub anonymize_salt: Option<String>,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.instance.max_gap {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config(format!("instance.max_gap must be positive, got {g}")));
            }
        }
        self.similarity.validate()?;
        self.merge.validate()?;
        if let Some(s) = &self.anonymize_salt {
            AnonymizationKey::from_hex(s)?;
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: AnalysisConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Every parameter the report was computed with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParameters {
    pub instance: InstanceConfig,
    pub similarity: SimilarityConfig,
    pub merge: MergeConfig,
    pub anonymized: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Timestamp,
    pub instances: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    pub device: usize,
    pub class: MacClass,
    pub clusters: Vec<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub probe_count: usize,
    pub instance_count: usize,
    /// Instances from group source addresses, left out of device analysis.
    pub group_mac_instances: usize,
    pub device_count_pre_merge: usize,
    pub device_count_post_merge: usize,
    /// Devices with at least one non-randomized MAC.
    pub global_mac_devices: usize,
    pub randomized_devices_pre: usize,
    pub randomized_devices_post: usize,
    pub singleton_devices_pre: usize,
    pub timelines_pre: Vec<Timeline>,
    pub timelines: Vec<Timeline>,
    pub parameters: ReportParameters,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn funnel_text(&self) -> String {
        format!(
            "probe requests          {:>10}\n\
             scan instances          {:>10}\n\
             devices (pre-merge)     {:>10}\n\
             \x20 global MAC            {:>10}\n\
             \x20 randomized MAC        {:>10}\n\
             devices (post-merge)    {:>10}\n\
             \x20 randomized MAC        {:>10}\n",
            self.probe_count,
            self.instance_count,
            self.device_count_pre_merge,
            self.global_mac_devices,
            self.randomized_devices_pre,
            self.device_count_post_merge,
            self.randomized_devices_post,
        )
    }
}

/// Every intermediate artifact of one analysis run.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub probes: Vec<ProbeRequest>,
    pub instances: Vec<ScanInstance>,
    pub devices_pre: Vec<DeviceCluster>,
    pub devices_post: Vec<DeviceCluster>,
    pub report: AnalysisReport,
}

fn device_class(d: &DeviceCluster) -> MacClass {
    if d.randomized {
        MacClass::Randomized
    } else {
        MacClass::Global
    }
}

fn timelines(devices: &[DeviceCluster], merge: &MergeConfig) -> Vec<Timeline> {
    devices
        .iter()
        .map(|d| Timeline {
            device: d.id,
            class: device_class(d),
            clusters: cluster_appearances(d, merge.gap, merge.pad)
                .clusters
                .into_iter()
                .map(|c| Interval {
                    start: c.start,
                    end: c.end,
                    instances: c.member_instances.len(),
                })
                .collect(),
        })
        .collect()
}

pub fn run_analysis(probes: &[ProbeRequest], cfg: &AnalysisConfig) -> Result<Analysis> {
    cfg.validate()?;
    let probes: Vec<ProbeRequest> = match &cfg.anonymize_salt {
        Some(salt) => {
            let key = AnonymizationKey::from_hex(salt)?;
            probes.iter().map(|p| anonymize_probe(p, &key)).collect()
        }
        None => probes.to_vec(),
    };
    let instances = group_instances(&probes, &cfg.instance);
    let individual = individual_instances(&instances);
    let devices_pre = cluster_devices(&individual, &cfg.similarity);
    let devices_post = temporal_merge(&devices_pre, &cfg.merge);

    let report = AnalysisReport {
        probe_count: probes.len(),
        instance_count: instances.len(),
        group_mac_instances: instances.len() - individual.len(),
        device_count_pre_merge: devices_pre.len(),
        device_count_post_merge: devices_post.len(),
        global_mac_devices: devices_pre.iter().filter(|d| !d.randomized).count(),
        randomized_devices_pre: devices_pre.iter().filter(|d| d.randomized).count(),
        randomized_devices_post: devices_post.iter().filter(|d| d.randomized).count(),
        singleton_devices_pre: devices_pre.iter().filter(|d| d.singleton).count(),
        timelines_pre: timelines(&devices_pre, &cfg.merge),
        timelines: timelines(&devices_post, &cfg.merge),
        parameters: ReportParameters {
            instance: cfg.instance,
            similarity: cfg.similarity,
            merge: cfg.merge,
            anonymized: cfg.anonymize_salt.is_some(),
        },
    };
    Ok(Analysis {
        probes,
        instances,
        devices_pre,
        devices_post,
        report,
    })
}

pub fn analyze(probes: &[ProbeRequest], cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    run_analysis(probes, cfg).map(|a| a.report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TimelineFormat {
    Csv,
    Svg,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum TimelineStage {
    Pre,
    #[default]
    Post,
}

fn select<'a>(report: &'a AnalysisReport, ids: &[usize], stage: TimelineStage) -> Result<Vec<&'a Timeline>> {
    let all = match stage {
        TimelineStage::Pre => &report.timelines_pre,
        TimelineStage::Post => &report.timelines,
    };
    ids.iter()
        .map(|&id| {
            all.iter().find(|t| t.device == id).ok_or_else(|| Error::UnknownDevice {
                id,
                valid: all.iter().map(|t| t.device).collect(),
            })
        })
        .collect()
}

fn class_label(c: MacClass) -> &'static str {
    match c {
        MacClass::Global => "global",
        MacClass::Randomized => "randomized",
        MacClass::Group => "group",
    }
}

const SVG_LABEL_WIDTH: f64 = 180.0;
const SVG_PLOT_WIDTH: f64 = 800.0;
const SVG_LANE_HEIGHT: f64 = 24.0;
const SVG_AXIS_HEIGHT: f64 = 30.0;

pub fn render_timeline(
    report: &AnalysisReport,
    ids: &[usize],
    format: TimelineFormat,
    stage: TimelineStage,
) -> Result<String> {
    let lanes = select(report, ids, stage)?;
    match format {
        TimelineFormat::Csv => {
            let mut out = String::from("device,start,end\n");
            for t in &lanes {
                for c in &t.clusters {
                    writeln!(out, "{},{:.6},{:.6}", t.device, c.start.as_secs_f64(), c.end.as_secs_f64())
                        .expect("string write");
                }
            }
            Ok(out)
        }
        TimelineFormat::Svg => Ok(render_svg(report, &lanes, stage)),
    }
}

fn render_svg(report: &AnalysisReport, lanes: &[&Timeline], stage: TimelineStage) -> String {
    let all = match stage {
        TimelineStage::Pre => &report.timelines_pre,
        TimelineStage::Post => &report.timelines,
    };
    let t0 = all.iter().flat_map(|t| &t.clusters).map(|c| c.start.0).min().unwrap_or(0);
    let t1 = all.iter().flat_map(|t| &t.clusters).map(|c| c.end.0).max().unwrap_or(1).max(t0 + 1);
    let x = |t: i64| SVG_LABEL_WIDTH + (t - t0) as f64 / (t1 - t0) as f64 * SVG_PLOT_WIDTH;
    let height = lanes.len() as f64 * SVG_LANE_HEIGHT + SVG_AXIS_HEIGHT;
    let width = SVG_LABEL_WIDTH + SVG_PLOT_WIDTH + 10.0;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    for (lane, t) in lanes.iter().enumerate() {
        let y = lane as f64 * SVG_LANE_HEIGHT;
        writeln!(
            out,
            r#"<g class="lane" data-device="{}"><text x="4" y="{:.1}">device {} ({})</text>"#,
            t.device,
            y + SVG_LANE_HEIGHT * 0.65,
            t.device,
            class_label(t.class)
        )
        .unwrap();
        let fill = if t.class == MacClass::Randomized { "#d95f02" } else { "#1b9e77" };
        for c in &t.clusters {
            let x0 = x(c.start.0);
            let w = (x(c.end.0) - x0).max(1.0);
            writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{:.1}" width="{w:.2}" height="{:.1}" fill="{fill}"/>"#,
                y + 4.0,
                SVG_LANE_HEIGHT - 8.0
            )
            .unwrap();
        }
        out.push_str("</g>\n");
    }
    let axis_y = lanes.len() as f64 * SVG_LANE_HEIGHT + 4.0;
    writeln!(
        out,
        r##"<line x1="{SVG_LABEL_WIDTH}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="#333"/>"##,
        SVG_LABEL_WIDTH + SVG_PLOT_WIDTH
    )
    .unwrap();
    for k in 0..=4 {
        let t = t0 + (t1 - t0) * k / 4;
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            x(t),
            axis_y + 16.0,
            Timestamp(t).as_secs_f64()
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Consistency(what()))
    }
}

fn partition_of(devices: &[DeviceCluster]) -> Result<Vec<BTreeSet<usize>>> {
    let mut seen = BTreeSet::new();
    let mut parts = Vec::with_capacity(devices.len());
    for d in devices {
        let ids = d.instance_ids();
        check(ids.len() == d.instances.len() && !ids.is_empty(), || {
            format!("device {} has empty or duplicate instance ids", d.id)
        })?;
        for &i in &ids {
            check(seen.insert(i), || format!("instance {i} appears in two devices"))?;
        }
        parts.push(ids);
    }
    Ok(parts)
}

/// Recomputes every report count from the per-instance and per-device
/// artifacts and checks the structural invariants.
pub fn verify(
    report: &AnalysisReport,
    instances: &[ScanInstance],
    devices_pre: &[DeviceCluster],
    devices_post: &[DeviceCluster],
) -> Result<()> {
    let probes: usize = instances.iter().map(ScanInstance::len).sum();
    check(report.probe_count == probes, || {
        format!("probe_count {} but instances cover {probes} probes", report.probe_count)
    })?;
    let mut probe_ids = BTreeSet::new();
    for inst in instances {
        for &p in &inst.probe_indices {
            check(probe_ids.insert(p), || format!("probe {p} appears in two instances"))?;
        }
    }
    check(report.instance_count == instances.len(), || {
        format!("instance_count {} but {} instances", report.instance_count, instances.len())
    })?;
    check(report.instance_count <= report.probe_count, || "more instances than probes".into())?;

    let individual: BTreeSet<usize> = instances
        .iter()
        .filter(|i| i.class() != MacClass::Group)
        .map(|i| i.id)
        .collect();
    check(report.group_mac_instances == instances.len() - individual.len(), || {
        "group_mac_instances does not match the instance list".into()
    })?;

    check(report.device_count_pre_merge == devices_pre.len(), || {
        format!("device_count_pre_merge {} but {} devices", report.device_count_pre_merge, devices_pre.len())
    })?;
    check(report.device_count_post_merge == devices_post.len(), || {
        format!("device_count_post_merge {} but {} devices", report.device_count_post_merge, devices_post.len())
    })?;
    check(report.device_count_pre_merge >= report.device_count_post_merge, || {
        "merge increased the device count".into()
    })?;
    let global = devices_pre.iter().filter(|d| !d.randomized).count();
    let randomized_pre = devices_pre.iter().filter(|d| d.randomized).count();
    let randomized_post = devices_post.iter().filter(|d| d.randomized).count();
    check(report.global_mac_devices == global, || "global_mac_devices mismatch".into())?;
    check(report.randomized_devices_pre == randomized_pre, || "randomized_devices_pre mismatch".into())?;
    check(report.randomized_devices_post == randomized_post, || "randomized_devices_post mismatch".into())?;
    check(global + randomized_pre == report.device_count_pre_merge, || {
        "global + randomized devices do not add up".into()
    })?;

    let pre = partition_of(devices_pre)?;
    let covered: BTreeSet<usize> = pre.iter().flatten().copied().collect();
    check(covered == individual, || "pre-merge devices do not partition the individual instances".into())?;
    let post = partition_of(devices_post)?;
    let covered_post: BTreeSet<usize> = post.iter().flatten().copied().collect();
    check(covered_post == covered, || "merge lost or invented instances".into())?;
    for p in &pre {
        check(post.iter().any(|q| p.is_subset(q)), || "merge split a device".into())?;
    }
    Ok(())
}

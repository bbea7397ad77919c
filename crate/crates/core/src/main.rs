use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use probelink::capture::{read_capture_auto, write_capture, CaptureFormat, FcsMode, ReadOptions};
use probelink::device::{cluster_devices, individual_instances, Comparator, SimilarityMetric};
use probelink::jsonl::{read_jsonl, write_jsonl};
use probelink::report::{render_timeline, run_analysis, verify, TimelineFormat, TimelineStage};
use probelink::synth::{generate, scenario_from_file};
use probelink::temporal::{temporal_merge, MergeScope};
use probelink::{
    anonymize_capture, ie_statistics, group_instances, AnalysisConfig, AnalysisReport,
    AnonymizationKey, DeviceCluster, Error, ScanInstance,
};

#[derive(Parser)]
#[command(name = "probelink", version, about = "Re-identify Wi-Fi devices from probe-request captures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pseudonymize MACs, SSIDs and WPS identity fields.
    Anonymize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with = "random_salt", required_unless_present = "random_salt")]
        salt_hex: Option<String>,
        #[arg(long)]
        random_salt: bool,
        /// Output format; defaults to the input's.
        #[arg(long, value_enum)]
        format: Option<CaptureFormat>,
        #[command(flatten)]
        read: ReadArgs,
    },
    /// Information-element usage table.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        read: ReadArgs,
    },
    /// Group probes into scan instances (JSON lines).
    Instances {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        read: ReadArgs,
    },
    /// Cluster scan instances into devices (JSON lines).
    Devices {
        /// Scan instances as written by `instances`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        similarity: SimilarityArgs,
    },
    /// Merge devices by presence pattern (JSON lines).
    Merge {
        /// Devices as written by `devices`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        merge: MergeArgs,
    },
    /// Run the whole pipeline and write the report.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write instances.jsonl, devices.jsonl and merged.jsonl here.
        #[arg(long)]
        emit_dir: Option<PathBuf>,
        /// Anonymize before analysis.
        #[arg(long)]
        salt_hex: Option<String>,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        similarity: SimilarityArgs,
        #[command(flatten)]
        merge: MergeArgs,
        #[command(flatten)]
        read: ReadArgs,
    },
    /// Generate a labelled synthetic capture from a scenario file.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth sidecar (JSON lines).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value = "pcap")]
        format: CaptureFormat,
    },
    /// Recompute a report's counts from emitted artifacts.
    Verify {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        devices: PathBuf,
        #[arg(long)]
        merged: PathBuf,
    },
    /// Render presence timelines from a report.
    Timeline {
        #[arg(long)]
        report: PathBuf,
        /// Comma-separated device ids.
        #[arg(long, value_delimiter = ',', required = true)]
        devices: Vec<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: TimelineFormat,
        #[arg(long, value_enum, default_value = "post")]
        stage: TimelineStage,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReadArgs {
    /// Whether pcap frames carry a trailing FCS.
    #[arg(long, value_enum, default_value = "auto")]
    fcs: FcsMode,
}

#[derive(Args)]
struct InstanceArgs {
    /// Max seconds between probes of one scan; 0 disables the bound.
    #[arg(long)]
    instance_gap: Option<f64>,
    #[arg(long)]
    no_wraparound: bool,
}

#[derive(Args)]
struct SimilarityArgs {
    #[arg(long, value_enum)]
    metric: Option<SimilarityMetric>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Accept similarity equal to the threshold.
    #[arg(long)]
    inclusive: bool,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    pad: Option<f64>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long, value_enum)]
    scope: Option<MergeScope>,
}

impl InstanceArgs {
    fn apply(&self, cfg: &mut AnalysisConfig) {
        if let Some(g) = self.instance_gap {
            cfg.instance.max_gap = (g != 0.0).then_some(g);
        }
        if self.no_wraparound {
            cfg.instance.wraparound = false;
        }
    }
}

impl SimilarityArgs {
    fn apply(&self, cfg: &mut AnalysisConfig) {
        if let Some(m) = self.metric {
            cfg.similarity.metric = m;
        }
        if let Some(t) = self.threshold {
            cfg.similarity.threshold = t;
        }
        if self.inclusive {
            cfg.similarity.comparator = Comparator::Inclusive;
        }
    }
}

impl MergeArgs {
    fn apply(&self, cfg: &mut AnalysisConfig) {
        if let Some(g) = self.gap {
            cfg.merge.gap = g;
        }
        if let Some(p) = self.pad {
            cfg.merge.pad = p;
        }
        if let Some(o) = self.overlap {
            cfg.merge.overlap = o;
        }
        if let Some(s) = self.scope {
            cfg.merge.scope = s;
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<AnalysisConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(AnalysisConfig::from_json_str(&text).with_context(|| format!("in {}", p.display()))?)
        }
        None => Ok(AnalysisConfig::default()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(Error::from).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(Error::from).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn flush(mut w: impl Write) -> Result<()> {
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn emit_jsonl<T: serde::Serialize>(items: &[T], path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    write_jsonl(items, &mut out)?;
    flush(out)
}

fn read_input(path: &Path, read: &ReadArgs) -> Result<probelink::Capture> {
    let capture = read_capture_auto(open(path)?, &ReadOptions { fcs: read.fcs })
        .with_context(|| format!("reading {}", path.display()))?;
    let s = capture.stats;
    info!(
        "{}: {} probes, {} other frames, {} undecodable, {} truncated",
        path.display(),
        s.probes,
        s.skipped_non_probe,
        s.undecodable,
        s.truncated
    );
    Ok(capture)
}

fn read_report(path: &Path) -> Result<AnalysisReport> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    let report = serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(report)
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Anonymize { input, out, salt_hex, random_salt, format, read } => {
            let key = match salt_hex {
                Some(s) => AnonymizationKey::from_hex(&s)?,
                None => {
                    debug_assert!(random_salt);
                    AnonymizationKey::random()
                }
            };
            let format = match format {
                Some(f) => f,
                None => {
                    let mut magic = Vec::with_capacity(4);
                    open(&input)?.take(4).read_to_end(&mut magic).map_err(Error::from)?;
                    CaptureFormat::detect(&magic)
                }
            };
            let capture = read_input(&input, &read)?;
            let records = anonymize_capture(&capture.records, &key);
            let mut w = create(&out)?;
            write_capture(&records, &mut w, format)?;
            flush(w)?;
        }
        Command::Stats { input, read } => {
            let stats = ie_statistics(&read_input(&input, &read)?.probes());
            let mut out = io::stdout().lock();
            write!(out, "{}\n{}", stats.to_text(), stats.to_csv()).map_err(Error::from)?;
        }
        Command::Instances { input, out, config, instance, read } => {
            let mut cfg = load_config(config.as_deref())?;
            instance.apply(&mut cfg);
            cfg.validate()?;
            let probes = read_input(&input, &read)?.probes();
            let instances = group_instances(&probes, &cfg.instance);
            info!("{} instances", instances.len());
            emit_jsonl(&instances, out.as_deref())?;
        }
        Command::Devices { input, out, config, similarity } => {
            let mut cfg = load_config(config.as_deref())?;
            similarity.apply(&mut cfg);
            cfg.validate()?;
            let instances: Vec<ScanInstance> = read_lines(&input)?;
            let devices = cluster_devices(&individual_instances(&instances), &cfg.similarity);
            info!("{} devices", devices.len());
            emit_jsonl(&devices, out.as_deref())?;
        }
        Command::Merge { input, out, config, merge } => {
            let mut cfg = load_config(config.as_deref())?;
            merge.apply(&mut cfg);
            cfg.validate()?;
            let devices: Vec<DeviceCluster> = read_lines(&input)?;
            let merged = temporal_merge(&devices, &cfg.merge);
            info!("{} -> {} devices", devices.len(), merged.len());
            emit_jsonl(&merged, out.as_deref())?;
        }
        Command::Analyze {
            input,
            out,
            config,
            emit_dir,
            salt_hex,
            instance,
            similarity,
            merge,
            read,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            instance.apply(&mut cfg);
            similarity.apply(&mut cfg);
            merge.apply(&mut cfg);
            if salt_hex.is_some() {
                cfg.anonymize_salt = salt_hex;
            }
            cfg.validate()?;
            let probes = read_input(&input, &read)?.probes();
            let analysis = run_analysis(&probes, &cfg)?;
            if let Some(dir) = emit_dir {
                fs::create_dir_all(&dir).map_err(Error::from)?;
                emit_jsonl(&analysis.instances, Some(&dir.join("instances.jsonl")))?;
                emit_jsonl(&analysis.devices_pre, Some(&dir.join("devices.jsonl")))?;
                emit_jsonl(&analysis.devices_post, Some(&dir.join("merged.jsonl")))?;
            }
            eprint!("{}", analysis.report.funnel_text());
            let mut w = sink(out.as_deref())?;
            w.write_all(analysis.report.to_json().as_bytes()).map_err(Error::from)?;
            flush(w)?;
        }
        Command::Synth { scenario, out, truth, format } => {
            let scenario = scenario_from_file(&scenario)?;
            let generated = generate(&scenario)?;
            let mut w = create(&out)?;
            write_capture(&generated.records(), &mut w, format)?;
            flush(w)?;
            let mut t = create(&truth)?;
            t.write_all(generated.truth.to_jsonl().as_bytes()).map_err(Error::from)?;
            flush(t)?;
            info!(
                "{} probes from {} devices",
                generated.probes.len(),
                generated.truth.expected_devices
            );
        }
        Command::Verify { report, instances, devices, merged } => {
            let report = read_report(&report)?;
            let instances: Vec<ScanInstance> = read_lines(&instances)?;
            let devices: Vec<DeviceCluster> = read_lines(&devices)?;
            let merged: Vec<DeviceCluster> = read_lines(&merged)?;
            verify(&report, &instances, &devices, &merged)?;
            println!("ok");
        }
        Command::Timeline { report, devices, format, stage, out } => {
            let report = read_report(&report)?;
            let doc = render_timeline(&report, &devices, format, stage)?;
            let mut w = sink(out.as_deref())?;
            w.write_all(doc.as_bytes()).map_err(Error::from)?;
            flush(w)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.chain().find_map(|c| c.downcast_ref::<Error>()).map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

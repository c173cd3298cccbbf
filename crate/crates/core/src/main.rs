use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lira::experiments::studies::{run_study, Study};
use lira::experiments::trace::{run_trace_on, trace_csv};
use lira::experiments::{presets, resolve_topology, run_one, write_file, ExperimentConfig, TtlMode};
use lira::metrics::{report, sweep_row, Stat, SWEEP_HEADER};
use lira::topology::rocketfuel::{convert_cch, AttachOptions};
use lira::topology::synth;

#[derive(Parser)]
#[command(name = "lira", version, about = "Location-independent routing simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration per seed, or a whole study with --study.
    Run(Common),
    /// Run a canonical study (deployment, ratio, purging, incremental, trace).
    Sweep(Common),
    /// Replay the three-router walk-through and print the C-FIB rows.
    Trace(Common),
    /// Summarise a sweep CSV as mean and standard error per point.
    Report {
        /// Sweep CSV written by `run` or `sweep`.
        csv: PathBuf,
    },
    /// Print a bundled topology as a document, or convert a RocketFuel `.cch` map.
    Topology {
        /// Bundled name (fig2, telstra, abovenet) or a `.cch` file.
        source: String,
        /// Number of providers attached to a converted map.
        #[arg(long, default_value_t = 4)]
        providers: usize,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset applied before the config file (fig3 .. fig7).
    #[arg(long)]
    preset: Option<String>,
    /// Comma separated seed list.
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bundled topology name or topology file.
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    study: Option<String>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let preset = c.preset.clone().or_else(|| c.study.as_deref().and_then(default_preset).map(String::from));
    if let Some(p) = &preset {
        cfg.apply_preset(p)?;
    }
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        cfg.merge(&text).with_context(|| format!("in config {}", path.display()))?;
    }
    if let Some(t) = &c.topology {
        cfg.topology = t.clone();
    }
    if let Some(s) = &c.seed {
        cfg.set("seeds", s)?;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.display().to_string());
    }
    for kv in &c.set {
        let Some((k, v)) = kv.split_once('=') else { bail!("--set expects KEY=VALUE, got `{kv}`") };
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Preset matching a study when none is named.
fn default_preset(study: &str) -> Option<&'static str> {
    presets::NAMES.into_iter().find(|p| presets::study_of(p) == Some(study))
}

fn out_dir(cfg: &ExperimentConfig) -> Option<&Path> {
    cfg.out.as_deref().map(Path::new)
}

fn sweep(c: &Common, name: &str) -> Result<()> {
    let study: Study = name.parse()?;
    let mut cfg = load(c)?;
    if study == Study::Trace && c.topology.is_none() {
        cfg.topology = "fig2".into();
    }
    let res = run_study(study, &cfg)?;
    match out_dir(&cfg) {
        Some(dir) => {
            let csv = dir.join(format!("{name}.csv"));
            write_file(&csv, &res.csv)?;
            if study != Study::Trace {
                write_file(&dir.join(format!("{name}.json")), &res.json())?;
            }
            eprintln!("wrote {}", csv.display());
        }
        None => print!("{}", res.csv),
    }
    for p in &res.points {
        let labels: Vec<String> = p.labels.iter().map(|(k, v)| format!("{k}={v}")).collect();
        eprintln!(
            "{}: hit {} useful {} off {} fresh {} stale {}",
            labels.join(" "),
            fmt(p.hit),
            fmt(p.useful),
            fmt(p.off_path),
            fmt(p.freshness),
            fmt(p.stale)
        );
    }
    Ok(())
}

fn fmt(s: Stat) -> String {
    format!("{:.4}±{:.4}", s.mean, s.stderr)
}

fn run(c: &Common) -> Result<()> {
    if let Some(s) = &c.study {
        return sweep(c, s);
    }
    let cfg = load(c)?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    let mut reports = Vec::new();
    for &seed in &cfg.seeds {
        let (labels, out) = run_one(&cfg, seed)?;
        let mut m = out.metrics;
        if !cfg.ttl.is_empty() && cfg.ttl_mode == TtlMode::FreshOnly {
            m.count_stale_as_misses();
        }
        csv.push_str(&sweep_row(&labels, &m));
        csv.push('\n');
        reports.push(report(labels, &m, out.cfib_occupancy));
    }
    match out_dir(&cfg) {
        Some(dir) => {
            write_file(&dir.join("run.csv"), &csv)?;
            write_file(&dir.join("run.json"), &serde_json::to_string_pretty(&reports)?)?;
            eprintln!("wrote {}", dir.join("run.csv").display());
        }
        None => print!("{csv}"),
    }
    let col = |f: fn(&lira::metrics::Report) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
    eprintln!(
        "{} seed(s): hit {} on {} off {} fresh {} stale {} latency {:.2} ms",
        reports.len(),
        fmt(col(|r| r.hit_ratio)),
        fmt(col(|r| r.on_path)),
        fmt(col(|r| r.off_path)),
        fmt(col(|r| r.freshness)),
        fmt(col(|r| r.stale_ratio)),
        col(|r| r.mean_latency_ms).mean
    );
    Ok(())
}

fn trace(c: &Common) -> Result<()> {
    let topo = c.topology.clone().unwrap_or_else(|| "fig2".into());
    let rows = run_trace_on(resolve_topology(&topo)?)?;
    let csv = trace_csv(&rows);
    match &c.out {
        Some(dir) => write_file(&dir.join("trace.csv"), &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn topology(source: &str, providers: usize) -> Result<()> {
    let doc = if source == "fig2" {
        lira::experiments::FIG2_TOPOLOGY.to_string()
    } else if let Some(spec) = synth::by_name(source) {
        synth::document(&spec)
    } else {
        let text = std::fs::read_to_string(source).with_context(|| format!("cannot read {source}"))?;
        let opts = AttachOptions { providers, ..AttachOptions::default() };
        convert_cch(&text, &opts).with_context(|| format!("converting {source}"))?
    };
    print!("{doc}");
    Ok(())
}

const METRICS: [&str; 6] = ["hit_total", "hit_on", "hit_off", "freshness", "stale", "latency_ms"];

fn summarise(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().context("empty CSV")?.split(',').collect();
    for m in METRICS {
        if !header.contains(&m) {
            bail!("{}: missing column `{m}`", path.display());
        }
    }
    let mut groups: BTreeMap<Vec<String>, Vec<Vec<f64>>> = BTreeMap::new();
    let mut order = Vec::new();
    for (n, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != header.len() {
            bail!("{}: row {} has {} columns, expected {}", path.display(), n + 2, cols.len(), header.len());
        }
        let key: Vec<String> = header
            .iter()
            .zip(&cols)
            .filter(|(h, _)| **h != "seed" && !METRICS.contains(h))
            .map(|(h, v)| format!("{h}={v}"))
            .collect();
        let vals = METRICS
            .iter()
            .map(|m| {
                let i = header.iter().position(|h| h == m).expect("checked above");
                cols[i].parse::<f64>().with_context(|| format!("row {}: bad {m} `{}`", n + 2, cols[i]))
            })
            .collect::<Result<Vec<_>>>()?;
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(vals);
    }
    for key in order {
        let rows = &groups[&key];
        let stats: Vec<String> = METRICS
            .iter()
            .enumerate()
            .map(|(i, m)| format!("{m} {}", fmt(Stat::of(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))))
            .collect();
        println!("{} (n={}): {}", key.join(" "), rows.len(), stats.join(" "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(c) => run(c),
        Cmd::Sweep(c) => match &c.study {
            Some(s) => sweep(c, s),
            None => Err(anyhow::anyhow!("sweep needs --study")),
        },
        Cmd::Trace(c) => trace(c),
        Cmd::Report { csv } => summarise(csv),
        Cmd::Topology { source, providers } => topology(source, *providers),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

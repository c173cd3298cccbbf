//! Plain `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Lists are comma separated.
//! Every key has a default; unknown keys are rejected.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::cache::Admission;
use crate::cfib::Replacement;
use crate::node::ForwardPolicy;
use crate::topology::{Sizing, Strategy};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationMode {
    Off,
    /// Names rotate, retired names linger in caches.
    WithoutReplacement,
    /// Names rotate and served data carries purge lists.
    WithReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtlMode {
    /// Every cache hit counts, stale or not.
    AllHits,
    /// Only hits on the current version count.
    FreshOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Topology file, or a bundled name (`fig2`, `telstra`, `abovenet`).
    pub topology: String,
    pub strategy: Strategy,
    pub policy: Admission,
    pub cfib_ratio: f64,
    /// Network-wide cache slots as a fraction of catalog chunks.
    pub cache_budget: f64,
    /// Override the strategy's router fractions.
    pub cache_fraction: Option<f64>,
    pub cfib_fraction: Option<f64>,
    pub sizing: Sizing,
    pub alpha: f64,
    pub catalog_size: u32,
    pub chunks_per_object: u32,
    pub warmup: usize,
    pub measure: usize,
    /// Fetches per second; 0 runs fetches back to back.
    pub rate: f64,
    pub rotation: RotationMode,
    /// Seconds; a non-empty list selects the TTL baseline.
    pub ttl: Vec<f64>,
    pub ttl_mode: TtlMode,
    /// Rotation interval scale and floor, seconds.
    pub t_base: f64,
    pub t_min: f64,
    pub bundle: usize,
    /// Chunk duration, milliseconds.
    pub chunk_ms: f64,
    pub forward_policy: ForwardPolicy,
    pub cfib_replacement: Replacement,
    pub freshness_every: u64,
    pub freshness_depth: usize,
    pub piggyback: bool,
    pub seeds: Vec<u64>,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: "telstra".into(),
            strategy: Strategy::ChFa,
            policy: Admission::Lce,
            cfib_ratio: 16.0,
            cache_budget: 0.04,
            cache_fraction: None,
            cfib_fraction: None,
            sizing: Sizing::Split,
            alpha: 0.8,
            catalog_size: 10_000,
            chunks_per_object: 1,
            warmup: 50_000,
            measure: 100_000,
            rate: 100.0,
            rotation: RotationMode::Off,
            ttl: Vec::new(),
            ttl_mode: TtlMode::FreshOnly,
            t_base: 1000.0,
            t_min: 1.0,
            bundle: 8,
            chunk_ms: 0.0,
            forward_policy: ForwardPolicy::All,
            cfib_replacement: Replacement::Fifo,
            freshness_every: 1000,
            freshness_depth: 3,
            piggyback: false,
            seeds: vec![1],
            out: None,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Config { key: key.to_string(), msg: format!("bad value `{value}`: {why}") }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ExperimentError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ExperimentError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn flag(key: &str, value: &str) -> Result<bool, ExperimentError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn opt_fraction(key: &str, value: &str) -> Result<Option<f64>, ExperimentError> {
    if value == "auto" {
        return Ok(None);
    }
    let f: f64 = num(key, value)?;
    if !(0.0..=1.0).contains(&f) {
        return Err(bad(key, value, "must lie in [0, 1]"));
    }
    Ok(Some(f))
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 29] = [
        "topology",
        "strategy",
        "policy",
        "cfib_ratio",
        "cache_budget",
        "cache_fraction",
        "cfib_fraction",
        "sizing",
        "alpha",
        "catalog_size",
        "chunks_per_object",
        "warmup",
        "measure",
        "rate",
        "rotation",
        "ttl",
        "ttl_mode",
        "t_base",
        "t_min",
        "bundle",
        "chunk_ms",
        "forward_policy",
        "cfib_replacement",
        "freshness_every",
        "freshness_depth",
        "piggyback",
        "seeds",
        "out",
        "preset",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let v = value.trim();
        match key {
            "topology" => self.topology = v.to_string(),
            "strategy" => self.strategy = v.parse().map_err(|e: String| bad(key, v, e))?,
            "policy" => {
                self.policy = match v.to_ascii_lowercase().as_str() {
                    "lce" => Admission::Lce,
                    "choice" => Admission::Choice,
                    _ => return Err(bad(key, v, "expected lce or choice")),
                }
            }
            "cfib_ratio" => self.cfib_ratio = num(key, v)?,
            "cache_budget" => self.cache_budget = num(key, v)?,
            "cache_fraction" => self.cache_fraction = opt_fraction(key, v)?,
            "cfib_fraction" => self.cfib_fraction = opt_fraction(key, v)?,
            "sizing" => {
                self.sizing = match v {
                    "split" => Sizing::Split,
                    "per_router" => Sizing::PerRouter,
                    _ => return Err(bad(key, v, "expected split or per_router")),
                }
            }
            "alpha" => self.alpha = num(key, v)?,
            "catalog_size" => self.catalog_size = num(key, v)?,
            "chunks_per_object" => self.chunks_per_object = num(key, v)?,
            "warmup" => self.warmup = num(key, v)?,
            "measure" => self.measure = num(key, v)?,
            "rate" => self.rate = num(key, v)?,
            "rotation" => {
                self.rotation = match v {
                    "off" => RotationMode::Off,
                    "wo_replacement" | "w/o_replacement" => RotationMode::WithoutReplacement,
                    "w_replacement" | "w/_replacement" => RotationMode::WithReplacement,
                    _ => return Err(bad(key, v, "expected off, wo_replacement or w_replacement")),
                }
            }
            "ttl" => self.ttl = list(key, v)?,
            "ttl_mode" => {
                self.ttl_mode = match v {
                    "all_hits" => TtlMode::AllHits,
                    "fresh_only" => TtlMode::FreshOnly,
                    _ => return Err(bad(key, v, "expected all_hits or fresh_only")),
                }
            }
            "t_base" => self.t_base = num(key, v)?,
            "t_min" => self.t_min = num(key, v)?,
            "bundle" => self.bundle = num(key, v)?,
            "chunk_ms" => self.chunk_ms = num(key, v)?,
            "forward_policy" => {
                self.forward_policy = match v {
                    "all" => ForwardPolicy::All,
                    "breadcrumbs_first" | "if_ti_first" => ForwardPolicy::BreadcrumbsOnly,
                    _ => return Err(bad(key, v, "expected all or breadcrumbs_first")),
                }
            }
            "cfib_replacement" => {
                self.cfib_replacement = match v {
                    "fifo" => Replacement::Fifo,
                    "lru" => Replacement::Lru,
                    _ => return Err(bad(key, v, "expected fifo or lru")),
                }
            }
            "freshness_every" => self.freshness_every = num(key, v)?,
            "freshness_depth" => self.freshness_depth = num(key, v)?,
            "piggyback" => self.piggyback = flag(key, v)?,
            "seeds" => self.seeds = list(key, v)?,
            "out" => self.out = Some(v.to_string()),
            "preset" => self.apply_preset(v)?,
            _ => {
                let msg = format!("unknown key, expected one of {}", Self::KEYS.join(", "));
                return Err(ExperimentError::Config { key: key.to_string(), msg });
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut cfg = ExperimentConfig::default();
        cfg.merge(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn merge(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ExperimentError::Config {
                    key: line.to_string(),
                    msg: format!("line {}: expected key = value", n + 1),
                });
            };
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<(), ExperimentError> {
        let text = super::presets::preset(name)
            .ok_or_else(|| ExperimentError::Config { key: "preset".into(), msg: format!("unknown preset `{name}`") })?;
        self.merge(text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ExperimentError::Config { key: key.into(), msg: msg.into() })
            }
        };
        check(!self.seeds.is_empty(), "seeds", "at least one seed is required")?;
        check(self.cfib_ratio >= 0.0 && self.cfib_ratio.is_finite(), "cfib_ratio", "must be >= 0")?;
        check(self.cache_budget > 0.0 && self.cache_budget.is_finite(), "cache_budget", "must be > 0")?;
        check(self.alpha >= 0.0 && self.alpha.is_finite(), "alpha", "must be >= 0")?;
        check(self.catalog_size > 0, "catalog_size", "must be > 0")?;
        check(self.chunks_per_object > 0, "chunks_per_object", "must be > 0")?;
        check(self.measure > 0, "measure", "must be > 0")?;
        check(self.rate >= 0.0 && self.rate.is_finite(), "rate", "must be >= 0")?;
        check(self.bundle > 0, "bundle", "must be > 0")?;
        check(self.t_base > 0.0 && self.t_min > 0.0 && self.t_min <= self.t_base, "t_min", "need 0 < t_min <= t_base")?;
        check(self.ttl.iter().all(|t| *t > 0.0), "ttl", "values must be > 0")?;
        check(self.chunk_ms >= 0.0, "chunk_ms", "must be >= 0")?;
        Ok(())
    }

    /// Canonical document listing every key.
    pub fn to_document(&self) -> String {
        let mut s = String::new();
        let opt = |f: Option<f64>| f.map_or("auto".to_string(), |v| v.to_string());
        let join = |v: &[String]| v.join(",");
        let _ = writeln!(s, "topology = {}", self.topology);
        let _ = writeln!(s, "strategy = {}", self.strategy);
        let _ = writeln!(s, "policy = {}", if self.policy == Admission::Lce { "lce" } else { "choice" });
        let _ = writeln!(s, "cfib_ratio = {}", self.cfib_ratio);
        let _ = writeln!(s, "cache_budget = {}", self.cache_budget);
        let _ = writeln!(s, "cache_fraction = {}", opt(self.cache_fraction));
        let _ = writeln!(s, "cfib_fraction = {}", opt(self.cfib_fraction));
        let _ = writeln!(s, "sizing = {}", if self.sizing == Sizing::Split { "split" } else { "per_router" });
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "catalog_size = {}", self.catalog_size);
        let _ = writeln!(s, "chunks_per_object = {}", self.chunks_per_object);
        let _ = writeln!(s, "warmup = {}", self.warmup);
        let _ = writeln!(s, "measure = {}", self.measure);
        let _ = writeln!(s, "rate = {}", self.rate);
        let rot = match self.rotation {
            RotationMode::Off => "off",
            RotationMode::WithoutReplacement => "wo_replacement",
            RotationMode::WithReplacement => "w_replacement",
        };
        let _ = writeln!(s, "rotation = {rot}");
        let _ = writeln!(s, "ttl = {}", join(&self.ttl.iter().map(|t| t.to_string()).collect::<Vec<_>>()));
        let _ = writeln!(s, "ttl_mode = {}", if self.ttl_mode == TtlMode::AllHits { "all_hits" } else { "fresh_only" });
        let _ = writeln!(s, "t_base = {}", self.t_base);
        let _ = writeln!(s, "t_min = {}", self.t_min);
        let _ = writeln!(s, "bundle = {}", self.bundle);
        let _ = writeln!(s, "chunk_ms = {}", self.chunk_ms);
        let fp = if self.forward_policy == ForwardPolicy::All { "all" } else { "breadcrumbs_first" };
        let _ = writeln!(s, "forward_policy = {fp}");
        let cr = if self.cfib_replacement == Replacement::Fifo { "fifo" } else { "lru" };
        let _ = writeln!(s, "cfib_replacement = {cr}");
        let _ = writeln!(s, "freshness_every = {}", self.freshness_every);
        let _ = writeln!(s, "freshness_depth = {}", self.freshness_depth);
        let _ = writeln!(s, "piggyback = {}", self.piggyback);
        let _ = writeln!(s, "seeds = {}", join(&self.seeds.iter().map(|t| t.to_string()).collect::<Vec<_>>()));
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {o}");
        }
        s
    }
}

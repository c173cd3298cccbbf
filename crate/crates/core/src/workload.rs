//! Zipf object popularity and timed request streams.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::topology::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("zipf exponent must be finite and >= 0, got {0}")]
    BadAlpha(f64),
    #[error("catalog must hold at least one object")]
    EmptyCatalog,
    #[error("measured request count must be positive")]
    NoMeasurement,
    #[error("request rate must be positive, got {0}")]
    BadRate(f64),
    #[error("no clients to issue requests")]
    NoClients,
    #[error("workload csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Inverse-CDF sampler for Zipf(α, N) over ranks 1..=N.
#[derive(Debug, Clone)]
pub struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    pub fn new(alpha: f64, n: u32) -> Result<Self, WorkloadError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(WorkloadError::BadAlpha(alpha));
        }
        if n == 0 {
            return Err(WorkloadError::EmptyCatalog);
        }
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).powf(-alpha);
            cdf.push(acc);
        }
        for v in &mut cdf {
            *v /= acc;
        }
        cdf[n as usize - 1] = 1.0;
        Ok(Zipf { cdf })
    }

    pub fn len(&self) -> u32 {
        self.cdf.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// P(rank = k), 1-based.
    pub fn pmf(&self, k: u32) -> f64 {
        let i = k as usize - 1;
        if i == 0 {
            self.cdf[0]
        } else {
            self.cdf[i] - self.cdf[i - 1]
        }
    }

    /// P(rank <= k), 1-based.
    pub fn cdf(&self, k: u32) -> f64 {
        self.cdf[k as usize - 1]
    }

    /// Draws a 1-based rank.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) as u32 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Arrivals {
    Poisson {
        rate: f64,
    },
    /// Each fetch starts when the previous one completes.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub catalog_size: u32,
    pub chunks_per_object: u32,
    pub alpha: f64,
    pub arrivals: Arrivals,
    pub warmup: usize,
    pub measure: usize,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            catalog_size: 10_000,
            chunks_per_object: 1,
            alpha: 0.8,
            arrivals: Arrivals::Poisson { rate: 100.0 },
            warmup: 50_000,
            measure: 100_000,
        }
    }
}

/// One object fetch by one client. Object ids are 0-based popularity ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fetch {
    pub time: SimTime,
    pub client: NodeId,
    pub object: u32,
    pub measured: bool,
}

pub fn generate<R: Rng + ?Sized>(
    cfg: &WorkloadConfig,
    clients: &[NodeId],
    rng: &mut R,
) -> Result<Vec<Fetch>, WorkloadError> {
    if cfg.measure == 0 {
        return Err(WorkloadError::NoMeasurement);
    }
    if clients.is_empty() {
        return Err(WorkloadError::NoClients);
    }
    let zipf = Zipf::new(cfg.alpha, cfg.catalog_size)?;
    let rate = match cfg.arrivals {
        Arrivals::Poisson { rate } if rate > 0.0 && rate.is_finite() => Some(rate),
        Arrivals::Poisson { rate } => return Err(WorkloadError::BadRate(rate)),
        Arrivals::Sequential => None,
    };
    let mut t = 0.0f64;
    let total = cfg.warmup + cfg.measure;
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        if let Some(rate) = rate {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate;
        }
        let object = zipf.sample(rng) - 1;
        let client = clients[rng.random_range(0..clients.len())];
        out.push(Fetch { time: SimTime::from_secs(t), client, object, measured: i >= cfg.warmup });
    }
    Ok(out)
}

/// `time,client,object` rows; time in seconds. The warmup flag is not part
/// of the format, so it is re-derived from `warmup` on import.
pub fn to_csv(fetches: &[Fetch]) -> String {
    let mut out = String::from("time,client,object\n");
    for f in fetches {
        let _ = writeln!(out, "{:.6},{},{}", f.time.as_secs(), f.client.0, f.object);
    }
    out
}

pub fn from_csv(text: &str, warmup: usize) -> Result<Vec<Fetch>, WorkloadError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.starts_with("time")) {
            continue;
        }
        let err = |msg: String| WorkloadError::Csv { line: idx + 1, msg };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(err(format!("expected 3 columns, found {}", cols.len())));
        }
        let time: f64 = cols[0].trim().parse().map_err(|_| err(format!("bad time `{}`", cols[0])))?;
        let client: u32 = cols[1].trim().parse().map_err(|_| err(format!("bad client `{}`", cols[1])))?;
        let object: u32 = cols[2].trim().parse().map_err(|_| err(format!("bad object `{}`", cols[2])))?;
        let measured = out.len() >= warmup;
        out.push(Fetch { time: SimTime::from_secs(time), client: NodeId(client), object, measured });
    }
    Ok(out)
}

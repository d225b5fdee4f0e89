//! Connect / disconnect / read latency measurement.
//!
//! Each repetition runs the planned operations in order; state needed by an
//! operation (being connected or disconnected) is set up outside the timed
//! window. Timing uses the transport's clock, so virtual-clock runs are exact
//! and repeatable. Failed samples are counted but left out of the statistics.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consumer::{consume, ConnectionPolicy, ConsumedThing, ConsumerError};
use crate::td::{parse_td, TdError};
use crate::transport::{ClockMode, GattTransport, OpenOptions, TransportError, TransportSelection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchOperation {
    Connect,
    Disconnect,
    Read,
}

impl BenchOperation {
    pub const ALL: [BenchOperation; 3] = [BenchOperation::Connect, BenchOperation::Disconnect, BenchOperation::Read];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchOperation::Connect => "connect",
            BenchOperation::Disconnect => "disconnect",
            BenchOperation::Read => "read",
        }
    }
}

impl fmt::Display for BenchOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchOperation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchOperation::ALL
            .into_iter()
            .find(|o| o.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown bench operation {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Td(#[from] TdError),
    #[error(transparent)]
    Consumer(#[from] ConsumerError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("every {0} sample failed")]
    AllFailed(BenchOperation),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Mean and standard error of the mean (sample standard deviation over
/// √n), or `None` without samples. A single sample has an SEM of 0.
pub fn mean_sem(samples: &[f64]) -> Option<(f64, f64)> {
    if samples.is_empty() {
        return None;
    }
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = samples.len() as f64;
    let sem = if samples.len() < 2 { 0.0 } else { (m2 / (n - 1.0)).sqrt() / n.sqrt() };
    Some((mean, sem))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    pub operation: BenchOperation,
    pub samples_ms: Vec<f64>,
    pub n: usize,
    pub mean_ms: f64,
    pub sem_ms: f64,
    pub failures: usize,
}

impl BenchStats {
    pub fn from_samples(operation: BenchOperation, samples_ms: Vec<f64>, failures: usize) -> Option<Self> {
        let (mean_ms, sem_ms) = mean_sem(&samples_ms)?;
        Some(BenchStats { operation, n: samples_ms.len(), samples_ms, mean_ms, sem_ms, failures })
    }
}

/// Results for one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub device: String,
    pub device_id: String,
    pub stats: Vec<BenchStats>,
}

impl BenchReport {
    pub fn get(&self, op: BenchOperation) -> Option<&BenchStats> {
        self.stats.iter().find(|s| s.operation == op)
    }
}

/// One discovery per repetition: the read reuses the timed connection.
fn default_operations() -> Vec<BenchOperation> {
    vec![BenchOperation::Connect, BenchOperation::Read, BenchOperation::Disconnect]
}

fn default_repetitions() -> usize {
    25
}

fn default_warmup() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BenchPlan {
    /// TD path; relative paths are taken from the plan's directory.
    pub td: PathBuf,
    #[serde(default = "default_operations")]
    pub operations: Vec<BenchOperation>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// `sim:<config>` (relative to the plan) or `host`.
    pub transport: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Property timed by `read`.
    #[serde(default)]
    pub property: Option<String>,
    #[serde(default, with = "policy_name")]
    pub policy: ConnectionPolicy,
    /// Overrides the clock of a simulated network.
    #[serde(default)]
    pub clock: Option<ClockMode>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

mod policy_name {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::consumer::ConnectionPolicy;

    pub fn serialize<S: Serializer>(p: &ConnectionPolicy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(p.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ConnectionPolicy, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl BenchPlan {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let plan: BenchPlan = serde_json::from_str(text).map_err(|e| BenchError::Plan(e.to_string()))?;
        plan.check()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = read(path)?;
        let mut plan = Self::from_json(&text)?;
        plan.base_dir = path.parent().map(Path::to_path_buf);
        Ok(plan)
    }

    fn check(&self) -> Result<(), BenchError> {
        if self.repetitions == 0 {
            return Err(BenchError::Plan("repetitions must be at least 1".into()));
        }
        if self.operations.is_empty() {
            return Err(BenchError::Plan("no operations".into()));
        }
        if self.operations.contains(&BenchOperation::Read) && self.property.is_none() {
            return Err(BenchError::Plan("read needs a property".into()));
        }
        self.transport_selection()?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn td_path(&self) -> PathBuf {
        self.resolve(&self.td)
    }

    pub fn transport_selection(&self) -> Result<TransportSelection, BenchError> {
        match self.transport.parse().map_err(BenchError::Plan)? {
            TransportSelection::Sim(p) => Ok(TransportSelection::Sim(self.resolve(&p))),
            host => Ok(host),
        }
    }

    pub fn settings(&self) -> BenchSettings {
        BenchSettings {
            operations: self.operations.clone(),
            repetitions: self.repetitions,
            warmup: self.warmup,
            property: self.property.clone(),
        }
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSettings {
    pub operations: Vec<BenchOperation>,
    pub repetitions: usize,
    pub warmup: usize,
    pub property: Option<String>,
}

/// Elapsed time of one operation in milliseconds. `connect` covers
/// discovery, connection and service exploration; `read` ends when the
/// decoded value is available.
pub fn time_operation(op: BenchOperation, thing: &ConsumedThing, property: Option<&str>) -> Result<f64, BenchError> {
    let clock = thing.transport().clock();
    let device = thing.device()?;
    let start = clock.now();
    match op {
        BenchOperation::Connect => thing.connect()?,
        BenchOperation::Disconnect => thing.transport().disconnect(device)?,
        BenchOperation::Read => {
            let name = property.ok_or_else(|| BenchError::Plan("read needs a property".into()))?;
            thing.read_property(name)?;
        }
    }
    Ok(ms(clock.now().saturating_sub(start)))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn prepare(op: BenchOperation, thing: &ConsumedThing) -> Result<(), BenchError> {
    match op {
        BenchOperation::Connect => thing.disconnect()?,
        BenchOperation::Disconnect => thing.connect()?,
        BenchOperation::Read if thing.policy() != ConnectionPolicy::ReconnectPerOperation => thing.connect()?,
        BenchOperation::Read => {}
    }
    Ok(())
}

/// Runs `settings` against an already consumed Thing.
pub fn bench_thing(thing: &ConsumedThing, settings: &BenchSettings) -> Result<Vec<BenchStats>, BenchError> {
    if settings.repetitions == 0 {
        return Err(BenchError::Plan("repetitions must be at least 1".into()));
    }
    let mut samples: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0); settings.operations.len()];
    for rep in 0..settings.warmup + settings.repetitions {
        let counted = rep >= settings.warmup;
        for (i, op) in settings.operations.iter().enumerate() {
            let outcome = prepare(*op, thing).and_then(|()| time_operation(*op, thing, settings.property.as_deref()));
            match outcome {
                Ok(t) if counted => samples[i].0.push(t),
                Ok(_) => {}
                Err(e) => {
                    log::warn!("{op} run {rep} failed: {e}");
                    if counted {
                        samples[i].1 += 1;
                    }
                }
            }
        }
    }
    thing.disconnect()?;
    settings
        .operations
        .iter()
        .zip(samples)
        .map(|(op, (s, failures))| BenchStats::from_samples(*op, s, failures).ok_or(BenchError::AllFailed(*op)))
        .collect()
}

/// Loads the plan's TD and transport and runs it.
pub fn run_bench(plan: &BenchPlan) -> Result<BenchReport, BenchError> {
    plan.check()?;
    let td = parse_td(&read(&plan.td_path())?)?;
    let options =
        OpenOptions { seed: plan.seed, clock: plan.clock, connect_timeout: plan.timeout_ms.map(Duration::from_millis) };
    let opened = plan.transport_selection()?.open(&options)?;
    run_bench_on(td, opened.transport, plan)
}

pub fn run_bench_on(
    td: crate::td::ThingDescription,
    transport: Arc<dyn GattTransport>,
    plan: &BenchPlan,
) -> Result<BenchReport, BenchError> {
    let device = td.title.clone();
    let thing = consume(td, transport, plan.policy)?;
    let device_id = thing.device()?.to_dashed();
    let stats = bench_thing(&thing, &plan.settings())?;
    Ok(BenchReport { device, device_id, stats })
}

pub const TABLE_HEADER: &str = "Device | Connect / ms | Disconnect / ms | read / ms";

/// One row per report with `mean ± sem` cells; `-` where an operation was
/// not measured.
pub fn format_table(reports: &[BenchReport]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in reports {
        let cells: Vec<String> = BenchOperation::ALL
            .iter()
            .map(|op| match r.get(*op) {
                Some(s) => format!("{:.2} ± {:.2}", s.mean_ms, s.sem_ms),
                None => "-".into(),
            })
            .collect();
        out.push_str(&format!("{} | {}\n", r.device, cells.join(" | ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub operation: BenchOperation,
    pub n: usize,
    pub mean_ms: f64,
    pub sem_ms: f64,
}

impl From<&BenchStats> for CsvRow {
    fn from(s: &BenchStats) -> Self {
        CsvRow { operation: s.operation, n: s.n, mean_ms: s.mean_ms, sem_ms: s.sem_ms }
    }
}

/// `operation,n,mean_ms,sem_ms` with full-precision numbers.
pub fn to_csv(stats: &[BenchStats]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in stats {
        w.serialize(CsvRow::from(s))?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Plan(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests;

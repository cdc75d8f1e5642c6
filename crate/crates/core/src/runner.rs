//! Config parsing, scenario execution, sweeps and artifact persistence.

use crate::dynamics::{propagate, EnvironmentSpec, NumericsSpec, TrajectoryRecord};
use crate::metrics::{grade, GradingReport};
use crate::model::{initial_state, target_state, ProtocolKind, ProtocolSpec, SystemSpec, WellStates};
use crate::phasespace::cumulative_sigma;
use crate::spinbasis::SpinBasis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const TRAJECTORY_SCHEMA: &str = "trajectory/1";
pub const SWEEP_SCHEMA: &str = "sweep/1";
pub const TABLE1_SCHEMA: &str = "table1/1";
pub const THREADS_ENV: &str = "WELLGRADE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("integration failed during {step}: {source}")]
    Integration {
        step: &'static str,
        #[source]
        source: crate::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Integration { .. } => 3,
            RunError::Io { .. } => 1,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Validation failures from the core are config errors; anything raised
/// while running is an integration error.
fn config_err(e: crate::Error) -> RunError {
    RunError::Config(e.to_string())
}

fn step_err(step: &'static str) -> impl Fn(crate::Error) -> RunError {
    move |source| RunError::Integration { step, source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub c1: f64,
    pub c2: f64,
    pub m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub kappa: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub delta: f64,
    pub amplitude: f64,
    pub tau_omega: f64,
    #[serde(default = "default_ramp_fraction")]
    pub ramp_fraction: f64,
}

fn default_ramp_fraction() -> f64 {
    crate::model::DEFAULT_RAMP_FRACTION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub gamma_over_omega: f64,
    pub lambda_over_omega: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub basis: BasisConfig,
    pub protocol: ProtocolConfig,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub numerics: NumericsSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::standard(ProtocolKind::Quantum1, 1.0)
    }
}

impl RunConfig {
    /// Default well, basis and bath with the protocol time-scale used for each kind
    /// (τω = 300 classical, 10 quantum).
    pub fn standard(kind: ProtocolKind, temperature: f64) -> Self {
        let p = ProtocolSpec::standard(kind, 1.0);
        RunConfig {
            system: SystemConfig {
                c1: -1.5,
                c2: 0.05,
                m: 1.0,
            },
            basis: BasisConfig { n: 60, kappa: 60 },
            protocol: ProtocolConfig {
                kind,
                delta: p.delta,
                amplitude: p.amplitude,
                tau_omega: if kind.is_quantum() { 10.0 } else { 300.0 },
                ramp_fraction: p.ramp_fraction,
            },
            environment: EnvironmentConfig {
                gamma_over_omega: 1e-2,
                lambda_over_omega: 1e-3,
                temperature,
            },
            numerics: NumericsSpec::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            RunError::Config(describe_parse_error(&path, &inner))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn system(&self) -> SystemSpec {
        SystemSpec {
            m: self.system.m,
            c1: self.system.c1,
            c2: self.system.c2,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.system().validate().map_err(config_err)?;
        SpinBasis::new(self.basis.n, self.basis.kappa).map_err(config_err)?;
        if !(self.protocol.tau_omega > 0.0) {
            return Err(RunError::Config(format!(
                "invalid parameter `protocol.tau_omega`: must be positive, got {}",
                self.protocol.tau_omega
            )));
        }
        self.protocol_spec(1.0).validate().map_err(config_err)?;
        let e = &self.environment;
        for (field, v) in [
            ("environment.gamma_over_omega", e.gamma_over_omega),
            ("environment.lambda_over_omega", e.lambda_over_omega),
        ] {
            if !(v >= 0.0) {
                return Err(RunError::Config(format!(
                    "invalid parameter `{field}`: must be non-negative, got {v}"
                )));
            }
        }
        EnvironmentSpec::new(0.0, 0.0, e.temperature).validate().map_err(config_err)?;
        self.numerics.validate().map_err(config_err)?;
        if self.output.formats.is_empty() {
            return Err(RunError::Config("invalid parameter `output.formats`: list is empty".into()));
        }
        Ok(())
    }

    fn protocol_spec(&self, tau: f64) -> ProtocolSpec {
        ProtocolSpec {
            kind: self.protocol.kind,
            delta: self.protocol.delta,
            amplitude: self.protocol.amplitude,
            tau,
            ramp_fraction: self.protocol.ramp_fraction,
        }
    }

    /// Snapshot used for hashing: compact JSON in field-declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn content_hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

fn describe_parse_error(path: &str, inner: &str) -> String {
    // serde reports a missing field at the parent path
    if let Some(rest) = inner.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            let full = if path == "." || path.is_empty() {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
            return format!("missing field `{full}`");
        }
    }
    if path == "." || path.is_empty() {
        inner.to_string()
    } else {
        format!("at `{path}`: {inner}")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Quantities fixed before the run from the t = 0 spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub omega: f64,
    pub tau: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub temperature: f64,
}

pub struct ScenarioOutcome {
    pub derived: Derived,
    pub trajectory: TrajectoryRecord,
    pub grading: GradingReport,
}

/// Propagates and grades the configured scenario without touching disk.
pub fn execute(config: &RunConfig) -> Result<ScenarioOutcome, RunError> {
    execute_with(config, config.protocol.kind, config.protocol.tau_omega, config.environment.temperature)
}

fn execute_with(
    config: &RunConfig,
    kind: ProtocolKind,
    tau_omega: f64,
    temperature: f64,
) -> Result<ScenarioOutcome, RunError> {
    let hbar = 1.0;
    let basis = SpinBasis::new(config.basis.n, config.basis.kappa).map_err(config_err)?;
    let system = config.system();
    let mut base = config.protocol_spec(1.0);
    if kind != base.kind {
        // amplitudes are protocol-specific; other kinds use their standard value
        base = ProtocolSpec {
            kind,
            amplitude: ProtocolSpec::standard(kind, 1.0).amplitude,
            ..base
        };
    }
    base.validate().map_err(config_err)?;
    let omega = WellStates::at_start(&basis, &system, &base)
        .map_err(step_err("well classification"))?
        .omega(hbar);
    let protocol = ProtocolSpec {
        tau: tau_omega / omega,
        ..base
    };
    protocol.validate().map_err(config_err)?;
    let env = EnvironmentSpec::new(
        config.environment.gamma_over_omega * omega,
        config.environment.lambda_over_omega * omega,
        temperature,
    );
    env.validate().map_err(config_err)?;
    let mut numerics = config.numerics;
    if numerics.sample_dt.is_none() {
        numerics.sample_dt = Some(protocol.tau / 500.0);
    }
    let rho0 = initial_state(&basis, &system, &protocol).map_err(step_err("initial state"))?;
    let target = target_state(&basis, &system, &protocol, protocol.tau).map_err(step_err("target state"))?;
    log::info!("{kind} τω={tau_omega} T={temperature}: τ = {:.4}, ω = {omega:.5}", protocol.tau);
    let trajectory = propagate(&rho0, &system, &protocol, &env, &basis, &numerics, kind.is_quantum())
        .map_err(step_err("propagation"))?;
    let grading = grade(&trajectory, &target, hbar).map_err(step_err("grading"))?;
    Ok(ScenarioOutcome {
        derived: Derived {
            omega,
            tau: protocol.tau,
            gamma: env.gamma,
            lambda: env.lambda,
            temperature,
        },
        trajectory,
        grading,
    })
}

/// 9 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.8e}")
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 19] = [
    "t",
    "energy",
    "energy_variance",
    "ground_energy",
    "transfer",
    "wehrl",
    "husimi_norm",
    "pi",
    "phi",
    "sigma",
    "coherence",
    "purity",
    "von_neumann",
    "min_eigenvalue",
    "generator_hs",
    "generator_op",
    "generator_tr",
    "sta_cost",
    "hs_ratio_running",
];

pub fn trajectory_csv(traj: &TrajectoryRecord) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_COLUMNS)?;
    let sigma = if traj.pi.len() == traj.times.len() {
        cumulative_sigma(&traj.times, &traj.pi)
    } else {
        Vec::new()
    };
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(f64::NAN);
    let mut hs_int = 0.0;
    for i in 0..traj.len() {
        if i > 0 {
            let dt = traj.times[i] - traj.times[i - 1];
            hs_int += 0.5 * dt * (traj.generator_hs[i] + traj.generator_hs[i - 1]);
        }
        let t = traj.times[i];
        let running = if t > 0.0 { hs_int / t } else { f64::NAN };
        let row = [
            t,
            at(&traj.energy, i),
            at(&traj.energy_variance, i),
            at(&traj.ground_energy, i),
            at(&traj.transfer, i),
            at(&traj.wehrl, i),
            at(&traj.husimi_norm, i),
            at(&traj.pi, i),
            at(&traj.phi, i),
            at(&sigma, i),
            at(&traj.coherence, i),
            at(&traj.purity, i),
            at(&traj.von_neumann, i),
            at(&traj.min_eigenvalue, i),
            at(&traj.generator_hs, i),
            at(&traj.generator_op, i),
            at(&traj.generator_tr, i),
            at(&traj.sta_cost, i),
            running,
        ];
        w.write_record(row.iter().map(|&x| fmt_sig(x)))?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

#[derive(Clone, Debug, Serialize)]
pub struct FileChecksum {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub schemas: Vec<String>,
    pub config: RunConfig,
    pub config_sha256: String,
    pub started: String,
    pub finished: String,
    pub derived: Vec<Derived>,
    pub files: Vec<FileChecksum>,
}

impl RunManifest {
    fn new(command: &str, config: &RunConfig, started: chrono::DateTime<chrono::Utc>) -> Self {
        RunManifest {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            schemas: Vec::new(),
            config: config.clone(),
            config_sha256: config.content_hash(),
            started: started.to_rfc3339(),
            finished: String::new(),
            derived: Vec::new(),
            files: Vec::new(),
        }
    }

    /// True when the stored hash matches a re-serialization of the stored config.
    pub fn hash_matches(&self) -> bool {
        self.config.content_hash() == self.config_sha256
    }
}

struct ArtifactDir {
    dir: PathBuf,
    files: Vec<FileChecksum>,
}

impl ArtifactDir {
    fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(ArtifactDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| RunError::io(&path, e))?;
        self.files.push(FileChecksum {
            name: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest, RunError> {
        manifest.finished = chrono::Utc::now().to_rfc3339();
        manifest.files = std::mem::take(&mut self.files);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        Ok(manifest)
    }
}

fn csv_bytes(r: Result<Vec<u8>, csv::Error>, dir: &Path) -> Result<Vec<u8>, RunError> {
    r.map_err(|e| RunError::io(dir, std::io::Error::other(e)))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct GradingArtifact<'a> {
    protocol: ProtocolKind,
    tau_omega: f64,
    #[serde(rename = "T")]
    temperature: f64,
    #[serde(flatten)]
    grading: &'a GradingReport,
    trace_drift: f64,
    q_floor_hits: usize,
    accepted_steps: usize,
    rejected_steps: usize,
}

/// Writes `trajectory.csv`, `grading.json` and `manifest.json` into `dir`.
pub fn run_scenario(config: &RunConfig, dir: &Path) -> Result<(RunManifest, GradingReport), RunError> {
    config.validate()?;
    let started = chrono::Utc::now();
    let outcome = execute(config)?;
    let mut out = ArtifactDir::create(dir)?;
    let mut manifest = RunManifest::new("simulate", config, started);
    if config.output.formats.contains(&OutputFormat::Csv) {
        let bytes = csv_bytes(trajectory_csv(&outcome.trajectory), dir)?;
        out.write("trajectory.csv", &bytes)?;
        manifest.schemas.push(TRAJECTORY_SCHEMA.into());
    }
    let artifact = GradingArtifact {
        protocol: config.protocol.kind,
        tau_omega: config.protocol.tau_omega,
        temperature: config.environment.temperature,
        grading: &outcome.grading,
        trace_drift: outcome.trajectory.max_trace_drift,
        q_floor_hits: outcome.trajectory.q_floor_hits,
        accepted_steps: outcome.trajectory.stats.accepted,
        rejected_steps: outcome.trajectory.stats.rejected,
    };
    out.write("grading.json", &json_bytes(&artifact))?;
    manifest.derived.push(outcome.derived);
    let manifest = out.finish(manifest)?;
    Ok((manifest, outcome.grading))
}

/// Worker pool capped by `WELLGRADE_THREADS` (unset or 0: rayon default).
pub fn worker_pool() -> Result<rayon::ThreadPool, RunError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| RunError::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Config(format!("cannot build worker pool: {e}")))
}

/// Log-spaced τω grid from 0.1 to 300.
pub fn default_tau_omegas() -> Vec<f64> {
    let (lo, hi, n) = (0.1f64.ln(), 300f64.ln(), 12);
    (0..n).map(|k| (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub protocol: ProtocolKind,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub tau_omega: f64,
    pub hs_ratio: f64,
    pub sigma_ir: f64,
    pub transfer_pct: f64,
    pub g_s: f64,
    pub g_q: f64,
    pub g_t: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub reason: String,
}

impl SweepRow {
    fn from_result(kind: ProtocolKind, temperature: f64, tau_omega: f64, r: Result<GradingReport, RunError>) -> Self {
        match r {
            Ok(g) => SweepRow {
                protocol: kind,
                temperature,
                tau_omega,
                hs_ratio: g.hs_ratio,
                sigma_ir: g.sigma_ir,
                transfer_pct: g.transfer_pct,
                g_s: g.g_s,
                g_q: g.g_q,
                g_t: g.g_t,
                g: g.g,
                reason: String::new(),
            },
            Err(e) => SweepRow {
                protocol: kind,
                temperature,
                tau_omega,
                hs_ratio: f64::NAN,
                sigma_ir: f64::NAN,
                transfer_pct: f64::NAN,
                g_s: f64::NAN,
                g_q: f64::NAN,
                g_t: f64::NAN,
                g: f64::NAN,
                reason: e.to_string(),
            },
        }
    }
}

/// One row per (protocol, T, τω) in that nesting order; failed cells become NaN rows.
/// Protocols other than the configured one take their standard amplitude.
pub fn sweep(
    config: &RunConfig,
    protocols: &[ProtocolKind],
    tau_omegas: &[f64],
    temperatures: &[f64],
) -> Result<Vec<SweepRow>, RunError> {
    if protocols.is_empty() {
        return Err(RunError::Config("protocol list is empty".into()));
    }
    if tau_omegas.is_empty() {
        return Err(RunError::Config("tau_omega list is empty".into()));
    }
    if temperatures.is_empty() {
        return Err(RunError::Config("temperature list is empty".into()));
    }
    if let Some(bad) = tau_omegas.iter().find(|v| !(**v > 0.0)) {
        return Err(RunError::Config(format!("tau_omega values must be positive, got {bad}")));
    }
    if let Some(bad) = temperatures.iter().find(|v| !(**v > 0.0)) {
        return Err(RunError::Config(format!("temperatures must be positive, got {bad}")));
    }
    config.validate()?;
    let mut cells = Vec::new();
    for &kind in protocols {
        for &temp in temperatures {
            for &tw in tau_omegas {
                cells.push((kind, temp, tw));
            }
        }
    }
    let pool = worker_pool()?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(kind, temp, tw)| {
                let r = execute_with(config, kind, tw, temp).map(|o| o.grading);
                if let Err(e) = &r {
                    log::warn!("sweep cell {kind} T={temp} τω={tw} failed: {e}");
                }
                SweepRow::from_result(kind, temp, tw, r)
            })
            .collect()
    });
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "protocol", "T", "tau_omega", "hs_ratio", "sigma_ir", "transfer_pct", "g_s", "g_q", "g_t", "G", "reason",
    ])?;
    for r in rows {
        let mut rec = vec![r.protocol.name().to_string()];
        rec.extend(
            [r.temperature, r.tau_omega, r.hs_ratio, r.sigma_ir, r.transfer_pct, r.g_s, r.g_q, r.g_t, r.g]
                .iter()
                .map(|&x| fmt_sig(x)),
        );
        rec.push(r.reason.clone());
        w.write_record(&rec)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn run_sweep(
    config: &RunConfig,
    protocols: &[ProtocolKind],
    tau_omegas: &[f64],
    temperatures: &[f64],
    dir: &Path,
) -> Result<(RunManifest, Vec<SweepRow>), RunError> {
    let started = chrono::Utc::now();
    let rows = sweep(config, protocols, tau_omegas, temperatures)?;
    let mut out = ArtifactDir::create(dir)?;
    let mut manifest = RunManifest::new("sweep", config, started);
    out.write("sweep.csv", &csv_bytes(sweep_csv(&rows), dir)?)?;
    manifest.schemas.push(SWEEP_SCHEMA.into());
    if config.output.formats.contains(&OutputFormat::Json) {
        out.write("sweep.json", &json_bytes(&rows))?;
    }
    Ok((out.finish(manifest)?, rows))
}

pub const TABLE1_ROWS: [&str; 8] = ["tau_omega", "hs_ratio", "sigma_ir", "P", "g_s", "g_q", "g_t", "G"];

/// Reference values per scenario, in `TABLE1_ROWS` order (P in percent).
pub fn table1_reference(kind: ProtocolKind, temperature: f64) -> Option<[f64; 8]> {
    use ProtocolKind::*;
    let hot = temperature == 10.0;
    if !hot && temperature != 1.0 {
        return None;
    }
    Some(match (kind, hot) {
        (Classical1, false) => [300.0, 0.13, 1.37, 82.39, 0.88, 0.27, 0.25, 0.06],
        (Classical1, true) => [300.0, 0.08, 2.36, 57.80, 0.90, 0.09, 0.09, 0.007],
        (Classical2, false) => [300.0, 0.20, 2.18, 91.54, 0.86, 0.36, 0.11, 0.03],
        (Classical2, true) => [300.0, 0.07, 4.29, 56.32, 0.90, 0.10, 0.01, 0.0009],
        (Quantum1, false) => [10.0, 2.20, 0.10, 99.98, 0.90, 0.94, 0.90, 0.76],
        (Quantum1, true) => [10.0, 1.72, 0.47, 96.10, 0.91, 0.59, 0.63, 0.34],
        (Quantum2, false) => [10.0, 2.06, 0.10, 95.45, 0.90, 0.89, 0.90, 0.72],
        (Quantum2, true) => [10.0, 1.33, 0.46, 68.28, 0.92, 0.40, 0.63, 0.23],
    })
}

pub const TABLE1_TEMPERATURES: [f64; 2] = [1.0, 10.0];

#[derive(Clone, Debug, Serialize)]
pub struct Table1Column {
    pub protocol: ProtocolKind,
    #[serde(rename = "T")]
    pub temperature: f64,
    pub values: Vec<f64>,
    pub reference: Vec<f64>,
    pub delta: Vec<f64>,
    pub reason: String,
}

impl Table1Column {
    pub fn label(&self) -> String {
        format!("{}_T{}", self.protocol.name(), self.temperature)
    }

    pub fn value(&self, row: &str) -> f64 {
        TABLE1_ROWS.iter().position(|r| *r == row).map_or(f64::NAN, |i| self.values[i])
    }

    pub fn reference_value(&self, row: &str) -> f64 {
        TABLE1_ROWS.iter().position(|r| *r == row).map_or(f64::NAN, |i| self.reference[i])
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table1Overrides {
    pub gamma_over_omega: Option<f64>,
    pub lambda_over_omega: Option<f64>,
    pub numerics: Option<NumericsSpec>,
}

fn table1_config(kind: ProtocolKind, temperature: f64, ov: &Table1Overrides) -> RunConfig {
    let mut cfg = RunConfig::standard(kind, temperature);
    if let Some(g) = ov.gamma_over_omega {
        cfg.environment.gamma_over_omega = g;
    }
    if let Some(l) = ov.lambda_over_omega {
        cfg.environment.lambda_over_omega = l;
    }
    if let Some(n) = ov.numerics {
        cfg.numerics = n;
    }
    cfg
}

/// The 4 protocols × 2 temperatures at their standard time-scales.
pub fn table1(ov: &Table1Overrides) -> Result<Vec<Table1Column>, RunError> {
    let mut cells = Vec::new();
    for kind in ProtocolKind::ALL {
        for temp in TABLE1_TEMPERATURES {
            let cfg = table1_config(kind, temp, ov);
            cfg.validate()?;
            cells.push(cfg);
        }
    }
    let pool = worker_pool()?;
    let columns = pool.install(|| {
        cells
            .par_iter()
            .map(|cfg| {
                let kind = cfg.protocol.kind;
                let temp = cfg.environment.temperature;
                let reference = table1_reference(kind, temp).expect("table temperatures").to_vec();
                let (values, reason) = match execute(cfg) {
                    Ok(o) => {
                        let g = o.grading;
                        let v = vec![
                            cfg.protocol.tau_omega,
                            g.hs_ratio,
                            g.sigma_ir,
                            100.0 * g.transfer_pct,
                            g.g_s,
                            g.g_q,
                            g.g_t,
                            g.g,
                        ];
                        (v, String::new())
                    }
                    Err(e) => {
                        log::warn!("table1 cell {kind} T={temp} failed: {e}");
                        (vec![f64::NAN; TABLE1_ROWS.len()], e.to_string())
                    }
                };
                let delta = values.iter().zip(&reference).map(|(v, r)| v - r).collect();
                Table1Column {
                    protocol: kind,
                    temperature: temp,
                    values,
                    reference,
                    delta,
                    reason,
                }
            })
            .collect()
    });
    Ok(columns)
}

/// Rows are the table quantities; each scenario contributes a value and a delta column.
pub fn table1_csv(columns: &[Table1Column]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["quantity".to_string()];
    for c in columns {
        header.push(c.label());
        header.push(format!("{}_delta", c.label()));
    }
    w.write_record(&header)?;
    for (i, row) in TABLE1_ROWS.iter().enumerate() {
        let mut rec = vec![row.to_string()];
        for c in columns {
            rec.push(fmt_sig(c.values[i]));
            rec.push(fmt_sig(c.delta[i]));
        }
        w.write_record(&rec)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn run_table1(ov: &Table1Overrides, dir: &Path) -> Result<(RunManifest, Vec<Table1Column>), RunError> {
    let started = chrono::Utc::now();
    let columns = table1(ov)?;
    let mut out = ArtifactDir::create(dir)?;
    let base = table1_config(ProtocolKind::Quantum1, 1.0, ov);
    let mut manifest = RunManifest::new("table1", &base, started);
    out.write("table1.csv", &csv_bytes(table1_csv(&columns), dir)?)?;
    out.write("table1.json", &json_bytes(&columns))?;
    manifest.schemas.push(TABLE1_SCHEMA.into());
    Ok((out.finish(manifest)?, columns))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json() -> serde_json::Value {
        serde_json::to_value(RunConfig::default()).unwrap()
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_json(&cfg.canonical_json()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.content_hash(), back.content_hash());
        assert_eq!(cfg.content_hash().len(), 64);
    }

    #[test]
    fn missing_field_names_full_path() {
        let mut v = json();
        v["system"].as_object_mut().unwrap().remove("c2");
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("system.c2"), "{err}");
    }

    #[test]
    fn wrong_type_and_unknown_field_are_config_errors() {
        let mut v = json();
        v["environment"]["T"] = serde_json::json!("cold");
        let err = RunConfig::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("environment.T"), "{err}");

        let mut v = json();
        v["basis"]["spin"] = serde_json::json!(3);
        assert_eq!(RunConfig::from_json(&v.to_string()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn semantic_validation() {
        let mut cfg = RunConfig::default();
        cfg.protocol.tau_omega = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("tau_omega"));
        let mut cfg = RunConfig::default();
        cfg.environment.temperature = -1.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("environment.T"));
        let mut cfg = RunConfig::default();
        cfg.system.c2 = -0.1;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_sig(f64::NAN), "nan");
        assert_eq!(fmt_sig(1.0), "1.00000000e0");
        assert_eq!(fmt_sig(-0.000123456789123), "-1.23456789e-4");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn empty_lists_rejected() {
        let cfg = RunConfig::default();
        let e = sweep(&cfg, &ProtocolKind::ALL, &[1.0], &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = sweep(&cfg, &ProtocolKind::ALL, &[], &[1.0]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn default_grid_spans_range() {
        let g = default_tau_omegas();
        assert!((g[0] - 0.1).abs() < 1e-12 && (g[g.len() - 1] - 300.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn reference_table_is_complete() {
        for k in ProtocolKind::ALL {
            for t in TABLE1_TEMPERATURES {
                let r = table1_reference(k, t).unwrap();
                assert!((r[0] - if k.is_quantum() { 10.0 } else { 300.0 }).abs() == 0.0);
            }
        }
        assert!(table1_reference(ProtocolKind::Quantum1, 3.0).is_none());
    }

    #[test]
    fn other_protocols_get_their_own_amplitude() {
        let mut cfg = RunConfig::standard(ProtocolKind::Quantum1, 1.0);
        cfg.basis.n = 30;
        cfg.basis.kappa = 30;
        cfg.protocol.tau_omega = 0.5;
        cfg.numerics.entropy = false;
        let rows = sweep(&cfg, &[ProtocolKind::Classical1, ProtocolKind::Classical2], &[0.5], &[1.0]).unwrap();
        assert!(rows.iter().all(|r| r.reason.is_empty() && r.g.is_finite()), "{rows:?}");
    }

    #[test]
    fn failing_cell_becomes_nan_row() {
        let r = SweepRow::from_result(
            ProtocolKind::Quantum1,
            1.0,
            1.0,
            Err(RunError::Config("boom".into())),
        );
        assert!(r.g.is_nan() && r.reason.contains("boom"));
        let body = String::from_utf8(sweep_csv(&[r]).unwrap()).unwrap();
        assert!(body.lines().nth(1).unwrap().contains(",nan,"));
    }
}

//! Run orchestration, persistence, sweeps and plot data.
//!
//! A run writes into `<root>/<run-id>/`:
//!
//! * `manifest.json`: written with status `pending` before the first step,
//!   atomically replaced when the run ends;
//! * `scenario.toml`: the canonical scenario;
//! * `diag.jsonl`: one [`DiagRecord`] per line;
//! * `snapshots/step_<n>.csv` or `.bin`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diagnostics::{
    confinement_bound_check, gaussian_tail_check, tracked_indices, DiagError, DiagRecord, Monitor,
    TailCheckConfig, WindowLadder,
};
use crate::fields::ExternalFields;
use crate::integrator::{compute_dt, step_with_dt, SimState, StepError};
use crate::sampling::{sample, Particle, SamplingError};
use crate::scenario::{ConfigError, ResolvedLadder, ScenarioConfig, ShieldVerdict, SnapshotFormat};
use crate::self_field::SolverConfig;
use crate::snapshot::{self, SnapshotError};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Diag(#[from] DiagError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown run or sweep id `{0}`")]
    UnknownRunId(String),
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Completed,
    WallCrossing,
    TimestepCollapse,
    /// Any other error (for example a singular self-field).
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Pending => "pending",
            RunStatus::Completed => "completed",
            RunStatus::WallCrossing => "wall_crossing",
            RunStatus::TimestepCollapse => "timestep_collapse",
            RunStatus::Failed => "failed",
        }
    }
}

/// A scenario being integrated, with its monitor.
pub struct Simulation {
    pub config: ScenarioConfig,
    pub solver: SolverConfig,
    pub fields: ExternalFields,
    pub state: SimState,
    pub monitor: Monitor,
    pub ladder: ResolvedLadder,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self, RunError> {
        config.validate()?;
        let particles = sample(&config.datum, config.particle_count, config.seed)?;
        Self::with_particles(config, particles)
    }

    pub fn with_particles(config: &ScenarioConfig, particles: Vec<Particle>) -> Result<Self, RunError> {
        let solver = config.resolved_solver();
        let fields = ExternalFields::new(config.field.clone());
        let state = SimState::new(particles);
        let tracked = tracked_indices(state.particles.len(), config.tracked_particles);
        let ladder = config.resolve_ladder();
        let window = match &ladder.schedule {
            Some(s) => Some(WindowLadder::new(s, tracked.len(), config.stepper.dt_base)?),
            None => None,
        };
        let monitor = Monitor::new(config.diagnostics.clone(), &state, tracked, window);
        Ok(Self {
            config: config.clone(),
            solver,
            fields,
            state,
            monitor,
            ladder,
        })
    }

    pub fn record(&self) -> Result<DiagRecord, RunError> {
        Ok(self.monitor.record(&self.state, &self.solver, &self.fields)?)
    }

    pub fn next_dt(&self) -> Result<f64, StepError> {
        compute_dt(&self.state, &self.fields, &self.config.stepper)
    }

    pub fn step_with_dt(&mut self, dt: f64) -> Result<(), RunError> {
        step_with_dt(&mut self.state, &self.solver, &self.fields, dt, self.config.stepper.t_end)?;
        self.monitor.observe_step(&self.state)?;
        Ok(())
    }

    pub fn step(&mut self) -> Result<(), RunError> {
        let dt = self.next_dt()?;
        self.step_with_dt(dt)
    }

    pub fn finished(&self) -> bool {
        self.state.time >= self.config.stepper.t_end
    }

    /// Integrates to `t_end` or to the first error, feeding `sink`.
    pub fn run(&mut self, sink: &mut dyn RunSink) -> Result<RunOutcome, RunError> {
        let start = Instant::now();
        let mut records = Vec::new();
        let first = self.record()?;
        sink.record(&first)?;
        records.push(first);
        sink.snapshot(&self.state)?;
        let cadence = self.config.record_cadence;
        let snap = self.config.snapshot_cadence;
        let mut status = RunStatus::Completed;
        let mut error = None;
        let mut terminal_x1 = None;
        while !self.finished() {
            if let Err(e) = self.step() {
                status = match &e {
                    RunError::Step(StepError::WallCrossing { x1, .. }) => {
                        terminal_x1 = Some(*x1);
                        RunStatus::WallCrossing
                    }
                    RunError::Step(StepError::TimestepCollapse { .. }) => RunStatus::TimestepCollapse,
                    _ => RunStatus::Failed,
                };
                error = Some(e.to_string());
                break;
            }
            let k = self.state.step_index;
            if k.is_multiple_of(cadence) {
                let r = self.record()?;
                sink.record(&r)?;
                records.push(r);
            }
            if snap > 0 && k.is_multiple_of(snap) {
                sink.snapshot(&self.state)?;
            }
        }
        let recorded_last = records.last().is_some_and(|r| r.time == self.state.time)
            && self.state.step_index.is_multiple_of(cadence);
        if !recorded_last && self.state.step_index > 0 {
            let r = self.record()?;
            sink.record(&r)?;
            records.push(r);
        }
        if self.state.step_index > 0 && !(snap > 0 && self.state.step_index.is_multiple_of(snap) && error.is_none()) {
            sink.snapshot(&self.state)?;
        }
        let min_x1 = records
            .iter()
            .map(|r| r.min_x1)
            .chain(terminal_x1)
            .fold(f64::INFINITY, f64::min);
        Ok(RunOutcome {
            status,
            error,
            steps: self.state.step_index,
            final_time: self.state.time,
            min_x1,
            runtime_s: start.elapsed().as_secs_f64(),
            records,
        })
    }
}

/// Receives run output as it is produced.
pub trait RunSink {
    fn record(&mut self, _r: &DiagRecord) -> Result<(), RunError> {
        Ok(())
    }
    fn snapshot(&mut self, _s: &SimState) -> Result<(), RunError> {
        Ok(())
    }
}

/// Discards everything; the outcome still carries the records.
pub struct NullSink;
impl RunSink for NullSink {}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub error: Option<String>,
    pub steps: u64,
    pub final_time: f64,
    /// Smallest `x1` seen, including the crossing position on a wall crossing.
    pub min_x1: f64,
    pub runtime_s: f64,
    pub records: Vec<DiagRecord>,
}

impl RunOutcome {
    pub fn summary(&self) -> RunSummary {
        let e0 = self.records.first().map_or(0.0, |r| r.total_energy);
        let energy_drift = self
            .records
            .iter()
            .map(|r| (r.total_energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        RunSummary {
            min_x1: self.min_x1,
            max_speed: self.records.iter().map(|r| r.max_speed).fold(0.0, f64::max),
            energy_drift,
            shield_residual_max: self.records.iter().map(|r| r.shield_residual_max).fold(0.0, f64::max),
            final_time: self.final_time,
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub min_x1: f64,
    pub max_speed: f64,
    /// `max |E(t) - E(0)| / |E(0)|` over the records.
    pub energy_drift: f64,
    pub shield_residual_max: f64,
    pub final_time: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfinementSummary {
    pub c_hat: f64,
    pub passed: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSummary {
    pub delta1: Option<f64>,
    pub g_factor: Option<u64>,
    pub schedule: Vec<f64>,
    pub notes: Vec<String>,
    pub tracked_particles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub artifact_version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub deterministic: bool,
    pub particle_count: usize,
    pub softening: f64,
    pub c3: f64,
    pub density_grid: usize,
    pub shield: ShieldVerdict,
    pub ladder: LadderSummary,
    pub summary: Option<RunSummary>,
    pub confinement: Option<ConfinementSummary>,
    pub runtime_s: Option<f64>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn write_manifest(path: &Path, m: &RunManifest) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| RunError::Data(e.to_string()))?;
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

struct FileSink {
    diag: BufWriter<File>,
    snapshots: PathBuf,
    format: SnapshotFormat,
}

impl RunSink for FileSink {
    fn record(&mut self, r: &DiagRecord) -> Result<(), RunError> {
        serde_json::to_writer(&mut self.diag, r).map_err(|e| RunError::Data(e.to_string()))?;
        self.diag.write_all(b"\n")?;
        Ok(())
    }

    fn snapshot(&mut self, s: &SimState) -> Result<(), RunError> {
        let (ext, k) = match self.format {
            SnapshotFormat::Csv => ("csv", s.step_index),
            SnapshotFormat::Binary => ("bin", s.step_index),
        };
        let path = self.snapshots.join(format!("step_{k:08}.{ext}"));
        let out = BufWriter::new(File::create(path)?);
        match self.format {
            SnapshotFormat::Csv => snapshot::write_csv(out, &s.particles)?,
            SnapshotFormat::Binary => snapshot::write_binary(out, s.time, &s.particles)?,
        }
        Ok(())
    }
}

/// Runs a validated scenario and persists everything under `root/<run-id>`.
/// Simulation failures are recorded in the manifest, not returned as errors.
pub fn run_scenario_config(config: &ScenarioConfig, root: &Path) -> Result<RunManifest, RunError> {
    config.validate()?;
    let run_id = config.run_id();
    let dir = root.join(&run_id);
    let snapshots = dir.join("snapshots");
    if snapshots.exists() {
        fs::remove_dir_all(&snapshots)?;
    }
    fs::create_dir_all(&snapshots)?;
    fs::write(dir.join("scenario.toml"), config.canonical_toml())?;

    let mut sim = Simulation::new(config)?;
    let schedule = sim.ladder.schedule.clone();
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        scenario_hash: hex::encode(Sha256::digest(config.canonical_toml().as_bytes())),
        seed: config.seed,
        artifact_version: ARTIFACT_VERSION.to_string(),
        started_at: chrono::Utc::now().to_rfc3339(),
        finished_at: None,
        status: RunStatus::Pending,
        error: None,
        deterministic: config.deterministic,
        particle_count: config.particle_count,
        softening: sim.solver.eps(),
        c3: config.diagnostics.c3,
        density_grid: config.diagnostics.density_grid,
        shield: config.shield_verdict(),
        ladder: LadderSummary {
            delta1: schedule.as_ref().map(|s| s.delta1),
            g_factor: schedule.as_ref().map(|s| s.g_factor),
            schedule: schedule.map(|s| s.schedule).unwrap_or_default(),
            notes: sim.ladder.notes.clone(),
            tracked_particles: sim.monitor.tracked().len(),
        },
        summary: None,
        confinement: None,
        runtime_s: None,
    };
    let manifest_path = dir.join("manifest.json");
    write_manifest(&manifest_path, &manifest)?;

    let mut sink = FileSink {
        diag: BufWriter::new(File::create(dir.join("diag.jsonl"))?),
        snapshots,
        format: config.snapshot_format,
    };
    let outcome = sim.run(&mut sink)?;
    sink.diag.flush()?;

    let conf = confinement_bound_check(&outcome.records, config.field.tau);
    manifest.finished_at = Some(chrono::Utc::now().to_rfc3339());
    manifest.status = outcome.status;
    manifest.error = outcome.error.clone();
    manifest.summary = Some(outcome.summary());
    manifest.confinement = Some(ConfinementSummary {
        c_hat: conf.c_hat,
        passed: conf.passed,
        failure: conf.failure,
    });
    manifest.runtime_s = Some(outcome.runtime_s);
    write_manifest(&manifest_path, &manifest)?;
    Ok(manifest)
}

/// Loads, validates and runs a scenario file. The ledger shield verdict is
/// recorded; a failing verdict does not stop the run.
pub fn run_scenario(path: &Path, root: &Path) -> Result<RunManifest, RunError> {
    let config = ScenarioConfig::load(path)?;
    if !config.shield_verdict().shield_condition {
        log::warn!(
            "mu = {}, tau = {} violate the shield condition; running as a counterfactual",
            config.field.mu,
            config.field.tau
        );
    }
    run_scenario_config(&config, root)
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, RunError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    serde_json::from_str(&text).map_err(|e| RunError::Data(e.to_string()))
}

pub fn read_diag(path: &Path) -> Result<Vec<DiagRecord>, RunError> {
    parse_diag(BufReader::new(File::open(path)?))
}

/// Parses DiagRecord JSON lines; blank lines are skipped.
pub fn parse_diag<R: BufRead>(input: R) -> Result<Vec<DiagRecord>, RunError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| RunError::Data(format!("diag line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRunRow {
    pub mu: f64,
    pub tau: f64,
    pub repeat: u32,
    pub seed: u64,
    pub run_id: String,
    pub status: String,
    pub min_x1: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCellRow {
    pub mu: f64,
    pub tau: f64,
    pub shield_condition: bool,
    pub confined_fraction: f64,
    pub min_x1_median: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub sweep_id: String,
    pub dir: PathBuf,
    pub runs: Vec<SweepRunRow>,
    pub cells: Vec<SweepCellRow>,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every `(mu, tau)` cell `repeats` times (seeds `base.seed + r`) on a
/// pool of `workers` threads and writes `runs.csv` (one row per run) and
/// `summary.csv` (one row per cell) under `root/sweep-<id>/`.
pub fn sweep(
    base: &ScenarioConfig,
    mus: &[f64],
    taus: &[f64],
    repeats: u32,
    root: &Path,
    workers: usize,
) -> Result<SweepReport, RunError> {
    base.validate()?;
    if mus.is_empty() || taus.is_empty() || repeats == 0 {
        return Err(RunError::Data("sweep needs at least one mu, one tau and one repeat".into()));
    }
    let mut h = Sha256::new();
    h.update(base.canonical_toml());
    h.update(format!("{mus:?}|{taus:?}|{repeats}"));
    let sweep_id = format!("sweep-{}", &hex::encode(h.finalize())[..16]);
    let dir = root.join(&sweep_id);
    fs::create_dir_all(&dir)?;
    let runs_root = dir.join("runs");

    let mut jobs = Vec::new();
    for &mu in mus {
        for &tau in taus {
            for r in 0..repeats {
                let mut c = base.clone();
                c.field.mu = mu;
                c.field.tau = tau;
                c.seed = base.seed.wrapping_add(r as u64);
                jobs.push((mu, tau, r, c));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Data(e.to_string()))?;
    // Each run is itself single-threaded inside the pool workers, so results
    // do not depend on the worker count.
    let runs: Vec<SweepRunRow> = pool.install(|| {
        jobs.par_iter()
            .map(|(mu, tau, r, c)| {
                let t0 = Instant::now();
                let single = rayon::ThreadPoolBuilder::new().num_threads(1).build();
                let result = match single {
                    Ok(p) => p.install(|| run_scenario_config(c, &runs_root)),
                    Err(e) => Err(RunError::Data(e.to_string())),
                };
                let (status, run_id, min_x1) = match result {
                    Ok(m) => (
                        m.status.as_str().to_string(),
                        m.run_id,
                        m.summary.map_or(f64::NAN, |s| s.min_x1),
                    ),
                    Err(e) => {
                        log::error!("sweep cell mu={mu} tau={tau} repeat={r}: {e}");
                        ("failed".to_string(), c.run_id(), f64::NAN)
                    }
                };
                SweepRunRow {
                    mu: *mu,
                    tau: *tau,
                    repeat: *r,
                    seed: c.seed,
                    run_id,
                    status,
                    min_x1,
                    runtime_s: t0.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });

    let mut cells = Vec::new();
    for &mu in mus {
        for &tau in taus {
            let rows: Vec<&SweepRunRow> = runs.iter().filter(|r| r.mu == mu && r.tau == tau).collect();
            let mut c = base.clone();
            c.field.mu = mu;
            c.field.tau = tau;
            let confined = rows.iter().filter(|r| r.status == "completed").count();
            let mut mins: Vec<f64> = rows.iter().map(|r| r.min_x1).filter(|x| !x.is_nan()).collect();
            cells.push(SweepCellRow {
                mu,
                tau,
                shield_condition: c.shield_verdict().shield_condition,
                confined_fraction: confined as f64 / rows.len() as f64,
                min_x1_median: median(&mut mins),
                runtime: rows.iter().map(|r| r.runtime_s).sum(),
            });
        }
    }

    let mut w = csv::Writer::from_path(dir.join("runs.csv")).map_err(SnapshotError::from)?;
    for r in &runs {
        w.serialize(r).map_err(SnapshotError::from)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(SnapshotError::from)?;
    for c in &cells {
        w.serialize(c).map_err(SnapshotError::from)?;
    }
    w.flush()?;
    fs::write(dir.join("base.toml"), base.canonical_toml())?;
    Ok(SweepReport {
        sweep_id,
        dir,
        runs,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Timeseries,
    Tail,
    Ladder,
    Frontier,
}

impl std::str::FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "timeseries" => Ok(PlotKind::Timeseries),
            "tail" => Ok(PlotKind::Tail),
            "ladder" => Ok(PlotKind::Ladder),
            "frontier" => Ok(PlotKind::Frontier),
            _ => Err(format!("unknown plot kind `{s}`")),
        }
    }
}

fn find_id(root: &Path, id: &str) -> Result<PathBuf, RunError> {
    let valid = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-');
    if valid {
        let direct = root.join(id);
        if direct.is_dir() {
            return Ok(direct);
        }
        // Runs belonging to a sweep live one level further down.
        if let Ok(entries) = fs::read_dir(root) {
            let mut sweeps: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("sweep-")))
                .collect();
            sweeps.sort();
            for s in sweeps {
                let candidate = s.join("runs").join(id);
                if candidate.is_dir() {
                    return Ok(candidate);
                }
            }
        }
    }
    Err(RunError::UnknownRunId(id.to_string()))
}

fn last_snapshot(dir: &Path) -> Result<Vec<Particle>, RunError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir.join("snapshots"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    files.sort();
    let last = files.pop().ok_or_else(|| RunError::Data("run has no snapshots".into()))?;
    let f = BufReader::new(File::open(&last)?);
    Ok(match last.extension().and_then(|e| e.to_str()) {
        Some("bin") => snapshot::read_binary(f)?.1,
        _ => snapshot::read_csv(f)?,
    })
}

/// Writes `<id dir>/plot/<kind>.tsv` and returns its path.
///
/// Columns: timeseries `t min_x1 max_speed total_energy`; tail
/// `v log_density log_envelope`; ladder `level window avg_field`; frontier
/// `mu tau confined_fraction`.
pub fn emit_plot_data(root: &Path, id: &str, kind: PlotKind) -> Result<PathBuf, RunError> {
    let dir = find_id(root, id)?;
    let mut lines: Vec<String> = Vec::new();
    match kind {
        PlotKind::Timeseries => {
            lines.push("t\tmin_x1\tmax_speed\ttotal_energy".into());
            for r in read_diag(&dir.join("diag.jsonl"))? {
                lines.push(format!("{:?}\t{:?}\t{:?}\t{:?}", r.time, r.min_x1, r.max_speed, r.total_energy));
            }
        }
        PlotKind::Tail => {
            let ps = last_snapshot(&dir)?;
            // Plotting only describes the histogram, so any nonempty bin counts.
            let cfg = TailCheckConfig {
                min_particles: 1,
                min_tail_bins: 2,
                min_bin_count: 1,
                ..TailCheckConfig::default()
            };
            let rep = gaussian_tail_check(&ps, &cfg)?;
            lines.push("v\tlog_density\tlog_envelope".into());
            for b in rep.tail {
                let v = 0.5 * (b.v_lo + b.v_hi);
                lines.push(format!("{v:?}\t{:?}\t{:?}", b.density.ln(), b.envelope.ln()));
            }
        }
        PlotKind::Ladder => {
            let m = read_manifest(&dir)?;
            let recs = read_diag(&dir.join("diag.jsonl"))?;
            let last = recs.last().ok_or_else(|| RunError::Data("run has no records".into()))?;
            lines.push("level\twindow\tavg_field".into());
            for (level, v) in &last.avg_field_by_level {
                let w = m.ladder.schedule.get(*level as usize - 1).copied().unwrap_or(f64::NAN);
                lines.push(format!("{level}\t{w:?}\t{v:?}"));
            }
        }
        PlotKind::Frontier => {
            let mut rdr = csv::Reader::from_path(dir.join("summary.csv"))
                .map_err(|_| RunError::UnknownRunId(format!("{id} (not a sweep)")))?;
            lines.push("mu\ttau\tconfined_fraction".into());
            for row in rdr.deserialize::<SweepCellRow>() {
                let row = row.map_err(SnapshotError::from)?;
                lines.push(format!("{:?}\t{:?}\t{:?}", row.mu, row.tau, row.confined_fraction));
            }
        }
    }
    let out_dir = dir.join("plot");
    fs::create_dir_all(&out_dir)?;
    let name = match kind {
        PlotKind::Timeseries => "timeseries.tsv",
        PlotKind::Tail => "tail.tsv",
        PlotKind::Ladder => "ladder.tsv",
        PlotKind::Frontier => "frontier.tsv",
    };
    let path = out_dir.join(name);
    fs::write(&path, lines.join("\n") + "\n")?;
    Ok(path)
}

//! Scenario files: one TOML document describing a complete run.
//!
//! ```toml
//! schema_version = 1
//! particle_count = 512
//! seed = 1
//!
//! [field]
//! mu = 1.0
//! tau = 6.0
//!
//! [datum]
//! lambda = 1.0
//! total_charge = 0.1
//! box_min = [0.5, 0.0, 0.0]
//! box_max = [1.5, 1.0, 1.0]
//!
//! [stepper]
//! dt_base = 0.01
//! dt_min = 1e-7
//! t_end = 5.0
//! ```
//!
//! Sections `[solver]`, `[diagnostics]` and `[ladder]` are optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use magshield_ledger::number::{from_f64, to_f64};
use magshield_ledger::{compute_intervals, lbar, parse_rational, LadderSchedule, LedgerInput, Q};

use crate::diagnostics::DiagnosticsConfig;
use crate::fields::ExternalFieldConfig;
use crate::integrator::StepperConfig;
use crate::sampling::{InitialDatum, SamplingError};
use crate::self_field::{default_softening, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{}parse error: {message}", line_prefix(*line))]
    Parse { line: Option<usize>, message: String },
    #[error("{}invalid `{field}`: {reason}", line_prefix(*line))]
    Invalid {
        field: String,
        line: Option<usize>,
        reason: String,
    },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedSchema { found: u32 },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Parse { line, .. } | ConfigError::Invalid { line, .. } => *line,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    #[default]
    Csv,
    Binary,
}

/// Window-ladder settings. Unset values are derived from the parameter
/// ledger where it yields a usable ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub c6: f64,
    #[serde(default = "default_vmax")]
    pub vmax: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_factor: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u64>,
}

fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    0.6
}
fn default_vmax() -> f64 {
    3.0
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            gamma: default_gamma(),
            c6: 1.0,
            vmax: default_vmax(),
            g_factor: None,
            delta1: None,
            levels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub particle_count: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub deterministic: bool,
    /// Steps between diagnostic records.
    #[serde(default = "default_record_cadence")]
    pub record_cadence: u64,
    /// Steps between snapshots; 0 writes only the initial and final state.
    #[serde(default)]
    pub snapshot_cadence: u64,
    #[serde(default = "default_tracked")]
    pub tracked_particles: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub snapshot_format: SnapshotFormat,
    pub field: ExternalFieldConfig,
    pub datum: InitialDatum,
    #[serde(default)]
    pub solver: SolverConfig,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
}

fn default_record_cadence() -> u64 {
    50
}
fn default_tracked() -> usize {
    32
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// 1-based line of the byte offset `pos` in `text`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (or at top level when `section` is empty).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        let Some((k, _)) = line.split_once('=') else {
            continue;
        };
        if current == section && k.trim() == key {
            return Some(i + 1);
        }
    }
    if section.is_empty() {
        None
    } else {
        text.lines()
            .position(|l| l.trim() == format!("[{section}]"))
            .map(|i| i + 1)
    }
}

fn invalid(section: &str, (key, reason): (&'static str, String)) -> ConfigError {
    let field = if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    };
    ConfigError::Invalid {
        field,
        line: None,
        reason,
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate().map_err(|e| match e {
            ConfigError::Invalid { field, reason, .. } => {
                let (section, key) = field.split_once('.').unwrap_or(("", &field));
                ConfigError::Invalid {
                    line: locate(text, section, key),
                    field,
                    reason,
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::UnsupportedSchema {
                found: self.schema_version,
            });
        }
        if self.particle_count < 1 {
            return Err(invalid("", ("particle_count", "must be >= 1".into())));
        }
        if self.record_cadence < 1 {
            return Err(invalid("", ("record_cadence", "must be >= 1".into())));
        }
        self.field.validate().map_err(|e| invalid("field", e))?;
        self.datum.validate().map_err(|e| match e {
            SamplingError::InvalidDatum { field, reason } => invalid("datum", (field, reason)),
            other => invalid("datum", ("cutoff_n", other.to_string())),
        })?;
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        self.stepper.validate().map_err(|e| invalid("stepper", e))?;
        self.diagnostics.validate().map_err(|e| invalid("diagnostics", e))?;
        let l = &self.ladder;
        if !(l.gamma > 0.0 && l.gamma < 2.0 / 3.0) {
            return Err(invalid("ladder", ("gamma", format!("must lie in (0, 2/3), got {}", l.gamma))));
        }
        if !(l.c6 > 0.0 && l.c6.is_finite()) {
            return Err(invalid("ladder", ("c6", format!("must be finite and > 0, got {}", l.c6))));
        }
        if !(l.vmax >= 1.0 && l.vmax.is_finite()) {
            return Err(invalid("ladder", ("vmax", format!("must be finite and >= 1, got {}", l.vmax))));
        }
        if matches!(l.g_factor, Some(g) if g < 2) {
            return Err(invalid("ladder", ("g_factor", "must be >= 2".into())));
        }
        if let Some(d) = l.delta1 {
            if !(d > 0.0 && d.is_finite()) {
                return Err(invalid("ladder", ("delta1", format!("must be finite and > 0, got {d}"))));
            }
        }
        if l.levels == Some(0) {
            return Err(invalid("ladder", ("levels", "must be >= 1".into())));
        }
        Ok(())
    }

    /// TOML text of everything that determines the results; `output_dir`
    /// is excluded.
    pub fn canonical_toml(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        toml::to_string(&c).expect("scenario serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_toml`].
    pub fn run_id(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    /// Softening with the default filled in from the datum.
    pub fn resolved_solver(&self) -> SolverConfig {
        let mut s = self.solver.clone();
        if s.softening.is_none() {
            s.softening = Some(default_softening(self.datum.box_volume(), self.particle_count));
        }
        s
    }

    /// Shield condition and weak condition of the parameter ledger, decided
    /// exactly on the decimal values of `mu` and `tau`.
    pub fn shield_verdict(&self) -> ShieldVerdict {
        let (mu, tau) = (exact_decimal(self.field.mu), exact_decimal(self.field.tau));
        match (mu, tau) {
            (Some(mu), Some(tau)) if self.field.tau > 1.0 && self.field.mu > 0.0 => {
                let ratio = (&mu + Q::from_integer(1.into())) / (&tau - Q::from_integer(1.into()));
                ShieldVerdict {
                    shield_condition: magshield_ledger::check_shield_condition(&mu, &tau).unwrap_or(false),
                    weak_condition: magshield_ledger::exact::weak_condition(&mu, &tau),
                    ratio: ratio.to_string(),
                }
            }
            _ => ShieldVerdict {
                shield_condition: false,
                weak_condition: false,
                ratio: "undefined".into(),
            },
        }
    }

    /// Window ladder for this run, or `None` with the reason in the notes.
    pub fn resolve_ladder(&self) -> ResolvedLadder {
        let mut notes = Vec::new();
        let l = &self.ladder;
        if !l.enabled {
            notes.push("ladder disabled".to_string());
            return ResolvedLadder { schedule: None, notes };
        }
        let mut delta1 = l.delta1;
        let mut g = l.g_factor;
        let mut lbar_ledger = None;
        let report = match (exact_decimal(self.field.mu), exact_decimal(self.field.tau), exact_decimal(l.gamma)) {
            (Some(mu), Some(tau), Some(gamma)) => {
                let mut input = LedgerInput::new(mu, tau);
                input.gamma = gamma;
                input.c6 = l.c6;
                input.vmax = l.vmax;
                compute_intervals(&input).map(|r| (input, r)).map_err(|e| e.to_string())
            }
            _ => Err("ledger inputs are not finite".to_string()),
        };
        match report {
            Ok((input, rep)) => match &rep.chosen {
                Some(t) => {
                    let r = &input.mu / (&input.tau - Q::from_integer(1.into()));
                    let exponent = to_f64(&(Q::new(4.into(), 3.into()) + &r / Q::from_integer(3.into()) + &t.eta));
                    delta1.get_or_insert(1.0 / (4.0 * l.c6 * l.vmax.powf(exponent)));
                    let g_ledger = l.vmax.powf(to_f64(&t.delta)).floor() as u64;
                    if g.is_none() {
                        if g_ledger >= 2 {
                            g = Some(g_ledger);
                        } else {
                            notes.push(format!(
                                "ledger growth factor Intg(vmax^delta) = {g_ledger} is degenerate; using 2"
                            ));
                        }
                    }
                    lbar_ledger = Some(lbar(&input.mu, &input.tau, &t.delta, &t.c));
                }
                None => notes.push("ledger found no feasible tuple".into()),
            },
            Err(e) => notes.push(format!("ledger: {e}")),
        }
        let delta1 = match delta1 {
            Some(d) => d,
            None => {
                let d = 1.0 / (4.0 * l.c6 * l.vmax.powf(4.0 / 3.0));
                notes.push(format!("first window from 1/(4 c6 vmax^(4/3)) = {d}"));
                d
            }
        };
        let g = g.unwrap_or(2);
        if delta1 < 2.0 * self.stepper.dt_base {
            notes.push(format!(
                "WindowTooShort: first window {delta1} < 2 dt_base = {}",
                2.0 * self.stepper.dt_base
            ));
            return ResolvedLadder { schedule: None, notes };
        }
        let levels = match l.levels {
            Some(n) => n,
            None => {
                let mut n = 1u64;
                let mut d = delta1;
                while d * g as f64 <= self.stepper.t_end && lbar_ledger.is_none_or(|lb| n < lb) {
                    d *= g as f64;
                    n += 1;
                }
                n
            }
        };
        ResolvedLadder {
            schedule: Some(LadderSchedule::geometric(delta1, g, levels)),
            notes,
        }
    }
}

/// Exact rational value of the shortest decimal that prints as `x`.
fn exact_decimal(x: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    parse_rational(&format!("{x}")).ok().or_else(|| from_f64(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShieldVerdict {
    pub shield_condition: bool,
    pub weak_condition: bool,
    /// `(mu + 1) / (tau - 1)` as an exact fraction.
    pub ratio: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedLadder {
    pub schedule: Option<LadderSchedule>,
    pub notes: Vec<String>,
}

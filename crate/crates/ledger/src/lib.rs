//! Feasibility ledger for the magnetic-shield parameter system.
//!
//! Given the potential exponent `mu`, the magnetic exponent `tau` and the
//! field-average exponent `gamma`, the ledger decides the standing shield
//! condition `(mu + 1) / (tau - 1) < 4/9`, computes every auxiliary open
//! interval the confinement estimates depend on, picks a concrete interior
//! tuple, and derives the geometric averaging-window ladder.
//!
//! Everything is computed in exact rational arithmetic ([`exact`]). For
//! inputs that only exist as binary floats, [`outward`] repeats the
//! feasibility decision with outward-rounded interval arithmetic so that a
//! float-mode "feasible" verdict is never issued when the exact verdict is
//! "infeasible".

pub mod exact;
pub mod number;
pub mod outward;
pub mod schedule;

pub use exact::{
    check_shield_condition, compute_intervals, ChosenTuple, LedgerInput, LedgerReport,
    OpenInterval,
};
pub use number::{parse_rational, Q};
pub use schedule::{ladder_schedule, lbar, LadderSchedule};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("parameter `{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },
    #[error("shield condition (mu+1)/(tau-1) < 4/9 fails: (mu+1)/(tau-1) = {ratio}")]
    InfeasibleInput { ratio: String },
    #[error("degenerate ladder: window growth factor Intg(vmax^delta) = {g_factor} < 2")]
    DegenerateLadder { g_factor: u64 },
    #[error("cannot parse `{input}` as a rational number: {reason}")]
    Parse { input: String, reason: String },
}

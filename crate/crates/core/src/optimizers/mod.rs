//! One-step update rules.
//!
//! Every step function takes the current state by reference and returns the
//! next state, drawing gradient samples from a caller-owned oracle.

mod baseline;
mod dl;
mod schedule;
mod shang;
mod snag;

pub use baseline::{baseline_step, BaselineMethod, BaselineState};
pub use dl::{shangpp_dl_step, DlState};
pub use schedule::{build_schedule, schedule_condition_residual, Regime, Schedule, ScheduleParams};
pub use shang::{shang_step, shangpp_step, ShangMethod, ShangState};
pub use snag::{snag_step_hnag, snag_step_original, SnagHnagParams, SnagOriginalParams, SnagState};

//! Sweeps, CSV output and Monte Carlo checks on top of `ibcast-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv_out;
pub mod mc;
pub mod point;
pub mod spec;
pub mod sweep;

pub use csv_out::{emit_csv, format_number, read_csv, HEADER};
pub use mc::{mc_check, mc_check_with, McRow};
pub use spec::{ArgError, CapacitySpec, FadingKind, SweepSpec};
pub use sweep::{run_sweep, run_sweep_with, RateRow, RowStatus};

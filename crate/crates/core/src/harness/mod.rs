//! Experiment harness: disturbance adversaries, comparator oracles,
//! closed-loop simulation, regret accounting, scaling sweeps and the file
//! schemas behind the command-line interface.

pub mod adversary;
pub mod comparator;
pub mod config;
pub mod regret;
pub mod sim;
pub mod stream;
pub mod sweep;

pub use adversary::DisturbanceAdversary;
pub use comparator::{lower_bound_adversary, lower_bound_bin_width, ComparatorOracle};
pub use regret::{compute_regret, dyadic_windows, RegretTrace};
pub use sim::{rollout_comparator, simulate, Controller, SimResult, ZeroDapController};
pub use sweep::{run_sweep, ControllerKind, SweepGrid, SweepResult, SystemTemplate};

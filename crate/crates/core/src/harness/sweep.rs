//! Scaling sweeps over (horizon, variation budget, seed) cells with
//! deterministic CSV emission and log-log slope fits.

use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

use super::comparator::lower_bound_adversary;
use super::regret::{compute_regret, log_log_slope, median};
use super::sim::{rollout_comparator, simulate, ZeroDapController};
use crate::dap::{tv_of_sequence, DapClass};
use crate::error::{Error, Result};
use crate::flh::PrunePolicy;
use crate::lqr::{LqrSystem, SystemSpec};
use crate::pipeline::DapRegressionController;

/// Which controller a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControllerKind {
    #[default]
    Prodr,
    Zero,
}

/// A full sweep request. The system template is rebuilt per horizon.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub system: SystemTemplate,
    pub class: DapClass,
    pub ns: Vec<usize>,
    pub cns: Vec<f64>,
    pub seeds: Vec<u64>,
    pub controller: ControllerKind,
    pub h_cap: Option<usize>,
    pub prune: PrunePolicy,
}

/// System matrices without a horizon; the sweep instantiates one per n.
#[derive(Debug, Clone)]
pub struct SystemTemplate {
    pub a: nalgebra::DMatrix<f64>,
    pub b: nalgebra::DMatrix<f64>,
    pub r_x: nalgebra::DMatrix<f64>,
    pub r_u: nalgebra::DMatrix<f64>,
}

impl SystemTemplate {
    /// The two-dimensional sign-pattern environment.
    pub fn lower_bound() -> Self {
        Self {
            a: nalgebra::DMatrix::zeros(2, 2),
            b: -nalgebra::DMatrix::identity(2, 2),
            r_x: nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0])),
            r_u: nalgebra::DMatrix::zeros(2, 2),
        }
    }

    pub fn with_horizon(&self, n: usize) -> Result<LqrSystem> {
        LqrSystem::derive(SystemSpec::new(
            self.a.clone(),
            self.b.clone(),
            self.r_x.clone(),
            self.r_u.clone(),
            n,
        )?)
    }
}

/// One (n, C_n, seed) cell result.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub n: usize,
    pub c_n: f64,
    pub seed: u64,
    pub regret: f64,
}

/// Sweep output: raw rows in deterministic order plus fitted slopes.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// ("n", C_n value, slope of median regret vs n) and
    /// ("C_n", n value, slope of median regret vs C_n).
    pub slopes: Vec<(String, f64, f64)>,
}

/// Run one cell: simulate the controller against the budgeted sign
/// adversary and account regret against the binned comparator.
pub fn run_cell(grid: &SweepGrid, n: usize, c_n: f64, seed: u64) -> Result<f64> {
    let sys = grid.system.with_horizon(n)?;
    let (adversary, oracle) = lower_bound_adversary(n, c_n, seed)?;
    let result = match grid.controller {
        ControllerKind::Prodr => {
            let mut ctl =
                DapRegressionController::new(sys.clone(), grid.class, grid.h_cap, grid.prune)?;
            simulate(&sys, &adversary, &mut ctl, n, None)?
        }
        ControllerKind::Zero => {
            let mut ctl = ZeroDapController::new(&sys);
            simulate(&sys, &adversary, &mut ctl, n, None)?
        }
    };
    let seq = oracle.build(&result.disturbances, grid.class)?;
    let comparator_losses = rollout_comparator(&sys, &result.disturbances, &seq)?;
    let trace = compute_regret(&result.losses, &comparator_losses, tv_of_sequence(&seq))?;
    Ok(trace.total())
}

/// Run the full grid. Cells execute in parallel on the ambient rayon pool;
/// results are merged in (n, C_n, seed) order, so output is deterministic.
pub fn run_sweep(grid: &SweepGrid) -> Result<SweepResult> {
    if grid.ns.is_empty() || grid.cns.is_empty() || grid.seeds.is_empty() {
        return Err(Error::bounds("sweep grid must be nonempty"));
    }
    let mut cells = Vec::new();
    for &n in &grid.ns {
        for &c_n in &grid.cns {
            for &seed in &grid.seeds {
                cells.push((n, c_n, seed));
            }
        }
    }
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(n, c_n, seed)| {
            run_cell(grid, n, c_n, seed).map(|regret| SweepRow { n, c_n, seed, regret })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut slopes = Vec::new();
    if grid.ns.len() >= 2 {
        for &c_n in &grid.cns {
            let xs: Vec<f64> = grid.ns.iter().map(|&n| n as f64).collect();
            let ys: Vec<f64> = grid
                .ns
                .iter()
                .map(|&n| {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.n == n && r.c_n == c_n)
                        .map(|r| r.regret)
                        .collect();
                    median(&vals)
                })
                .collect();
            if let Ok(s) = log_log_slope(&xs, &ys) {
                slopes.push(("n".to_string(), c_n, s));
            }
        }
    }
    if grid.cns.len() >= 2 {
        for &n in &grid.ns {
            let xs: Vec<f64> = grid.cns.clone();
            let ys: Vec<f64> = grid
                .cns
                .iter()
                .map(|&c_n| {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.n == n && r.c_n == c_n)
                        .map(|r| r.regret)
                        .collect();
                    median(&vals)
                })
                .collect();
            if let Ok(s) = log_log_slope(&xs, &ys) {
                slopes.push(("C_n".to_string(), n as f64, s));
            }
        }
    }
    Ok(SweepResult { rows, slopes })
}

impl SweepResult {
    /// Raw per-run CSV.
    pub fn runs_csv(&self) -> String {
        let mut s = String::from("n,C_n,seed,regret\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.n, r.c_n, r.seed, r.regret);
        }
        s
    }

    /// Fitted-slopes sidecar CSV.
    pub fn slopes_csv(&self) -> String {
        let mut s = String::from("axis,fixed,slope\n");
        for (axis, fixed, slope) in &self.slopes {
            let _ = writeln!(s, "{axis},{fixed},{slope}");
        }
        s
    }

    /// Write both CSVs into a directory.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("runs.csv"), self.runs_csv())?;
        std::fs::write(dir.join("slopes.csv"), self.slopes_csv())?;
        Ok(())
    }
}

/// Per-round trace CSV for a single run.
pub fn trace_csv(
    losses: &[f64],
    comparator: &[f64],
    cumulative: &[f64],
    barrier: &[f64],
    entropy: &[f64],
) -> String {
    let mut s = String::from("round,learner_loss,comparator_loss,cum_regret,barrier,weight_entropy\n");
    for t in 0..losses.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t + 1,
            losses[t],
            comparator[t],
            cumulative[t],
            barrier.get(t).copied().unwrap_or(0.0),
            entropy.get(t).copied().unwrap_or(0.0),
        );
    }
    s
}

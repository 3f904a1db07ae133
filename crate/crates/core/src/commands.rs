//! Drivers for the `forward`, `dual`, `check` and `dump-tables` commands.

use std::path::{Path, PathBuf};

use crate::algebra::{slot, OperatorTables};
use crate::check::{self, CheckReport, Suite};
use crate::dual::{maximize, DualProblem, DualState, MaximizeConfig, SolveReport, SpaceTimeLattice};
use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::integrator::{integrate, IntegratorConfig};
use crate::io::{read_primal, write_csv, write_field, write_primal, FieldFile, RunConfig};
use crate::primal::{ConservationReport, PrimalState};
use crate::scenarios::{self, ScenarioName};

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::Io { .. }
        | Error::Format { .. }
        | Error::InvalidArgument(_)
        | Error::StepSize { .. }
        | Error::InvalidField(_) => 2,
        Error::NumericalAbort { .. } => 3,
        _ => 1,
    }
}

fn output_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.io.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Initial state named by the configuration.
pub fn initial_state(config: &RunConfig) -> Result<PrimalState> {
    let grid = PeriodicGrid::new(config.grid.n)?;
    match config.scenario.name {
        ScenarioName::FromFile => {
            let path = config.scenario.path.as_deref().ok_or_else(|| Error::Config {
                line: 1,
                message: "scenario 'from_file' requires scenario.path".into(),
            })?;
            let (_, state) = read_primal(path)?;
            if state.grid() != grid {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("grid size {} does not match grid.n = {}", state.grid().n(), grid.n()),
                });
            }
            Ok(state)
        }
        name => scenarios::builtin(name, grid, config.scenario.seed),
    }
}

fn integrator_config(config: &RunConfig, steps: usize) -> IntegratorConfig {
    IntegratorConfig {
        dt: config.time.dt,
        steps,
        nu: config.forward.nu,
        eta: config.forward.eta,
        dealias: config.forward.dealias,
    }
}

fn snapshot_path(dir: &Path, prefix: &str, index: usize) -> PathBuf {
    dir.join(format!("{prefix}_{index:05}.ifdm"))
}

#[derive(Debug, Clone)]
pub struct ForwardOutcome {
    pub steps: usize,
    pub snapshots: Vec<PathBuf>,
    pub diagnostics: PathBuf,
    pub reports: Vec<ConservationReport>,
}

/// Forward run: snapshots `snap_XXXXX.ifdm` and `diagnostics.csv`.
///
/// On a numerical abort the last finite state is written to
/// `snap_last_good.ifdm` before the error is returned.
pub fn run_forward(config: &RunConfig) -> Result<ForwardOutcome> {
    let steps = config.forward_steps()?;
    let initial = initial_state(config)?;
    let dir = output_dir(config)?;
    let traj = match integrate(&initial, &integrator_config(config, steps), config.forward.sample_every) {
        Ok(t) => t,
        Err(Error::NumericalAbort { step, time, last_good }) => {
            write_primal(&dir.join("snap_last_good.ifdm"), "primal", time, &last_good)?;
            return Err(Error::NumericalAbort { step, time, last_good });
        }
        Err(e) => return Err(e),
    };
    let mut snapshots = Vec::with_capacity(traj.states.len());
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        let path = snapshot_path(&dir, "snap", i);
        write_primal(&path, "primal", *t, s)?;
        snapshots.push(path);
    }
    let diagnostics = dir.join("diagnostics.csv");
    write_csv(
        &diagnostics,
        &format!("time,{}", ConservationReport::CSV_HEADER),
        traj.times
            .iter()
            .zip(&traj.reports)
            .map(|(t, r)| format!("{t:e},{}", r.to_csv_row())),
    )?;
    Ok(ForwardOutcome {
        steps,
        snapshots,
        diagnostics,
        reports: traj.reports,
    })
}

/// Base snapshots at the `nt + 1` dual time levels together with the
/// unperturbed initial state.
pub fn dual_base(config: &RunConfig, lattice: &SpaceTimeLattice) -> Result<(Vec<PrimalState>, PrimalState)> {
    let initial = initial_state(config)?;
    let nt = lattice.nt();
    let levels = match config.scenario.name {
        // Exact stationary states and file bases are used as static bases.
        ScenarioName::Constant | ScenarioName::BeltramiAlfven | ScenarioName::FromFile => vec![initial.clone(); nt + 1],
        ScenarioName::RandomSmooth | ScenarioName::MhdEmbed => {
            let steps = config.forward_steps()?;
            if steps % nt != 0 {
                return Err(Error::Config {
                    line: 1,
                    message: format!("forward steps {steps} (T / dt) must be a multiple of time.nt = {nt}"),
                });
            }
            let traj = integrate(&initial, &integrator_config(config, steps), steps / nt)?;
            traj.states
        }
    };
    let eps = config.scenario.perturbation;
    let levels = if eps > 0.0 {
        let seed = config.scenario.seed.wrapping_add(1);
        levels.iter().map(|s| scenarios::perturbed(s, seed, eps)).collect()
    } else {
        levels
    };
    Ok((levels, initial))
}

#[derive(Debug, Clone)]
pub struct DualOutcome {
    pub report: SolveReport,
    pub objective: f64,
    /// Max-norm primal residual of the mapped fields.
    pub residual: f64,
    pub div_v: f64,
}

/// Dual solve: `solve_report.csv`, `dstar_XXXXX.ifdm` per time level and
/// `uhat_XXXXX.ifdm` per interval.
pub fn run_dual(config: &RunConfig) -> Result<DualOutcome> {
    let grid = PeriodicGrid::new(config.grid.n)?;
    let lattice = SpaceTimeLattice::new(grid, config.time.nt, config.time.t_final)?;
    let (levels, initial) = dual_base(config, &lattice)?;
    let dir = output_dir(config)?;
    let problem = DualProblem::new(
        lattice,
        &levels,
        initial.v.clone(),
        initial.alpha.clone(),
        config.dual.penalty(),
        config.scheme.backend,
    )?;
    let solver = MaximizeConfig {
        tol: config.dual.tol,
        max_iter: config.dual.max_iter,
        ..Default::default()
    };
    let (solution, stalled) = match maximize(&problem, &DualState::zeros(&lattice), &solver) {
        Ok(s) => (s, None),
        Err(Error::Stagnation { iterations, last }) => (*last, Some(iterations)),
        Err(e) => return Err(e),
    };
    std::fs::write(dir.join("solve_report.csv"), solution.report.to_csv())
        .map_err(|e| Error::io(dir.join("solve_report.csv"), e))?;
    let dt = lattice.dt();
    for (k, level) in solution.state.levels.iter().enumerate() {
        let file = FieldFile {
            name: "dual".into(),
            time: k as f64 * dt,
            field: level.clone(),
        };
        write_field(&snapshot_path(&dir, "dstar", k), &file)?;
    }
    let extracted = problem.extract_primal(&solution.state)?;
    for (j, s) in extracted.states.iter().enumerate() {
        write_primal(&snapshot_path(&dir, "uhat", j), "primal", (j as f64 + 0.5) * dt, s)?;
    }
    if let Some(iterations) = stalled {
        return Err(Error::Stagnation {
            iterations,
            last: Box::new(solution),
        });
    }
    Ok(DualOutcome {
        objective: solution.objective,
        report: solution.report,
        residual: extracted.residual.max(),
        div_v: extracted.div_v,
    })
}

/// Runs a check suite with the assembled tables.
pub fn run_check(suite: Suite) -> CheckReport {
    check::run_suite(suite, &OperatorTables::assemble())
}

/// Writes `M.csv` and `B.csv` with labelled nonzeros.
pub fn dump_tables(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tables = OperatorTables::assemble();
    write_csv(
        &dir.join("M.csv"),
        "u_slot,u_label,d_slot,d_label,value",
        tables.m_entries().iter().map(|e| {
            format!("{},{},{},{},{}", e.u, slot::u_label(e.u), e.d, slot::d_label(e.d), e.value)
        }),
    )?;
    write_csv(
        &dir.join("B.csv"),
        "d_slot,d_label,j,j_label,k,k_label,value",
        tables.b_entries().iter().map(|e| {
            format!(
                "{},{},{},{},{},{},{}",
                e.d,
                slot::d_label(e.d),
                e.j,
                slot::u_label(e.j),
                e.k,
                slot::u_label(e.k),
                e.value
            )
        }),
    )
}

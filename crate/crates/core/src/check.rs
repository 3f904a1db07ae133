//! Invariant suites behind `ifdm check`.
//!
//! Each suite runs a handful of small, fast checks and reports the measured
//! value against its tolerance. The mapping and dual suites take the operator
//! tables as a parameter so that corrupted tables can be injected.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{lagrangian_direct, slot, OperatorTables, PackedD, PackedU, Penalty, D_LEN, U_LEN};
use crate::dtp;
use crate::dual::{DualProblem, DualState, SpaceTimeLattice, LEVEL_COMPONENTS};
use crate::error::{Error, Result};
use crate::grid::{self, Backend, Field, PeriodicGrid};
use crate::primal::{self, PrimalState};
use crate::scenarios;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Operators,
    Algebra,
    Mapping,
    Dual,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["operators", "algebra", "mapping", "dual", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operators" => Ok(Suite::Operators),
            "algebra" => Ok(Suite::Algebra),
            "mapping" => Ok(Suite::Mapping),
            "dual" => Ok(Suite::Dual),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite '{other}' (expected one of {})",
                Suite::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub invariant: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    fn record(&mut self, suite: &'static str, invariant: &'static str, value: f64, tolerance: f64) {
        self.rows.push(CheckRow {
            suite,
            invariant,
            value,
            tolerance,
            passed: value <= tolerance,
        });
    }

    fn record_result(&mut self, suite: &'static str, invariant: &'static str, value: Result<f64>, tolerance: f64) {
        // An error inside a check counts as an infinite violation.
        self.record(suite, invariant, value.unwrap_or(f64::INFINITY), tolerance);
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.invariant.len()).max().unwrap_or(9).max(9);
        writeln!(f, "{:<10} {:<width$} {:>12} {:>10}  result", "suite", "invariant", "value", "tolerance")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:<width$} {:>12.3e} {:>10.1e}  {}",
                r.suite,
                r.invariant,
                r.value,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.rows.len(), failed)
    }
}

/// Runs `suite` against the given tables.
pub fn run_suite(suite: Suite, tables: &OperatorTables) -> CheckReport {
    let mut report = CheckReport::default();
    let all = suite == Suite::All;
    if all || suite == Suite::Operators {
        operators(&mut report);
    }
    if all || suite == Suite::Algebra {
        algebra(&mut report, tables);
    }
    if all || suite == Suite::Mapping {
        mapping(&mut report, tables);
    }
    if all || suite == Suite::Dual {
        dual(&mut report, tables);
    }
    report
}

fn random_u(rng: &mut impl Rng) -> PackedU {
    std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
}

fn random_d(rng: &mut impl Rng, amp: f64) -> PackedD {
    std::array::from_fn(|_| rng.gen_range(-amp..amp))
}

fn random_field(grid: PeriodicGrid, components: usize, rng: &mut impl Rng) -> Field {
    let data = (0..components * grid.points()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::from_vec(grid, components, data).expect("sized to the grid")
}

fn operators(report: &mut CheckReport) {
    const S: &str = "operators";
    let grid = PeriodicGrid::new(16).expect("valid size");
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    let f = Field::from_fn(grid, 1, |_, [x, y, z]| (2.0 * PI * (x + 2.0 * y)).sin() * (2.0 * PI * 3.0 * z).cos());
    let exact = Field::from_fn(grid, 3, |c, [x, y, z]| {
        let s = 2.0 * PI * (x + 2.0 * y);
        let t = 2.0 * PI * 3.0 * z;
        match c {
            0 => 2.0 * PI * s.cos() * t.cos(),
            1 => 4.0 * PI * s.cos() * t.cos(),
            _ => -6.0 * PI * s.sin() * t.sin(),
        }
    });
    report.record_result(
        S,
        "spectral gradient of a trigonometric mode",
        grid::grad_scalar(&f, Backend::Spectral).map(|g| g.max_diff(&exact)),
        1e-11,
    );

    for (name, backend) in [
        ("spectral derivative is skew-adjoint", Backend::Spectral),
        ("fd2 derivative is skew-adjoint", Backend::Fd2),
    ] {
        let a = random_field(grid, 1, &mut rng);
        let b = random_field(grid, 1, &mut rng);
        let value = (|| {
            let ga = grid::grad_scalar(&a, backend)?;
            let gb = grid::grad_scalar(&b, backend)?;
            let mut worst = 0.0f64;
            for c in 0..3 {
                let lhs: f64 = ga.comp(c).iter().zip(b.comp(0)).map(|(x, y)| x * y).sum();
                let rhs: f64 = a.comp(0).iter().zip(gb.comp(c)).map(|(x, y)| x * y).sum();
                worst = worst.max((lhs + rhs).abs() / grid.points() as f64);
            }
            Ok(worst)
        })();
        report.record_result(S, name, value, 1e-12);
    }

    let v = random_field(grid, 3, &mut rng);
    let value = (|| {
        let p = grid::leray_project(&v, Backend::Spectral)?;
        let pp = grid::leray_project(&p, Backend::Spectral)?;
        Ok(pp.max_diff(&p).max(grid::div_vector(&p, Backend::Spectral)?.max_abs()))
    })();
    report.record_result(S, "Leray projection is idempotent and solenoidal", value, 1e-12);

    let t = random_field(grid, 9, &mut rng);
    let value = grid::curl_rowwise(&t, Backend::Spectral)
        .and_then(|c| grid::div_tensor_rowwise(&c, Backend::Spectral))
        .map(|d| d.max_abs());
    report.record_result(S, "row divergence of row curl vanishes", value, 1e-11);

    let c = scenarios::constant(grid);
    let value = primal::primal_residual(&[c.clone(), c.clone(), c], 0.1, Backend::Spectral).map(|r| r.max());
    report.record_result(S, "constant state has zero residual", value, 0.0);

    let alf = scenarios::beltrami_alfven(grid);
    let value = primal::primal_residual(&[alf.clone(), alf.clone(), alf], 0.1, Backend::Spectral).map(|r| r.max());
    report.record_result(S, "Alfven state has zero residual", value, 1e-10);
}

fn algebra(report: &mut CheckReport, tables: &OperatorTables) {
    const S: &str = "algebra";
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let a = Penalty::default();
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let (u, d, ub) = (random_u(&mut rng), random_d(&mut rng, 1.0), random_u(&mut rng));
        let direct = lagrangian_direct(&u, &d, &ub, &a);
        let packed = tables.lagrangian(&u, &d, &ub, &a);
        worst = worst.max((direct - packed).abs() / (1.0 + direct.abs()));
    }
    report.record(S, "packed Lagrangian equals direct form", worst, 1e-13);

    let mut asym = 0.0f64;
    for _ in 0..2000 {
        let d = random_d(&mut rng, 1.0);
        let (x, y) = (random_u(&mut rng), random_u(&mut rng));
        let mut dp = d;
        for i in 0..3 {
            for j in 0..3 {
                let e = rng.gen_range(-1.0..1.0);
                // Antisymmetric in (i, j) for grad lambda.
                if i < j {
                    dp[slot::grad_lambda(i, j)] += e;
                    dp[slot::grad_lambda(j, i)] -= e;
                }
                // Symmetric in (j, r) for grad A, row i.
                for r in j..3 {
                    let e = rng.gen_range(-1.0..1.0);
                    dp[slot::grad_a(i, j, r)] += e;
                    if r != j {
                        dp[slot::grad_a(i, r, j)] += e;
                    }
                }
            }
        }
        let q0 = tables.quadratic_part(&d, &x, &y);
        let q1 = tables.quadratic_part(&dp, &x, &y);
        asym = asym.max((q0 - q1).abs());
    }
    report.record(S, "quadratic form sees only the reduced gradients", asym, 1e-14);

    let mut sym = 0.0f64;
    for d in 0..D_LEN {
        for j in 0..U_LEN {
            for k in 0..j {
                sym = sym.max((tables.b(d, j, k) - tables.b(d, k, j)).abs());
            }
        }
    }
    report.record(S, "B is symmetric in its primal indices", sym, 0.0);
}

fn mapping(report: &mut CheckReport, tables: &OperatorTables) {
    const S: &str = "mapping";
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let a = Penalty::default();

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let ub = random_u(&mut rng);
        worst = match dtp::dtp_solve(tables, &[0.0; D_LEN], &ub, &a) {
            Ok(r) => r.u_hat.iter().zip(&ub).fold(worst, |m, (x, y)| m.max((x - y).abs())),
            Err(_) => f64::INFINITY,
        };
    }
    report.record(S, "zero dual returns the base state", worst, 0.0);

    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let ub = random_u(&mut rng);
        let d = random_d(&mut rng, 4.0);
        let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Ok(r) = dtp::dtp_solve(tables, &d, &ub, &a) {
            // Independent stationarity check, written without the tables.
            let g = dtp::mapping_gradient(&r.u_hat, &d, &ub, &a);
            worst = worst.max(g.iter().fold(0.0f64, |m, x| m.max(x.abs())) / dmax);
        }
    }
    report.record(S, "mapped point is stationary", worst, 1e-11);

    let pen = Penalty {
        a_v: 100.0,
        a_alpha: 100.0,
        a_p: 10.0,
    };
    let mut ub = [0.0; U_LEN];
    ub[slot::P] = 1.0;
    let mut d = [0.0; D_LEN];
    d[slot::grad_lambda(0, 0)] = 0.5;
    d[slot::grad_lambda(1, 1)] = 1.0;
    d[slot::grad_lambda(2, 2)] = 0.5;
    let value = dtp::dtp_solve(tables, &d, &ub, &pen).map(|r| (r.u_hat[slot::P] - 1.2).abs());
    report.record_result(S, "pressure from div lambda", value, 1e-14);
}

fn small_problem(tables: &OperatorTables) -> Result<DualProblem> {
    let lattice = SpaceTimeLattice::new(PeriodicGrid::new(4)?, 3, 0.5)?;
    let grid = lattice.grid();
    let levels: Vec<PrimalState> = (0..lattice.nt())
        .map(|k| {
            let mut s = scenarios::random_smooth(grid, 40 + k as u64);
            s.p = Field::from_fn(grid, 1, |_, [x, y, _]| 0.3 * (2.0 * PI * (x - y)).sin());
            s
        })
        .collect();
    let v0 = levels[0].v.scaled(0.9);
    let alpha0 = levels[0].alpha.scaled(1.1);
    DualProblem::with_tables(lattice, &levels, v0, alpha0, Penalty::default(), Backend::Spectral, tables.clone())
}

fn random_dual(lattice: &SpaceTimeLattice, rng: &mut impl Rng, amp: f64) -> Result<DualState> {
    let levels = (0..=lattice.nt())
        .map(|_| random_field(lattice.grid(), LEVEL_COMPONENTS, rng).scaled(amp))
        .collect();
    DualState::from_levels(lattice, levels)
}

fn dual(report: &mut CheckReport, tables: &OperatorTables) {
    const S: &str = "dual";
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let setup = small_problem(tables).and_then(|p| {
        let d = random_dual(p.lattice(), &mut rng, 0.05)?;
        Ok((p, d))
    });
    let (problem, d) = match setup {
        Ok(x) => x,
        Err(_) => {
            report.record(S, "dual problem assembles", f64::INFINITY, 0.0);
            return;
        }
    };
    let lattice = *problem.lattice();

    let value = problem.objective_forms(&d).map(|f| {
        let scale = 1.0 + f.deviation.abs();
        ((f.deviation - f.lagrangian).abs().max((f.deviation - f.closed_form).abs())) / scale
    });
    report.record_result(S, "objective forms agree", value, 1e-12);

    let value = (|| {
        let g = problem.evaluate(&d)?.gradient.to_flat();
        let x = d.to_flat();
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let np = lattice.grid().points();
        let interior = lattice.nt() * LEVEL_COMPONENTS * np;
        let mut worst = 0.0f64;
        for _ in 0..24 {
            let i = rng.gen_range(0..interior);
            let h = 1e-5;
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (problem.objective(&DualState::from_flat(&lattice, &xp)?)?
                - problem.objective(&DualState::from_flat(&lattice, &xm)?)?)
                / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-4 * gmax);
            worst = worst.max((g[i] - fd).abs() / denom);
        }
        Ok(worst)
    })();
    report.record_result(S, "gradient matches finite differences", value, 1e-6);

    let value = (|| {
        let g = problem.evaluate(&d)?.gradient;
        let h = problem.hat_residual_gradient(&d)?;
        let w = lattice.weight();
        Ok(g.lincomb(1.0, &h, -1.0).max_abs() / w / (1.0 + g.max_abs() / w))
    })();
    report.record_result(S, "gradient equals primal residual of mapped fields", value, 1e-13);

    let value = (|| {
        let lattice = SpaceTimeLattice::new(PeriodicGrid::new(4)?, 4, 1.0)?;
        let c = scenarios::constant(lattice.grid());
        let p = DualProblem::with_tables(
            lattice,
            &vec![c.clone(); lattice.nt()],
            c.v.clone(),
            c.alpha.clone(),
            Penalty::default(),
            Backend::Spectral,
            tables.clone(),
        )?;
        Ok(p.evaluate(&DualState::zeros(&lattice))?.gradient.max_abs())
    })();
    report.record_result(S, "constant base is a critical point", value, 1e-13);
}

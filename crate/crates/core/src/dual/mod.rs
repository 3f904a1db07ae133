//! Space-time dual problem.
//!
//! Dual fields `D = (lambda, A, mu)` live on `N_t + 1` nodal time levels,
//! stored per level as one 13-component field: lambda in components 0..3,
//! `A_ij` in `3 + 3i + j`, mu in 12. The derivative vector `D` of the
//! pointwise Lagrangian is formed on interval-centered collocation points.
//! Every collocation point carries the weight `dt h^3`.

mod optimize;
mod precond;
mod residual;

pub use optimize::{maximize, DualSolution, MaximizeConfig, Preconditioning, SolveReport};
pub use precond::Preconditioner;
pub use residual::{interval_residual, IntervalResidual, ResidualNorm};

use rayon::prelude::*;

use crate::algebra::{slot, OperatorTables, PackedD, PackedU, Penalty, D_LEN, U_LEN};
use crate::dtp::{self, FailureMode};
use crate::error::{Error, Result};
use crate::grid::{self, Backend, Field, PeriodicGrid};
use crate::primal::PrimalState;

/// Components per dual time level.
pub const LEVEL_COMPONENTS: usize = 13;
/// Component of mu within a level.
pub const MU: usize = 12;
/// Number of leading level components fixed to zero at the final time.
pub const FINAL_FIXED: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeLattice {
    grid: PeriodicGrid,
    nt: usize,
    t_final: f64,
}

impl SpaceTimeLattice {
    pub fn new(grid: PeriodicGrid, nt: usize, t_final: f64) -> Result<Self> {
        if nt < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 time intervals, got {nt}")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
        }
        Ok(Self { grid, nt, t_final })
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Collocation weight `dt h^3`.
    pub fn weight(&self) -> f64 {
        self.dt() * self.grid.cell_volume()
    }
}

/// Dual fields at all time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub levels: Vec<Field>,
}

impl DualState {
    pub fn zeros(lattice: &SpaceTimeLattice) -> Self {
        Self {
            levels: vec![Field::zeros(lattice.grid(), LEVEL_COMPONENTS); lattice.nt() + 1],
        }
    }

    pub fn from_levels(lattice: &SpaceTimeLattice, levels: Vec<Field>) -> Result<Self> {
        if levels.len() != lattice.nt() + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} dual levels, got {}",
                lattice.nt() + 1,
                levels.len()
            )));
        }
        for l in &levels {
            l.expect_components(LEVEL_COMPONENTS, "dual level")?;
            if l.grid() != lattice.grid() {
                return Err(Error::InvalidArgument("dual level on a different grid".into()));
            }
        }
        let mut s = Self { levels };
        s.enforce_final_condition();
        Ok(s)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.levels[0].grid()
    }

    /// Sets lambda and A to zero at the final level.
    pub fn enforce_final_condition(&mut self) {
        let last = self.levels.last_mut().expect("at least one level");
        for c in 0..FINAL_FIXED {
            last.comp_mut(c).fill(0.0);
        }
    }

    pub fn lambda(&self, level: usize) -> Field {
        self.levels[level].extract(0..3)
    }

    pub fn a_field(&self, level: usize) -> Field {
        self.levels[level].extract(3..12)
    }

    pub fn mu(&self, level: usize) -> Field {
        self.levels[level].extract(12..13)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.levels.iter().flat_map(|l| l.data().iter().copied()).collect()
    }

    pub fn from_flat(lattice: &SpaceTimeLattice, flat: &[f64]) -> Result<Self> {
        let per = LEVEL_COMPONENTS * lattice.grid().points();
        if flat.len() != per * (lattice.nt() + 1) {
            return Err(Error::InvalidArgument(format!(
                "flat dual vector has length {}, expected {}",
                flat.len(),
                per * (lattice.nt() + 1)
            )));
        }
        let levels = flat
            .chunks(per)
            .map(|c| Field::from_vec(lattice.grid(), LEVEL_COMPONENTS, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_levels(lattice, levels)
    }

    pub fn max_abs(&self) -> f64 {
        self.levels.iter().map(Field::max_abs).fold(0.0, f64::max)
    }

    pub fn dot(&self, other: &DualState) -> f64 {
        self.levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn lincomb(&self, a: f64, other: &DualState, b: f64) -> DualState {
        DualState {
            levels: self
                .levels
                .iter()
                .zip(&other.levels)
                .map(|(x, y)| x.lincomb(a, y, b))
                .collect(),
        }
    }
}

/// Maps gradient component `3c + a` of a level field to its slot in `D`.
fn spatial_slot(g: usize) -> usize {
    if g < 9 {
        g + 3
    } else if g < 36 {
        g + 15
    } else {
        g - 24
    }
}

/// Slot in `D` of the time derivative of level component `c` (none for mu).
fn time_slot(c: usize) -> Option<usize> {
    match c {
        0..=2 => Some(slot::dt_lambda(c)),
        3..=11 => Some(c + 12),
        _ => None,
    }
}

fn field_to_points<const N: usize>(f: &Field) -> Vec<[f64; N]> {
    let np = f.grid().points();
    (0..np)
        .map(|p| std::array::from_fn(|c| f.at(c, p)))
        .collect()
}

fn points_to_field<const N: usize>(grid: PeriodicGrid, pts: &[[f64; N]]) -> Field {
    let np = grid.points();
    let mut data = vec![0.0; N * np];
    for (p, v) in pts.iter().enumerate() {
        for c in 0..N {
            data[c * np + p] = v[c];
        }
    }
    Field::from_vec(grid, N, data).expect("consistent shape")
}

/// Time derivatives and time-averaged spatial derivatives of `D` per interval,
/// each as a 51-component field.
pub fn compute_cal_d(
    lattice: &SpaceTimeLattice,
    state: &DualState,
    backend: Backend,
) -> Result<Vec<Field>> {
    let grid = lattice.grid();
    let dt = lattice.dt();
    (0..lattice.nt())
        .into_par_iter()
        .map(|k| {
            let lo = &state.levels[k];
            let hi = &state.levels[k + 1];
            let avg = lo.lincomb(0.5, hi, 0.5);
            let grad = grid::gradient(&avg, backend)?;
            let mut out = Field::zeros(grid, D_LEN);
            for c in 0..LEVEL_COMPONENTS {
                if let Some(s) = time_slot(c) {
                    let dst = out.comp_mut(s);
                    for ((d, h), l) in dst.iter_mut().zip(hi.comp(c)).zip(lo.comp(c)) {
                        *d = (h - l) / dt;
                    }
                }
            }
            for g in 0..3 * LEVEL_COMPONENTS {
                out.comp_mut(spatial_slot(g)).copy_from_slice(grad.comp(g));
            }
            Ok(out)
        })
        .collect()
}

/// Value of the dual objective in three algebraically equivalent forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveForms {
    /// `sum w (-1/2 d.K d) + <grad S(0), D>` with `d = U_hat - Ub`.
    pub deviation: f64,
    /// `sum w L(U_hat, D)` minus the initial-condition terms.
    pub lagrangian: f64,
    /// Closed-form integrand minus the initial-condition terms.
    pub closed_form: f64,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub gradient: DualState,
    /// Mapped primal values, interval-major.
    pub u_hat: Vec<PackedU>,
    pub min_pivot: f64,
    pub max_mapping_residual: f64,
}

/// Fully specified dual problem.
#[derive(Debug, Clone)]
pub struct DualProblem {
    lattice: SpaceTimeLattice,
    ubar: Vec<PackedU>,
    v0: Field,
    alpha0: Field,
    penalty: Penalty,
    backend: Backend,
    tables: OperatorTables,
    grad_at_zero: DualState,
}

impl DualProblem {
    /// Base state from `N_t + 1` snapshots at the lattice time levels; each
    /// interval uses the average of its two endpoint snapshots.
    pub fn new(
        lattice: SpaceTimeLattice,
        base_levels: &[PrimalState],
        v0: Field,
        alpha0: Field,
        penalty: Penalty,
        backend: Backend,
    ) -> Result<Self> {
        if base_levels.len() != lattice.nt() + 1 {
            return Err(Error::InsufficientData(format!(
                "base trajectory has {} snapshots, lattice needs {}",
                base_levels.len(),
                lattice.nt() + 1
            )));
        }
        let intervals: Vec<PrimalState> = base_levels
            .windows(2)
            .map(|w| PrimalState::midpoint(&w[0], &w[1]))
            .collect();
        Self::from_interval_base(lattice, &intervals, v0, alpha0, penalty, backend)
    }

    /// Base state given directly at the `N_t` interval centers.
    pub fn from_interval_base(
        lattice: SpaceTimeLattice,
        base: &[PrimalState],
        v0: Field,
        alpha0: Field,
        penalty: Penalty,
        backend: Backend,
    ) -> Result<Self> {
        Self::with_tables(lattice, base, v0, alpha0, penalty, backend, OperatorTables::assemble())
    }

    /// As [`DualProblem::from_interval_base`] with caller-supplied tables
    /// (fault-injection hook for the check suites).
    pub fn with_tables(
        lattice: SpaceTimeLattice,
        base: &[PrimalState],
        v0: Field,
        alpha0: Field,
        penalty: Penalty,
        backend: Backend,
        tables: OperatorTables,
    ) -> Result<Self> {
        if base.len() != lattice.nt() {
            return Err(Error::InsufficientData(format!(
                "base has {} interval states, lattice has {} intervals",
                base.len(),
                lattice.nt()
            )));
        }
        if !penalty.is_valid() {
            return Err(Error::InvalidArgument(format!("penalty constants must be positive: {penalty:?}")));
        }
        v0.expect_components(3, "initial velocity")?;
        alpha0.expect_components(9, "initial dislocation density")?;
        v0.check_finite("initial velocity")?;
        alpha0.check_finite("initial dislocation density")?;
        let grid = lattice.grid();
        if v0.grid() != grid || alpha0.grid() != grid || base.iter().any(|s| s.grid() != grid) {
            return Err(Error::InvalidArgument("dual problem fields on different grids".into()));
        }
        let mut ubar = Vec::with_capacity(lattice.nt() * grid.points());
        for s in base {
            s.check_finite()?;
            ubar.extend(field_to_points::<U_LEN>(&s.to_packed()));
        }
        let mut problem = Self {
            lattice,
            ubar,
            v0,
            alpha0,
            penalty,
            backend,
            tables,
            grad_at_zero: DualState::zeros(&lattice),
        };
        let w = lattice.weight();
        let env: Vec<PackedD> = problem
            .ubar
            .par_iter()
            .map(|u| problem.tables.envelope(u).map(|x| x * w))
            .collect();
        problem.grad_at_zero = problem.transpose(&env)?;
        Ok(problem)
    }

    pub fn lattice(&self) -> &SpaceTimeLattice {
        &self.lattice
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn tables(&self) -> &OperatorTables {
        &self.tables
    }

    pub fn initial_velocity(&self) -> &Field {
        &self.v0
    }

    pub fn initial_density(&self) -> &Field {
        &self.alpha0
    }

    /// Base values at the collocation points, interval-major.
    pub fn base_points(&self) -> &[PackedU] {
        &self.ubar
    }

    /// Base state per interval as primal fields.
    pub fn base_states(&self) -> Vec<PrimalState> {
        self.points_to_states(&self.ubar)
    }

    /// Mean of the base state over all collocation points.
    pub fn mean_base(&self) -> PackedU {
        let mut m = [0.0; U_LEN];
        for u in &self.ubar {
            for (x, y) in m.iter_mut().zip(u) {
                *x += y;
            }
        }
        m.map(|x| x / self.ubar.len() as f64)
    }

    /// Whether every collocation point carries the same base value.
    pub fn base_is_uniform(&self) -> bool {
        let first = self.ubar[0];
        self.ubar.iter().all(|u| u == &first)
    }

    /// Curvature preconditioner built from the mean base state.
    pub fn preconditioner(&self) -> Preconditioner {
        Preconditioner::new(&self.lattice, &self.tables, &self.mean_base(), &self.penalty, self.backend)
    }

    pub fn gradient_at_zero(&self) -> &DualState {
        &self.grad_at_zero
    }

    fn points_to_states(&self, pts: &[PackedU]) -> Vec<PrimalState> {
        let np = self.lattice.grid().points();
        pts.chunks(np)
            .map(|c| {
                PrimalState::from_packed(&points_to_field(self.lattice.grid(), c))
                    .expect("13-component field")
            })
            .collect()
    }

    /// Collocation values of `D`, interval-major.
    pub fn cal_d_points(&self, state: &DualState) -> Result<Vec<PackedD>> {
        let fields = compute_cal_d(&self.lattice, state, self.backend)?;
        Ok(fields.iter().flat_map(field_to_points::<D_LEN>).collect())
    }

    /// Applies the transpose of the `D -> D` map to per-point weighted
    /// envelope derivatives and adds the initial-condition terms.
    fn transpose(&self, weighted: &[PackedD]) -> Result<DualState> {
        let grid = self.lattice.grid();
        let np = grid.points();
        let nt = self.lattice.nt();
        let dt = self.lattice.dt();
        let per_interval: Vec<(Field, Field)> = weighted
            .par_chunks(np)
            .map(|chunk| {
                let w = points_to_field(grid, chunk);
                let mut spatial = Field::zeros(grid, 3 * LEVEL_COMPONENTS);
                for g in 0..3 * LEVEL_COMPONENTS {
                    spatial.comp_mut(g).copy_from_slice(w.comp(spatial_slot(g)));
                }
                let mut adj = grid::row_divergence(&spatial, self.backend)?;
                adj.scale(-1.0);
                let mut time = Field::zeros(grid, LEVEL_COMPONENTS);
                for c in 0..LEVEL_COMPONENTS {
                    if let Some(s) = time_slot(c) {
                        for (t, x) in time.comp_mut(c).iter_mut().zip(w.comp(s)) {
                            *t = x / dt;
                        }
                    }
                }
                Ok((adj, time))
            })
            .collect::<Result<_>>()?;

        let mut levels = Vec::with_capacity(nt + 1);
        for k in 0..=nt {
            let mut level = Field::zeros(grid, LEVEL_COMPONENTS);
            if k > 0 {
                let (adj, time) = &per_interval[k - 1];
                level.axpy(0.5, adj);
                level.axpy(1.0, time);
            }
            if k < nt {
                let (adj, time) = &per_interval[k];
                level.axpy(0.5, adj);
                level.axpy(-1.0, time);
            }
            levels.push(level);
        }
        let vol = grid.cell_volume();
        for c in 0..3 {
            let v0 = self.v0.comp(c).to_vec();
            for (x, v) in levels[0].comp_mut(c).iter_mut().zip(&v0) {
                *x -= vol * v;
            }
        }
        for c in 0..9 {
            let a0 = self.alpha0.comp(c).to_vec();
            for (x, a) in levels[0].comp_mut(3 + c).iter_mut().zip(&a0) {
                *x -= vol * a;
            }
        }
        let mut out = DualState { levels };
        out.enforce_final_condition();
        Ok(out)
    }

    fn check_state(&self, state: &DualState) -> Result<()> {
        if state.levels.len() != self.lattice.nt() + 1 || state.grid() != self.lattice.grid() {
            return Err(Error::InvalidArgument("dual state does not match the lattice".into()));
        }
        for l in &state.levels {
            l.check_finite("dual field")?;
        }
        Ok(())
    }

    fn solve_points(&self, ds: &[PackedD]) -> Result<dtp::FieldSolve> {
        dtp::dtp_solve_field(
            &self.tables,
            ds,
            &self.ubar,
            &self.penalty,
            self.lattice.grid().points(),
            FailureMode::Abort,
        )
    }

    /// Initial-condition part `h^3 sum (lambda(0).v0 + A(0):alpha0)`.
    fn initial_terms(&self, state: &DualState) -> f64 {
        let vol = self.lattice.grid().cell_volume();
        let l0 = &state.levels[0];
        let mut s = 0.0;
        for c in 0..3 {
            s += l0.comp(c).iter().zip(self.v0.comp(c)).map(|(x, y)| x * y).sum::<f64>();
        }
        for c in 0..9 {
            s += l0.comp(3 + c).iter().zip(self.alpha0.comp(c)).map(|(x, y)| x * y).sum::<f64>();
        }
        vol * s
    }

    /// Objective and gradient at `state`.
    pub fn evaluate(&self, state: &DualState) -> Result<Evaluation> {
        self.check_state(state)?;
        let ds = self.cal_d_points(state)?;
        let solve = self.solve_points(&ds)?;
        let w = self.lattice.weight();
        let a = self.penalty;
        let per_point: Vec<(PackedD, f64)> = ds
            .par_iter()
            .zip(solve.u_hat.par_iter())
            .zip(self.ubar.par_iter())
            .map(|((d, u), ub)| {
                let env = self.tables.envelope(u).map(|x| x * w);
                let k = self.tables.k_at(d, &a);
                let delta: PackedU = std::array::from_fn(|i| u[i] - ub[i]);
                let mut quad = 0.0;
                for i in 0..U_LEN {
                    let row: f64 = (0..U_LEN).map(|j| k[i][j] * delta[j]).sum();
                    quad += delta[i] * row;
                }
                (env, -0.5 * w * quad)
            })
            .collect();
        let deviation: f64 = per_point.iter().map(|(_, q)| q).sum();
        let env: Vec<PackedD> = per_point.into_iter().map(|(e, _)| e).collect();
        let gradient = self.transpose(&env)?;
        Ok(Evaluation {
            objective: deviation + self.grad_at_zero.dot(state),
            gradient,
            u_hat: solve.u_hat,
            min_pivot: solve.min_pivot,
            max_mapping_residual: solve.max_residual,
        })
    }

    pub fn objective(&self, state: &DualState) -> Result<f64> {
        Ok(self.evaluate(state)?.objective)
    }

    /// The objective in all three forms, for cross-checking.
    pub fn objective_forms(&self, state: &DualState) -> Result<ObjectiveForms> {
        let eval = self.evaluate(state)?;
        let ds = self.cal_d_points(state)?;
        let w = self.lattice.weight();
        let vals: Vec<(f64, f64)> = ds
            .par_iter()
            .zip(eval.u_hat.par_iter())
            .zip(self.ubar.par_iter())
            .map(|((d, u), ub)| {
                let l = self.tables.lagrangian(u, d, ub, &self.penalty);
                let c = dtp::closed_form_integrand(&self.tables, d, ub, &self.penalty)?;
                Ok((l, c))
            })
            .collect::<Result<_>>()?;
        let ic = self.initial_terms(state);
        let lagrangian = w * vals.iter().map(|v| v.0).sum::<f64>() - ic;
        let closed_form = w * vals.iter().map(|v| v.1).sum::<f64>() - ic;
        Ok(ObjectiveForms {
            deviation: eval.objective,
            lagrangian,
            closed_form,
        })
    }

    /// Mapped primal fields at the interval centers.
    pub fn extract_primal(&self, state: &DualState) -> Result<ExtractedPrimal> {
        self.check_state(state)?;
        let ds = self.cal_d_points(state)?;
        let solve = self.solve_points(&ds)?;
        let states = self.points_to_states(&solve.u_hat);
        let mut div_v = 0.0f64;
        let mut div_alpha = 0.0f64;
        for s in &states {
            div_v = div_v.max(grid::div_vector(&s.v, self.backend)?.max_abs());
            div_alpha = div_alpha.max(grid::div_tensor_rowwise(&s.alpha, self.backend)?.max_abs());
        }
        let residual = self.residual_of(&states)?;
        Ok(ExtractedPrimal {
            states,
            div_v,
            div_alpha,
            residual,
            min_pivot: solve.min_pivot,
            max_mapping_residual: solve.max_residual,
        })
    }

    /// Discrete primal residual of an interval series with this problem's
    /// initial data.
    pub fn residual_of(&self, states: &[PrimalState]) -> Result<ResidualNorm> {
        Ok(interval_residual(states, &self.v0, &self.alpha0, self.lattice.dt(), self.backend)?.norms())
    }

    /// Gradient assembled from the hat-replaced primal equations.
    pub fn hat_residual_gradient(&self, state: &DualState) -> Result<DualState> {
        let ext = self.extract_primal(state)?;
        let r = interval_residual(&ext.states, &self.v0, &self.alpha0, self.lattice.dt(), self.backend)?;
        let w = self.lattice.weight();
        let mut out = DualState {
            levels: r.levels.into_iter().map(|f| f.scaled(w)).collect(),
        };
        out.enforce_final_condition();
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ExtractedPrimal {
    pub states: Vec<PrimalState>,
    pub div_v: f64,
    pub div_alpha: f64,
    pub residual: ResidualNorm,
    pub min_pivot: f64,
    pub max_mapping_residual: f64,
}

/// Max-norm of a gradient normalized by the collocation weight.
pub fn normalized_gradient_norm(lattice: &SpaceTimeLattice, g: &DualState) -> f64 {
    g.max_abs() / lattice.weight()
}

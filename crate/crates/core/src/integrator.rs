//! Pseudo-spectral method-of-lines solver with classical RK4 in time.
//!
//! Pressure never appears explicitly: the momentum rate is Leray-projected,
//! and `p` is reconstructed on demand from the Poisson equation
//! `-lap p = div div (v v - alpha^T alpha)` with zero mean.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ops::project_spectrum;
use crate::grid::spectral::{times_ik, ModeTables, Spectrum};
use crate::grid::{self, Backend, Field};
use crate::primal::{self, ConservationReport, PrimalState};

/// Courant bound checked at the start of every step.
pub const CFL_LIMIT: f64 = 0.5;
/// Largest divergence of the initial velocity accepted by [`integrate`].
pub const INITIAL_DIV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub steps: usize,
    pub nu: f64,
    pub eta: f64,
    pub dealias: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            steps: 1,
            nu: 0.0,
            eta: 0.0,
            dealias: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be positive".into()));
        }
        if !(self.nu >= 0.0 && self.eta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularizers must be non-negative, got nu={}, eta={}",
                self.nu, self.eta
            )));
        }
        Ok(())
    }
}

/// Courant number `dt (max|v| + max|alpha|) n` of a state.
pub fn courant_number(state: &PrimalState, dt: f64) -> f64 {
    let n = state.grid().n() as f64;
    dt * (state.v.max_pointwise_norm() + state.alpha.max_pointwise_norm()) * n
}

fn maybe_dealiased(f: &Field, modes: &ModeTables, dealias: bool) -> (Spectrum, Field) {
    let mut spec = Spectrum::of(f);
    if dealias {
        spec.dealias(modes);
        let phys = spec.to_field();
        (spec, phys)
    } else {
        (spec, f.clone())
    }
}

/// Time rates `(dv/dt, dalpha/dt)` of the (regularized) system.
pub fn semidiscrete_rhs(state: &PrimalState, config: &IntegratorConfig) -> Result<(Field, Field)> {
    state.v.check_finite("velocity")?;
    state.alpha.check_finite("dislocation density")?;
    let grid = state.grid();
    let np = grid.points();
    let modes = ModeTables::new(grid);
    let (v_spec, v) = maybe_dealiased(&state.v, &modes, config.dealias);
    let (a_spec, alpha) = maybe_dealiased(&state.alpha, &modes, config.dealias);

    let mut flux = Spectrum::of(&primal::nonlinear_flux(&v, &alpha));
    let mut cross = Spectrum::of(&primal::cross_rowwise(&alpha, &v));
    if config.dealias {
        flux.dealias(&modes);
        cross.dealias(&modes);
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut dv = Spectrum::zeros(grid, 3);
    for m in 0..np {
        let k = modes.kd(m);
        for i in 0..3 {
            let mut s = zero;
            for j in 0..3 {
                s -= times_ik(k[j], flux.at(3 * i + j, m));
            }
            dv.set(i, m, s);
        }
    }
    project_spectrum(&mut dv, &modes);

    // -(curl E)_ip = -e_pqr d_q E_ir, row by row.
    let mut da = Spectrum::zeros(grid, 9);
    for m in 0..np {
        let k = modes.kd(m);
        for i in 0..3 {
            let e = [cross.at(3 * i, m), cross.at(3 * i + 1, m), cross.at(3 * i + 2, m)];
            let curl = [
                times_ik(k[1], e[2]) - times_ik(k[2], e[1]),
                times_ik(k[2], e[0]) - times_ik(k[0], e[2]),
                times_ik(k[0], e[1]) - times_ik(k[1], e[0]),
            ];
            for p in 0..3 {
                da.set(3 * i + p, m, -curl[p]);
            }
        }
    }

    if config.nu > 0.0 {
        for c in 0..3 {
            let src = v_spec.comp(c);
            for (m, z) in dv.comp_mut(c).iter_mut().enumerate() {
                *z -= src[m] * (config.nu * modes.k2(m));
            }
        }
    }
    if config.eta > 0.0 {
        for c in 0..9 {
            let src = a_spec.comp(c);
            for (m, z) in da.comp_mut(c).iter_mut().enumerate() {
                *z -= src[m] * (config.eta * modes.k2(m));
            }
        }
    }
    Ok((dv.to_field(), da.to_field()))
}

/// Removes the gradient part of `v` in place, leaving div-free fields untouched
/// up to the longitudinal correction.
fn reproject(v: &mut Field) {
    let grid = v.grid();
    let modes = ModeTables::new(grid);
    let spec = Spectrum::of(v);
    let mut longitudinal = Spectrum::zeros(grid, 3);
    for m in 0..grid.points() {
        let k = modes.kd(m);
        let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if kk == 0.0 {
            continue;
        }
        let kdotu = (spec.at(0, m) * k[0] + spec.at(1, m) * k[1] + spec.at(2, m) * k[2]) / kk;
        for a in 0..3 {
            longitudinal.set(a, m, kdotu * k[a]);
        }
    }
    v.axpy(-1.0, &longitudinal.to_field());
}

fn stage(base: &PrimalState, h: f64, k: &(Field, Field)) -> PrimalState {
    let mut s = base.clone();
    s.v.axpy(h, &k.0);
    s.alpha.axpy(h, &k.1);
    s
}

/// One classical RK4 step; the pressure field is carried over unchanged.
pub fn step_rk4(state: &PrimalState, config: &IntegratorConfig) -> Result<PrimalState> {
    let courant = courant_number(state, config.dt);
    if !(courant <= CFL_LIMIT) {
        return Err(Error::StepSize {
            courant,
            limit: CFL_LIMIT,
        });
    }
    let dt = config.dt;
    let k1 = semidiscrete_rhs(state, config)?;
    let k2 = semidiscrete_rhs(&stage(state, 0.5 * dt, &k1), config)?;
    let k3 = semidiscrete_rhs(&stage(state, 0.5 * dt, &k2), config)?;
    let k4 = semidiscrete_rhs(&stage(state, dt, &k3), config)?;

    let mut next = state.clone();
    for (out, ks) in [
        (&mut next.v, [&k1.0, &k2.0, &k3.0, &k4.0]),
        (&mut next.alpha, [&k1.1, &k2.1, &k3.1, &k4.1]),
    ] {
        let mut incr = ks[0].clone();
        incr.axpy(2.0, ks[1]);
        incr.axpy(2.0, ks[2]);
        incr.axpy(1.0, ks[3]);
        out.axpy(dt / 6.0, &incr);
    }
    reproject(&mut next.v);
    Ok(next)
}

/// Zero-mean pressure of a state from the Poisson equation.
pub fn reconstruct_pressure(v: &Field, alpha: &Field) -> Result<Field> {
    v.check_finite("velocity")?;
    alpha.check_finite("dislocation density")?;
    let grid = v.grid();
    let modes = ModeTables::new(grid);
    let flux = Spectrum::of(&primal::nonlinear_flux(v, alpha));
    let mut p = Spectrum::zeros(grid, 1);
    for m in 0..grid.points() {
        let k = modes.kd(m);
        let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if kk == 0.0 {
            continue;
        }
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                s += flux.at(3 * i + j, m) * (k[i] * k[j]);
            }
        }
        p.set(0, m, -s / kk);
    }
    Ok(p.to_field())
}

/// Diagnostics that tolerate tensor rows with a nonzero mean (helicity is
/// then reported as NaN).
pub fn diagnostics(state: &PrimalState) -> Result<ConservationReport> {
    match primal::conservation_report(state, Backend::Spectral) {
        Ok(r) => Ok(r),
        Err(Error::NotCurlSolvable { .. } | Error::IllPosedPotential { .. }) => {
            Ok(ConservationReport {
                energy: primal::energy(state),
                helicity_per_row: [f64::NAN; 3],
                helicity_total: f64::NAN,
                div_v_norm: grid::div_vector(&state.v, Backend::Spectral)?.max_abs(),
                div_alpha_norm: grid::div_tensor_rowwise(&state.alpha, Backend::Spectral)?
                    .max_abs(),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PrimalState>,
    pub reports: Vec<ConservationReport>,
}

/// Integrates `config.steps` steps, sampling every `sample_every` steps
/// (the initial and final states are always sampled). Sampled states carry
/// the reconstructed pressure.
pub fn integrate(
    initial: &PrimalState,
    config: &IntegratorConfig,
    sample_every: usize,
) -> Result<Trajectory> {
    config.validate()?;
    initial.check_finite()?;
    let div = grid::div_vector(&initial.v, Backend::Spectral)?.max_abs();
    if div > INITIAL_DIV_TOL {
        return Err(Error::InvalidField(format!(
            "initial velocity is not divergence-free (max |div v| = {div:e})"
        )));
    }
    let every = sample_every.max(1);
    let mut state = initial.clone();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        reports: Vec::new(),
    };
    let record = |s: &PrimalState, t: f64, traj: &mut Trajectory| -> Result<()> {
        let mut sampled = s.clone();
        sampled.p = reconstruct_pressure(&s.v, &s.alpha)?;
        let mean_p = initial.p.mean(0);
        for x in sampled.p.comp_mut(0) {
            *x += mean_p;
        }
        traj.reports.push(diagnostics(&sampled)?);
        traj.times.push(t);
        traj.states.push(sampled);
        Ok(())
    };
    record(&state, 0.0, &mut traj)?;
    for step in 1..=config.steps {
        let next = step_rk4(&state, config)?;
        if !next.is_finite() {
            return Err(Error::NumericalAbort {
                step,
                time: (step - 1) as f64 * config.dt,
                last_good: Box::new(state),
            });
        }
        state = next;
        if step % every == 0 || step == config.steps {
            record(&state, step as f64 * config.dt, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Time-reversed state: velocity negated, density unchanged.
pub fn time_reversed(state: &PrimalState) -> PrimalState {
    let mut s = state.clone();
    s.v.scale(-1.0);
    s
}

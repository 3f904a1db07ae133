use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};

use super::{DualProblem, DualState, Evaluation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub history: usize,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub max_backtracks: usize,
    pub precondition: Preconditioning,
}

/// Choice of initial inverse Hessian for the quasi-Newton recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioning {
    /// Scaled identity.
    Off,
    /// Per-mode curvature inverse at the mean base state.
    On,
    /// `On` when the base state is spatially uniform, where it is exact.
    #[default]
    Auto,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            history: 10,
            armijo: 1e-4,
            max_backtracks: 60,
            precondition: Preconditioning::Auto,
        }
    }
}

/// Per-iteration record of a dual solve; entry 0 describes the start point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective: Vec<f64>,
    /// Raw `max |grad S|` per iterate.
    pub grad_norm: Vec<f64>,
    pub min_pivot: Vec<f64>,
    pub mapping_residual: Vec<f64>,
    /// Accepted step length (0 for the start point).
    pub step_length: Vec<f64>,
    pub converged: bool,
    pub wall_time: f64,
}

impl SolveReport {
    pub const CSV_HEADER: &'static str = "iter,S,grad_norm,min_pivot,step_length";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for i in 0..self.objective.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                i, self.objective[i], self.grad_norm[i], self.min_pivot[i], self.step_length[i]
            ));
        }
        s
    }

    fn push(&mut self, e: &Evaluation, step: f64) {
        self.objective.push(e.objective);
        self.grad_norm.push(e.gradient.max_abs());
        self.min_pivot.push(e.min_pivot);
        self.mapping_residual.push(e.max_mapping_residual);
        self.step_length.push(step);
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub state: DualState,
    pub objective: f64,
    pub report: SolveReport,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn converged(problem: &DualProblem, e: &Evaluation, tol: f64) -> bool {
    super::normalized_gradient_norm(problem.lattice(), &e.gradient) <= tol * (1.0 + e.objective.abs())
}

/// Limited-memory quasi-Newton ascent on `S` from `start`.
///
/// Trial points where any K loses definiteness count as rejected steps.
/// Converged when `max|grad S| / (dt h^3) <= tol (1 + |S|)`.
pub fn maximize(problem: &DualProblem, start: &DualState, config: &MaximizeConfig) -> Result<DualSolution> {
    let clock = Instant::now();
    let lattice = *problem.lattice();
    let mut x_state = start.clone();
    x_state.enforce_final_condition();
    let mut current = problem.evaluate(&x_state)?;
    let mut x = x_state.to_flat();
    let mut g = current.gradient.to_flat();
    let mut report = SolveReport::default();
    report.push(&current, 0.0);

    let use_precond = match config.precondition {
        Preconditioning::Off => false,
        Preconditioning::On => true,
        Preconditioning::Auto => problem.base_is_uniform(),
    };
    let precond = use_precond.then(|| problem.preconditioner());
    let apply_h0 = |q: &[f64], x: &[f64], g: &[f64], last: Option<&(Vec<f64>, Vec<f64>, f64)>| -> Result<Vec<f64>> {
        let h = |v: &[f64]| -> Result<Vec<f64>> {
            match &precond {
                Some(p) => Ok(p.apply(&DualState::from_flat(&lattice, v)?)?.to_flat()),
                None => Ok(v.to_vec()),
            }
        };
        let gamma = match last {
            Some((s, y, _)) => dot(s, y) / dot(y, &h(y)?),
            None if precond.is_some() => 1.0,
            None => initial_scale(problem, &lattice, x, g)?,
        };
        Ok(h(q)?.into_iter().map(|v| gamma * v).collect())
    };
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let finish = |report: &mut SolveReport, state: DualState, objective: f64, ok: bool| {
        report.converged = ok;
        report.wall_time = clock.elapsed().as_secs_f64();
        DualSolution {
            state,
            objective,
            report: report.clone(),
        }
    };

    let mut iter = 0;
    loop {
        if converged(problem, &current, config.tol) {
            report.iterations = iter;
            return Ok(finish(&mut report, x_state, current.objective, true));
        }
        if iter >= config.max_iter {
            report.iterations = iter;
            return Ok(finish(&mut report, x_state, current.objective, false));
        }

        // Two-loop recursion for the ascent direction H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut q = apply_h0(&q, &x, &g, memory.back())?;
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir = q;
        let mut slope = dot(&g, &dir);
        if !(slope > 0.0) {
            memory.clear();
            dir = apply_h0(&g, &x, &g, None)?;
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let trial_state = DualState::from_flat(&lattice, &trial)?;
            match problem.evaluate(&trial_state) {
                Ok(e) if e.objective >= current.objective + config.armijo * step * slope => {
                    accepted = Some((trial, trial_state, e));
                    break;
                }
                Ok(_) | Err(Error::MappingFailure { .. }) => step *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((x_new, state_new, eval_new)) = accepted else {
            report.iterations = iter;
            let last = finish(&mut report, x_state, current.objective, false);
            return Err(Error::Stagnation {
                iterations: iter,
                last: Box::new(last),
            });
        };

        let g_new = eval_new.gradient.to_flat();
        // Curvature pair for the concave objective: s = dx, y = -(dg).
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&g_new).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && max_abs(&y) > 0.0 {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > config.history {
                memory.pop_front();
            }
        }
        iter += 1;
        report.push(&eval_new, step);
        x = x_new;
        g = g_new;
        x_state = state_new;
        current = eval_new;
    }
}

/// Step scale for a steepest-ascent move: the exact line maximizer of the
/// local quadratic model along `g`, from one probed gradient.
fn initial_scale(problem: &DualProblem, lattice: &super::SpaceTimeLattice, x: &[f64], g: &[f64]) -> Result<f64> {
    let gmax = max_abs(g);
    if gmax == 0.0 {
        return Ok(1.0);
    }
    let gg = dot(g, g);
    let mut eps = 1e-4 / gmax;
    for _ in 0..30 {
        let probe: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi + eps * gi).collect();
        match problem.evaluate(&DualState::from_flat(lattice, &probe)?) {
            Ok(e) => {
                let gp = e.gradient.to_flat();
                let curvature: f64 = g.iter().zip(&gp).zip(g).map(|((a, b), d)| (b - a) * d).sum::<f64>() / eps;
                return Ok(if curvature < 0.0 { gg / -curvature } else { eps });
            }
            Err(Error::MappingFailure { .. }) => eps *= 0.1,
            Err(e) => return Err(e),
        }
    }
    Ok(eps)
}

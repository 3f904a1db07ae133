use crate::error::{Error, Result};
use crate::grid::{self, Backend, Field};
use crate::primal::{momentum_flux, PrimalState};

use super::{FINAL_FIXED, LEVEL_COMPONENTS, MU};

/// Interval-centered discrete residual of the primal system, one
/// 13-component field per dual time level (momentum, transport, div v).
#[derive(Debug, Clone)]
pub struct IntervalResidual {
    pub levels: Vec<Field>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualNorm {
    pub momentum: f64,
    pub transport: f64,
    pub divergence: f64,
}

impl ResidualNorm {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.transport).max(self.divergence)
    }
}

impl IntervalResidual {
    pub fn norms(&self) -> ResidualNorm {
        let mut n = ResidualNorm::default();
        for l in &self.levels {
            for c in 0..3 {
                n.momentum = n.momentum.max(max_abs(l.comp(c)));
            }
            for c in 3..12 {
                n.transport = n.transport.max(max_abs(l.comp(c)));
            }
            n.divergence = n.divergence.max(max_abs(l.comp(MU)));
        }
        n
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `d_r (alpha_ij v_r - alpha_ir v_j)` for every `(i, j)`.
fn transport_divergence(s: &PrimalState, backend: Backend) -> Result<Field> {
    let grid = s.grid();
    let np = grid.points();
    let mut flux = Field::zeros(grid, 27);
    for i in 0..3 {
        for j in 0..3 {
            for r in 0..3 {
                let dst = flux.comp_mut(3 * (3 * i + j) + r);
                for (p, x) in dst.iter_mut().enumerate() {
                    *x = s.alpha.at(3 * i + j, p) * s.v.at(r, p)
                        - s.alpha.at(3 * i + r, p) * s.v.at(j, p);
                }
            }
        }
    }
    debug_assert_eq!(flux.data().len(), 27 * np);
    grid::row_divergence(&flux, backend)
}

/// Residual at each level `k` of the series `U_0 .. U_{N_t - 1}` given at
/// interval centers:
///
/// * momentum `(v_k - v_{k-1})/dt + 1/2 (div sigma_{k-1} + div sigma_k)`,
/// * transport likewise with the row-wise flux of alpha,
/// * `1/2 (div v_{k-1} + div v_k)`,
///
/// with `v_{-1} = v0`, `alpha_{-1} = alpha0` and missing flux terms at the
/// ends. Momentum and transport rows of the final level are zero.
pub fn interval_residual(
    states: &[PrimalState],
    v0: &Field,
    alpha0: &Field,
    dt: f64,
    backend: Backend,
) -> Result<IntervalResidual> {
    if states.is_empty() {
        return Err(Error::InsufficientData("empty interval series".into()));
    }
    let grid = states[0].grid();
    let nt = states.len();
    let mut sigma_div = Vec::with_capacity(nt);
    let mut trans_div = Vec::with_capacity(nt);
    let mut v_div = Vec::with_capacity(nt);
    for s in states {
        sigma_div.push(grid::div_tensor_rowwise(&momentum_flux(s)?, backend)?);
        trans_div.push(transport_divergence(s, backend)?);
        v_div.push(grid::div_vector(&s.v, backend)?);
    }
    let mut levels = Vec::with_capacity(nt + 1);
    for k in 0..=nt {
        let mut level = Field::zeros(grid, LEVEL_COMPONENTS);
        if k < nt {
            let (v_prev, a_prev) = if k == 0 {
                (v0, alpha0)
            } else {
                (&states[k - 1].v, &states[k - 1].alpha)
            };
            let dv = states[k].v.lincomb(1.0 / dt, v_prev, -1.0 / dt);
            let da = states[k].alpha.lincomb(1.0 / dt, a_prev, -1.0 / dt);
            for c in 0..3 {
                level.comp_mut(c).copy_from_slice(dv.comp(c));
            }
            for c in 0..9 {
                level.comp_mut(3 + c).copy_from_slice(da.comp(c));
            }
        }
        for j in [k.wrapping_sub(1), k] {
            if j >= nt {
                continue;
            }
            for c in 0..3 {
                for (x, y) in level.comp_mut(c).iter_mut().zip(sigma_div[j].comp(c)) {
                    *x += 0.5 * y;
                }
            }
            for c in 0..9 {
                for (x, y) in level.comp_mut(3 + c).iter_mut().zip(trans_div[j].comp(c)) {
                    *x += 0.5 * y;
                }
            }
            for (x, y) in level.comp_mut(MU).iter_mut().zip(v_div[j].comp(0)) {
                *x += 0.5 * y;
            }
        }
        if k == nt {
            for c in 0..FINAL_FIXED {
                level.comp_mut(c).fill(0.0);
            }
        }
        levels.push(level);
    }
    Ok(IntervalResidual { levels })
}

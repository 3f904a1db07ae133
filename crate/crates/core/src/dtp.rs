//! Per-point dual-to-primal solve.
//!
//! Given the dual derivative vector `D`, base state `Ub` and constants `a`,
//! the mapped primal point solves `K(D) (U - Ub) = -(M + B.Ub) D`. K is
//! factored as `L diag(d) L^T`; a pivot at or below `1e-10 max(a)` is
//! reported as a mapping failure rather than a crash.

use rayon::prelude::*;

use crate::algebra::{
    levi_civita, slot, DualPoint, Mat13, OperatorTables, PackedD, PackedU, Penalty, PrimalPoint,
    D_LEN, U_LEN,
};
use crate::error::{Error, PointLocation, Result};

/// Relative pivot floor of the SPD test.
pub const PIVOT_FLOOR_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtpResult {
    pub u_hat: PackedU,
    /// Smallest LDL^T pivot of K.
    pub min_pivot: f64,
    /// Max-norm of dL/dU at the mapped point, evaluated term by term.
    pub residual_norm: f64,
}

/// `L diag(d) L^T` factorization of a 13 x 13 symmetric matrix.
#[derive(Debug, Clone)]
pub struct Ldl {
    l: Mat13,
    d: [f64; U_LEN],
}

impl Ldl {
    /// Factors `k`; on a pivot `<= floor` returns `(index, pivot)`.
    pub fn factor(k: &Mat13, floor: f64) -> std::result::Result<Self, (usize, f64)> {
        let mut l = [[0.0; U_LEN]; U_LEN];
        let mut d = [0.0; U_LEN];
        for j in 0..U_LEN {
            let mut dj = k[j][j];
            for q in 0..j {
                dj -= l[j][q] * l[j][q] * d[q];
            }
            if !(dj > floor) {
                return Err((j, dj));
            }
            d[j] = dj;
            l[j][j] = 1.0;
            for i in j + 1..U_LEN {
                let mut s = k[i][j];
                for q in 0..j {
                    s -= l[i][q] * l[j][q] * d[q];
                }
                l[i][j] = s / dj;
            }
        }
        Ok(Self { l, d })
    }

    pub fn min_pivot(&self) -> f64 {
        self.d.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn solve(&self, b: &PackedU) -> PackedU {
        let mut y = *b;
        for i in 0..U_LEN {
            for q in 0..i {
                y[i] -= self.l[i][q] * y[q];
            }
        }
        for i in 0..U_LEN {
            y[i] /= self.d[i];
        }
        for i in (0..U_LEN).rev() {
            for q in i + 1..U_LEN {
                y[i] -= self.l[q][i] * y[q];
            }
        }
        y
    }
}

pub fn pivot_floor(a: &Penalty) -> f64 {
    PIVOT_FLOOR_REL * a.max()
}

/// Gradient `dL/dU` written out from the PDE, independent of the tables.
pub fn mapping_gradient(u: &PackedU, d: &PackedD, ubar: &PackedU, a: &Penalty) -> PackedU {
    let up = PrimalPoint::unpack(u);
    let ub = PrimalPoint::unpack(ubar);
    let dp = DualPoint::unpack(d);
    let g = &dp.grad_lambda;
    let h = &dp.grad_a;
    let mut out = PrimalPoint::default();
    for i in 0..3 {
        let mut r = a.a_v * (up.v[i] - ub.v[i]) - dp.dt_lambda[i] - dp.grad_mu[i];
        for j in 0..3 {
            r -= (g[i][j] + g[j][i]) * up.v[j];
        }
        for p in 0..3 {
            for j in 0..3 {
                for rr in 0..3 {
                    for m in 0..3 {
                        let e = levi_civita(p, j, rr) * levi_civita(p, m, i);
                        if e != 0.0 {
                            for k in 0..3 {
                                r -= e * up.alpha[k][m] * h[k][j][rr];
                            }
                        }
                    }
                }
            }
        }
        out.v[i] = r;
    }
    for i in 0..3 {
        for j in 0..3 {
            let mut r = a.a_alpha * (up.alpha[i][j] - ub.alpha[i][j]) - dp.dt_a[i][j];
            for s in 0..3 {
                r += (g[j][s] + g[s][j]) * up.alpha[i][s];
            }
            for p in 0..3 {
                for k in 0..3 {
                    for rr in 0..3 {
                        for s in 0..3 {
                            let e = levi_civita(p, k, rr) * levi_civita(p, j, s);
                            if e != 0.0 {
                                r -= e * up.v[s] * h[i][k][rr];
                            }
                        }
                    }
                }
            }
            out.alpha[i][j] = r;
        }
    }
    out.p = a.a_p * (up.p - ub.p) - (g[0][0] + g[1][1] + g[2][2]);
    out.pack()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves the mapping system at one point.
pub fn dtp_solve(
    tables: &OperatorTables,
    d: &PackedD,
    ubar: &PackedU,
    a: &Penalty,
) -> Result<DtpResult> {
    if !d.iter().chain(ubar.iter()).all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("non-finite dual gradient or base state".into()));
    }
    let floor = pivot_floor(a);
    let k = tables.k_at(d, a);
    let ldl = Ldl::factor(&k, floor).map_err(|(_, pivot)| Error::MappingFailure {
        location: None,
        pivot,
        floor,
    })?;
    let rhs = tables.mapping_rhs(d, ubar);
    let delta = ldl.solve(&rhs);
    let mut u_hat = *ubar;
    for (u, dl) in u_hat.iter_mut().zip(&delta) {
        *u += dl;
    }
    let residual_norm = max_abs(&mapping_gradient(&u_hat, d, ubar, a));
    Ok(DtpResult {
        u_hat,
        min_pivot: ldl.min_pivot(),
        residual_norm,
    })
}

/// `A = N^T K^-1 N` with `N_IG = M_IG + B_GIK Ub_K`, dense 51 x 51.
pub fn cal_a(
    tables: &OperatorTables,
    d: &PackedD,
    ubar: &PackedU,
    a: &Penalty,
) -> Result<Vec<[f64; D_LEN]>> {
    let floor = pivot_floor(a);
    let ldl = Ldl::factor(&tables.k_at(d, a), floor).map_err(|(_, pivot)| {
        Error::MappingFailure {
            location: None,
            pivot,
            floor,
        }
    })?;
    let n = tables.coupling(ubar);
    let mut kinv_n = vec![[0.0; U_LEN]; D_LEN];
    for (g, col) in kinv_n.iter_mut().enumerate() {
        let b: PackedU = std::array::from_fn(|i| n[i][g]);
        *col = ldl.solve(&b);
    }
    let mut out = vec![[0.0; D_LEN]; D_LEN];
    for (pi, row) in out.iter_mut().enumerate() {
        for (g, x) in row.iter_mut().enumerate() {
            *x = (0..U_LEN).map(|j| n[j][pi] * kinv_n[g][j]).sum();
        }
    }
    Ok(out)
}

/// Closed-form integrand `-1/2 D.A D + Ub.M D + 1/2 D.B:(Ub x Ub)`,
/// with `D.A D` evaluated as `r.K^-1 r`, `r = N D`.
pub fn closed_form_integrand(
    tables: &OperatorTables,
    d: &PackedD,
    ubar: &PackedU,
    a: &Penalty,
) -> Result<f64> {
    let floor = pivot_floor(a);
    let ldl = Ldl::factor(&tables.k_at(d, a), floor).map_err(|(_, pivot)| {
        Error::MappingFailure {
            location: None,
            pivot,
            floor,
        }
    })?;
    let r = tables.mapping_rhs(d, ubar);
    let kr = ldl.solve(&r);
    let dad: f64 = r.iter().zip(&kr).map(|(x, y)| x * y).sum();
    Ok(-0.5 * dad + tables.linear_part(ubar, d) + tables.quadratic_part(d, ubar, ubar))
}

/// Whether a failed point aborts the field solve or is collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureMode {
    #[default]
    Abort,
    CollectAll,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolve {
    pub u_hat: Vec<PackedU>,
    pub min_pivot: f64,
    pub max_residual: f64,
    /// Failed points (location, pivot); only filled in collect-all mode.
    pub failures: Vec<(PointLocation, f64)>,
}

/// Pointwise solve over a lattice of `ds.len()` points, `points_per_interval`
/// spatial points per time interval.
pub fn dtp_solve_field(
    tables: &OperatorTables,
    ds: &[PackedD],
    ubars: &[PackedU],
    a: &Penalty,
    points_per_interval: usize,
    mode: FailureMode,
) -> Result<FieldSolve> {
    if ds.len() != ubars.len() {
        return Err(Error::InvalidArgument(format!(
            "{} dual points but {} base points",
            ds.len(),
            ubars.len()
        )));
    }
    let locate = |idx: usize| PointLocation {
        interval: idx / points_per_interval.max(1),
        point: idx % points_per_interval.max(1),
    };
    let results: Vec<Result<DtpResult>> = ds
        .par_iter()
        .zip(ubars.par_iter())
        .map(|(d, ub)| dtp_solve(tables, d, ub, a))
        .collect();

    let mut out = FieldSolve {
        u_hat: Vec::with_capacity(ds.len()),
        min_pivot: f64::INFINITY,
        max_residual: 0.0,
        failures: Vec::new(),
    };
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(res) => {
                out.min_pivot = out.min_pivot.min(res.min_pivot);
                out.max_residual = out.max_residual.max(res.residual_norm);
                out.u_hat.push(res.u_hat);
            }
            Err(Error::MappingFailure { pivot, floor, .. }) => {
                let location = locate(idx);
                if mode == FailureMode::Abort {
                    return Err(Error::MappingFailure {
                        location: Some(location),
                        pivot,
                        floor,
                    });
                }
                out.min_pivot = out.min_pivot.min(pivot);
                out.failures.push((location, pivot));
                out.u_hat.push([f64::NAN; U_LEN]);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Lower bound on the smallest eigenvalue of K by Gershgorin discs.
pub fn gershgorin_lower_bound(k: &Mat13) -> f64 {
    (0..U_LEN)
        .map(|i| {
            let off: f64 = (0..U_LEN).filter(|&j| j != i).map(|j| k[i][j].abs()).sum();
            k[i][i] - off
        })
        .fold(f64::INFINITY, f64::min)
}

/// `p_hat - p_bar` implied by the decoupled pressure row.
pub fn pressure_shift(d: &PackedD, a: &Penalty) -> f64 {
    (d[slot::grad_lambda(0, 0)] + d[slot::grad_lambda(1, 1)] + d[slot::grad_lambda(2, 2)]) / a.a_p
}

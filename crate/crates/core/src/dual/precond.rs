//! Inverse of the objective's curvature at `D = 0` for a spatially uniform
//! base state.
//!
//! With a constant base the curvature `w L^H N^T a^-1 N L` is block diagonal
//! in spatial Fourier modes and banded in the level index, so it is factored
//! once per mode by a banded complex Cholesky. Variable bases use the mean
//! base state, which makes this an approximation used only to scale search
//! directions.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::algebra::{OperatorTables, PackedU, Penalty, D_LEN, U_LEN};
use crate::error::Result;
use crate::grid::spectral::{ModeTables, Spectrum};
use crate::grid::{Backend, Field, PeriodicGrid};

use super::{spatial_slot, time_slot, DualState, SpaceTimeLattice, FINAL_FIXED, LEVEL_COMPONENTS, MU};

const C: usize = LEVEL_COMPONENTS;
/// Lower bandwidth in the level-major ordering.
const BAND: usize = 2 * C - 1;
/// Diagonal shift relative to the largest diagonal entry.
const SHIFT_REL: f64 = 1e-10;

struct ModeFactor {
    /// `l[i][d]` holds `L[i][i - d]`.
    l: Vec<[Complex64; BAND + 1]>,
    /// Unknowns without any curvature at this mode; the inverse is zero there.
    inactive: Vec<bool>,
}

pub struct Preconditioner {
    grid: PeriodicGrid,
    nt: usize,
    factors: Vec<ModeFactor>,
}

fn derivative_symbols(grid: PeriodicGrid, backend: Backend) -> Vec<[f64; 3]> {
    let n = grid.n();
    match backend {
        Backend::Spectral => {
            let modes = ModeTables::new(grid);
            (0..grid.points()).map(|m| modes.kd(m)).collect()
        }
        Backend::Fd2 => (0..grid.points())
            .map(|m| {
                let idx = grid.unflatten(m);
                std::array::from_fn(|a| {
                    n as f64 * (2.0 * std::f64::consts::PI * idx[a] as f64 / n as f64).sin()
                })
            })
            .collect(),
    }
}

impl Preconditioner {
    pub fn new(
        lattice: &SpaceTimeLattice,
        tables: &OperatorTables,
        ubar_mean: &PackedU,
        penalty: &Penalty,
        backend: Backend,
    ) -> Self {
        let grid = lattice.grid();
        let nt = lattice.nt();
        let dt = lattice.dt();
        let w = lattice.weight();
        let n_mat = tables.coupling(ubar_mean);
        let a = penalty.diag();
        // G = N^T a^-1 N, 51 x 51, real symmetric.
        let mut g = vec![[0.0; D_LEN]; D_LEN];
        for (s, row) in g.iter_mut().enumerate() {
            for (t, x) in row.iter_mut().enumerate() {
                *x = (0..U_LEN).map(|u| n_mat[u][s] * n_mat[u][t] / a[u]).sum();
            }
        }
        let symbols = derivative_symbols(grid, backend);
        let size = C * nt + 1;
        let factors = symbols
            .par_iter()
            .map(|kd| {
                // Local map from (lower level, upper level) components to D.
                let mut local = vec![[Complex64::new(0.0, 0.0); 2 * C]; D_LEN];
                for c in 0..C {
                    if let Some(s) = time_slot(c) {
                        local[s][c] -= 1.0 / dt;
                        local[s][C + c] += 1.0 / dt;
                    }
                    for (ax, &k) in kd.iter().enumerate() {
                        let s = spatial_slot(3 * c + ax);
                        local[s][c] += Complex64::new(0.0, 0.5 * k);
                        local[s][C + c] += Complex64::new(0.0, 0.5 * k);
                    }
                }
                let mut gl = vec![[Complex64::new(0.0, 0.0); 2 * C]; D_LEN];
                for s in 0..D_LEN {
                    for q in 0..2 * C {
                        gl[s][q] = (0..D_LEN).map(|t| local[t][q] * g[s][t]).sum();
                    }
                }
                let mut block = [[Complex64::new(0.0, 0.0); 2 * C]; 2 * C];
                for p in 0..2 * C {
                    for q in 0..2 * C {
                        block[p][q] = (0..D_LEN).map(|s| local[s][p].conj() * gl[s][q]).sum::<Complex64>() * w;
                    }
                }
                // Banded assembly over intervals; free unknowns only.
                let mut band = vec![[Complex64::new(0.0, 0.0); BAND + 1]; size];
                let index = |level: usize, c: usize| -> Option<usize> {
                    if level < nt {
                        Some(level * C + c)
                    } else if c == MU {
                        Some(nt * C)
                    } else {
                        None
                    }
                };
                for j in 0..nt {
                    for p in 0..2 * C {
                        let Some(ip) = index(j + p / C, p % C) else { continue };
                        for q in 0..2 * C {
                            let Some(iq) = index(j + q / C, q % C) else { continue };
                            if iq <= ip {
                                band[ip][ip - iq] += block[p][q];
                            }
                        }
                    }
                }
                let max_diag = band.iter().map(|r| r[0].re).fold(0.0, f64::max);
                let inactive: Vec<bool> = band.iter().map(|r| r[0].re <= 1e-14 * max_diag.max(f64::MIN_POSITIVE)).collect();
                let shift = SHIFT_REL * max_diag.max(f64::MIN_POSITIVE);
                for (i, r) in band.iter_mut().enumerate() {
                    if inactive[i] {
                        for x in r.iter_mut() {
                            *x = Complex64::new(0.0, 0.0);
                        }
                        r[0] = Complex64::new(1.0, 0.0);
                    } else {
                        r[0] += shift;
                    }
                }
                for i in 0..size {
                    if inactive[i] {
                        continue;
                    }
                    for d in 1..=BAND.min(i) {
                        if inactive[i - d] {
                            band[i][d] = Complex64::new(0.0, 0.0);
                        }
                    }
                }
                ModeFactor {
                    l: banded_cholesky(band),
                    inactive,
                }
            })
            .collect();
        Self { grid, nt, factors }
    }

    /// Applies the approximate inverse curvature to a gradient.
    pub fn apply(&self, g: &DualState) -> Result<DualState> {
        let np = self.grid.points();
        let nt = self.nt;
        let spectra: Vec<Spectrum> = g.levels.par_iter().map(Spectrum::of).collect();
        let solved: Vec<Vec<Complex64>> = (0..np)
            .into_par_iter()
            .map(|m| {
                let f = &self.factors[m];
                let mut b: Vec<Complex64> = Vec::with_capacity(C * nt + 1);
                for level in spectra.iter().take(nt) {
                    for c in 0..C {
                        b.push(level.at(c, m));
                    }
                }
                b.push(spectra[nt].at(MU, m));
                for (x, &off) in b.iter_mut().zip(&f.inactive) {
                    if off {
                        *x = Complex64::new(0.0, 0.0);
                    }
                }
                banded_solve(&f.l, &mut b);
                for (x, &off) in b.iter_mut().zip(&f.inactive) {
                    if off {
                        *x = Complex64::new(0.0, 0.0);
                    }
                }
                b
            })
            .collect();
        let mut out_spec = vec![Spectrum::zeros(self.grid, C); nt + 1];
        for (m, x) in solved.iter().enumerate() {
            for (level, spec) in out_spec.iter_mut().enumerate().take(nt) {
                for c in 0..C {
                    spec.set(c, m, x[level * C + c]);
                }
            }
            out_spec[nt].set(MU, m, x[nt * C]);
        }
        let levels: Vec<Field> = out_spec.par_iter().map(Spectrum::to_field).collect();
        let mut out = DualState { levels };
        for c in 0..FINAL_FIXED {
            out.levels[nt].comp_mut(c).fill(0.0);
        }
        Ok(out)
    }
}

fn banded_cholesky(mut a: Vec<[Complex64; BAND + 1]>) -> Vec<[Complex64; BAND + 1]> {
    let n = a.len();
    for i in 0..n {
        for d in (1..=BAND.min(i)).rev() {
            let j = i - d;
            let mut s = a[i][d];
            for k in j.saturating_sub(BAND).max(i.saturating_sub(BAND))..j {
                s -= a[i][i - k] * a[j][j - k].conj();
            }
            a[i][d] = s / a[j][0].re;
        }
        let mut diag = a[i][0].re;
        for k in i.saturating_sub(BAND)..i {
            diag -= a[i][i - k].norm_sqr();
        }
        a[i][0] = Complex64::new(diag.max(f64::MIN_POSITIVE).sqrt(), 0.0);
    }
    a
}

fn banded_solve(l: &[[Complex64; BAND + 1]], b: &mut [Complex64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for k in i.saturating_sub(BAND)..i {
            s -= l[i][i - k] * b[k];
        }
        b[i] = s / l[i][0].re;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..(i + BAND + 1).min(n) {
            s -= l[k][k - i].conj() * b[k];
        }
        b[i] = s / l[i][0].re;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_cholesky_solves_a_band_system() {
        let n = 40;
        let mut band = vec![[Complex64::new(0.0, 0.0); BAND + 1]; n];
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for d in 0..=BAND.min(i) {
                let j = i - d;
                let v = if d == 0 {
                    Complex64::new(60.0 + i as f64, 0.0)
                } else {
                    Complex64::new(((i * 7 + j * 3) % 5) as f64 * 0.3, ((i + 2 * j) % 3) as f64 * 0.2 - 0.2)
                };
                band[i][d] = v;
                dense[i][j] = v;
                dense[j][i] = v.conj();
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let mut b: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum()).collect();
        let l = banded_cholesky(band);
        banded_solve(&l, &mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).norm() <= 1e-12);
        }
    }
}

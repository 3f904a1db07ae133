//! The ideal FDM system: momentum flux, row-wise transport, the MHD
//! row embedding, and conserved-quantity diagnostics.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::spectral::{times_ik, ModeTables, Spectrum};
use crate::grid::{self, Backend, Field, PeriodicGrid};

/// Primal fields U = (v, alpha, p).
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState {
    pub v: Field,
    pub alpha: Field,
    pub p: Field,
}

impl PrimalState {
    pub fn new(v: Field, alpha: Field, p: Field) -> Result<Self> {
        v.expect_components(3, "velocity")?;
        alpha.expect_components(9, "dislocation density")?;
        p.expect_components(1, "pressure")?;
        if v.grid() != alpha.grid() || v.grid() != p.grid() {
            return Err(Error::InvalidArgument("primal fields on different grids".into()));
        }
        Ok(Self { v, alpha, p })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            v: Field::zeros(grid, 3),
            alpha: Field::zeros(grid, 9),
            p: Field::zeros(grid, 1),
        }
    }

    /// Spatially constant state from a packed 13-vector.
    pub fn constant(grid: PeriodicGrid, packed: &[f64; 13]) -> Self {
        Self {
            v: Field::constant(grid, &packed[0..3]),
            alpha: Field::constant(grid, &packed[3..12]),
            p: Field::constant(grid, &packed[12..13]),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.v.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.alpha.is_finite() && self.p.is_finite()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        self.v.check_finite("velocity")?;
        self.alpha.check_finite("dislocation density")?;
        self.p.check_finite("pressure")
    }

    /// The 13-slot packed value at one grid point.
    pub fn packed_at(&self, point: usize) -> [f64; 13] {
        let mut u = [0.0; 13];
        for (c, slot) in u[0..3].iter_mut().enumerate() {
            *slot = self.v.at(c, point);
        }
        for (c, slot) in u[3..12].iter_mut().enumerate() {
            *slot = self.alpha.at(c, point);
        }
        u[12] = self.p.at(0, point);
        u
    }

    /// All fields stacked into one 13-component field (packed slot order).
    pub fn to_packed(&self) -> Field {
        Field::stack(&[&self.v, &self.alpha, &self.p]).expect("same grid")
    }

    pub fn from_packed(f: &Field) -> Result<Self> {
        f.expect_components(13, "packed primal field")?;
        Ok(Self {
            v: f.extract(0..3),
            alpha: f.extract(3..12),
            p: f.extract(12..13),
        })
    }

    /// Pointwise average of two states.
    pub fn midpoint(a: &PrimalState, b: &PrimalState) -> PrimalState {
        PrimalState {
            v: a.v.lincomb(0.5, &b.v, 0.5),
            alpha: a.alpha.lincomb(0.5, &b.alpha, 0.5),
            p: a.p.lincomb(0.5, &b.p, 0.5),
        }
    }

    pub fn max_diff(&self, other: &PrimalState) -> f64 {
        self.v
            .max_diff(&other.v)
            .max(self.alpha.max_diff(&other.alpha))
            .max(self.p.max_diff(&other.p))
    }
}

/// Symmetric flux without pressure, `v_i v_j - alpha_ki alpha_kj`, as a
/// 9-component field.
pub fn nonlinear_flux(v: &Field, alpha: &Field) -> Field {
    let grid = v.grid();
    let np = grid.points();
    let mut out = Field::zeros(grid, 9);
    for i in 0..3 {
        for j in i..3 {
            let mut vals = vec![0.0; np];
            for (p, val) in vals.iter_mut().enumerate() {
                let mut s = v.at(i, p) * v.at(j, p);
                for k in 0..3 {
                    s -= alpha.at(3 * k + i, p) * alpha.at(3 * k + j, p);
                }
                *val = s;
            }
            out.comp_mut(3 * i + j).copy_from_slice(&vals);
            out.comp_mut(3 * j + i).copy_from_slice(&vals);
        }
    }
    out
}

/// `sigma_ij = v_i v_j - alpha_ki alpha_kj + p delta_ij`.
pub fn momentum_flux(state: &PrimalState) -> Result<Field> {
    state.check_finite()?;
    let mut sigma = nonlinear_flux(&state.v, &state.alpha);
    for i in 0..3 {
        let p = state.p.comp(0).to_vec();
        for (s, pv) in sigma.comp_mut(4 * i).iter_mut().zip(&p) {
            *s += pv;
        }
    }
    Ok(sigma)
}

/// Row-wise cross product `(alpha x v)_ip = e_pms alpha_im v_s`.
pub fn cross_rowwise(alpha: &Field, v: &Field) -> Field {
    let grid = v.grid();
    let np = grid.points();
    let mut out = Field::zeros(grid, 9);
    for i in 0..3 {
        for p in 0..np {
            let a = [alpha.at(3 * i, p), alpha.at(3 * i + 1, p), alpha.at(3 * i + 2, p)];
            let w = [v.at(0, p), v.at(1, p), v.at(2, p)];
            out.set(3 * i, p, a[1] * w[2] - a[2] * w[1]);
            out.set(3 * i + 1, p, a[2] * w[0] - a[0] * w[2]);
            out.set(3 * i + 2, p, a[0] * w[1] - a[1] * w[0]);
        }
    }
    out
}

/// Time rate of alpha for the ideal system: `-curl_rowwise(alpha x v)`.
pub fn transport_rhs(alpha: &Field, v: &Field, backend: Backend) -> Result<Field> {
    alpha.expect_components(9, "transport_rhs alpha")?;
    v.expect_components(3, "transport_rhs velocity")?;
    alpha.check_finite("dislocation density")?;
    v.check_finite("velocity")?;
    let mut out = grid::curl_rowwise(&cross_rowwise(alpha, v), backend)?;
    out.scale(-1.0);
    Ok(out)
}

/// Places a vector field as row `row` (1-based) of an otherwise zero tensor.
pub fn embed_mhd(b: &Field, row: usize) -> Result<Field> {
    b.expect_components(3, "embed_mhd")?;
    if !(1..=3).contains(&row) {
        return Err(Error::InvalidArgument(format!("row must be in 1..=3, got {row}")));
    }
    b.check_finite("magnetic field")?;
    let mut alpha = Field::zeros(b.grid(), 9);
    for c in 0..3 {
        alpha.comp_mut(3 * (row - 1) + c).copy_from_slice(b.comp(c));
    }
    Ok(alpha)
}

/// Row `row` (1-based) of a tensor field as a vector field.
pub fn extract_row(alpha: &Field, row: usize) -> Result<Field> {
    alpha.expect_components(9, "extract_row")?;
    if !(1..=3).contains(&row) {
        return Err(Error::InvalidArgument(format!("row must be in 1..=3, got {row}")));
    }
    Ok(alpha.extract(3 * (row - 1)..3 * row))
}

/// Tolerance on |row mean| for curl solvability.
pub const MEAN_TOL: f64 = 1e-8;
/// Tolerance on the max divergence of a row.
pub const DIV_TOL: f64 = 1e-6;

/// Divergence-free, zero-mean vector potential of each row:
/// `curl chi_row = alpha_row`.
pub fn vector_potential(alpha: &Field) -> Result<Field> {
    alpha.expect_components(9, "vector_potential")?;
    alpha.check_finite("dislocation density")?;
    let grid = alpha.grid();
    let modes = ModeTables::new(grid);
    let div = grid::div_tensor_rowwise(alpha, Backend::Spectral)?;
    for row in 0..3 {
        let mean = (0..3).map(|c| alpha.mean(3 * row + c).abs()).fold(0.0, f64::max);
        if mean > MEAN_TOL {
            return Err(Error::NotCurlSolvable { row: row + 1, mean });
        }
        let norm = div.comp(row).iter().fold(0.0, |m: f64, x| m.max(x.abs()));
        if norm > DIV_TOL {
            return Err(Error::IllPosedPotential { row: row + 1, norm });
        }
    }
    let spec = Spectrum::of(alpha);
    let mut chi = Spectrum::zeros(grid, 9);
    let zero = Complex64::new(0.0, 0.0);
    for m in 0..grid.points() {
        let k = modes.kd(m);
        let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        for row in 0..3 {
            let a = [
                spec.at(3 * row, m),
                spec.at(3 * row + 1, m),
                spec.at(3 * row + 2, m),
            ];
            let out = if kk == 0.0 {
                [zero; 3]
            } else {
                [
                    (times_ik(k[1], a[2]) - times_ik(k[2], a[1])) / kk,
                    (times_ik(k[2], a[0]) - times_ik(k[0], a[2])) / kk,
                    (times_ik(k[0], a[1]) - times_ik(k[1], a[0])) / kk,
                ]
            };
            for c in 0..3 {
                chi.set(3 * row + c, m, out[c]);
            }
        }
    }
    Ok(chi.to_field())
}

/// Row-wise helicity analog `int chi_row . alpha_row dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Helicity {
    pub per_row: [f64; 3],
    pub total: f64,
}

pub fn helicity(alpha: &Field) -> Result<Helicity> {
    let chi = vector_potential(alpha)?;
    Ok(helicity_with_potential(&chi, alpha))
}

/// Helicity for a caller-supplied potential (used for gauge checks).
pub fn helicity_with_potential(chi: &Field, alpha: &Field) -> Helicity {
    let vol = alpha.grid().cell_volume();
    let mut per_row = [0.0; 3];
    for (row, h) in per_row.iter_mut().enumerate() {
        let mut s = 0.0;
        for c in 0..3 {
            s += chi
                .comp(3 * row + c)
                .iter()
                .zip(alpha.comp(3 * row + c))
                .map(|(x, y)| x * y)
                .sum::<f64>();
        }
        *h = s * vol;
    }
    Helicity {
        per_row,
        total: per_row.iter().sum(),
    }
}

/// `int 1/2 (|v|^2 + |alpha|^2) dx` with uniform weights.
pub fn energy(state: &PrimalState) -> f64 {
    let sq = |f: &Field| f.data().iter().map(|x| x * x).sum::<f64>();
    0.5 * (sq(&state.v) + sq(&state.alpha)) * state.grid().cell_volume()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    pub energy: f64,
    pub helicity_per_row: [f64; 3],
    pub helicity_total: f64,
    pub div_v_norm: f64,
    pub div_alpha_norm: f64,
}

impl ConservationReport {
    pub const CSV_HEADER: &'static str =
        "energy,helicity_1,helicity_2,helicity_3,helicity_total,div_v,div_alpha";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.energy,
            self.helicity_per_row[0],
            self.helicity_per_row[1],
            self.helicity_per_row[2],
            self.helicity_total,
            self.div_v_norm,
            self.div_alpha_norm
        )
    }
}

pub fn conservation_report(state: &PrimalState, backend: Backend) -> Result<ConservationReport> {
    state.check_finite()?;
    let h = helicity(&state.alpha)?;
    Ok(ConservationReport {
        energy: energy(state),
        helicity_per_row: h.per_row,
        helicity_total: h.total,
        div_v_norm: grid::div_vector(&state.v, backend)?.max_abs(),
        div_alpha_norm: grid::div_tensor_rowwise(&state.alpha, backend)?.max_abs(),
    })
}

/// Max-norm residuals of each equation of the primal system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualNorms {
    pub momentum: f64,
    pub transport: f64,
    pub div_v: f64,
    pub div_alpha: f64,
}

impl ResidualNorms {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.transport).max(self.div_v).max(self.div_alpha)
    }

    fn merge(&mut self, other: ResidualNorms) {
        self.momentum = self.momentum.max(other.momentum);
        self.transport = self.transport.max(other.transport);
        self.div_v = self.div_v.max(other.div_v);
        self.div_alpha = self.div_alpha.max(other.div_alpha);
    }
}

/// Second-order time derivative of a stored series at level `l`:
/// centered in the interior and one-sided at both ends.
fn time_derivative(series: &[&Field], l: usize, dt: f64) -> Field {
    let last = series.len() - 1;
    // Written in differences so that a constant series gives exact zeros.
    let one_sided = |a: &Field, b: &Field, c: &Field, sign: f64| {
        let mut d = b.lincomb(2.0, a, -2.0);
        d.axpy(-0.5, &c.lincomb(1.0, a, -1.0));
        d.scaled(sign / dt)
    };
    if l == 0 {
        one_sided(series[0], series[1], series[2], 1.0)
    } else if l == last {
        one_sided(series[last], series[last - 1], series[last - 2], -1.0)
    } else {
        series[l + 1].lincomb(0.5 / dt, series[l - 1], -0.5 / dt)
    }
}

/// Residuals of the primal system on a uniformly sampled trajectory.
pub fn primal_residual(
    trajectory: &[PrimalState],
    dt: f64,
    backend: Backend,
) -> Result<ResidualNorms> {
    if trajectory.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "residual needs at least 3 time levels, got {}",
            trajectory.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let vs: Vec<&Field> = trajectory.iter().map(|s| &s.v).collect();
    let alphas: Vec<&Field> = trajectory.iter().map(|s| &s.alpha).collect();
    let mut norms = ResidualNorms::default();
    for (l, state) in trajectory.iter().enumerate() {
        let mut mom = time_derivative(&vs, l, dt);
        mom.axpy(1.0, &grid::div_tensor_rowwise(&momentum_flux(state)?, backend)?);
        let mut tr = time_derivative(&alphas, l, dt);
        tr.axpy(-1.0, &transport_rhs(&state.alpha, &state.v, backend)?);
        norms.merge(ResidualNorms {
            momentum: mom.max_abs(),
            transport: tr.max_abs(),
            div_v: grid::div_vector(&state.v, backend)?.max_abs(),
            div_alpha: grid::div_tensor_rowwise(&state.alpha, backend)?.max_abs(),
        });
    }
    Ok(norms)
}

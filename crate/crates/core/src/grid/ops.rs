use rustfft::num_complex::Complex64;

use super::spectral::{times_ik, ModeTables, Spectrum};
use super::{Backend, Field};
use crate::error::{Error, Result};

const LEVI_CIVITA_TERMS: [(usize, usize, usize, f64); 6] = [
    (0, 1, 2, 1.0),
    (1, 2, 0, 1.0),
    (2, 0, 1, 1.0),
    (0, 2, 1, -1.0),
    (2, 1, 0, -1.0),
    (1, 0, 2, -1.0),
];

/// Central difference along `axis` of one component.
fn fd2_derivative(f: &[f64], n: usize, axis: usize, out: &mut [f64]) {
    let scale = n as f64 / 2.0;
    for i3 in 0..n {
        for i2 in 0..n {
            for i1 in 0..n {
                let idx = |a: usize, b: usize, c: usize| ((c % n) * n + b % n) * n + a % n;
                let (plus, minus) = match axis {
                    0 => (idx(i1 + 1, i2, i3), idx(i1 + n - 1, i2, i3)),
                    1 => (idx(i1, i2 + 1, i3), idx(i1, i2 + n - 1, i3)),
                    _ => (idx(i1, i2, i3 + 1), idx(i1, i2, i3 + n - 1)),
                };
                out[idx(i1, i2, i3)] = (f[plus] - f[minus]) * scale;
            }
        }
    }
}

/// Full gradient of every component: output component `3*c + a` is
/// the derivative of input component `c` along axis `a`.
pub fn gradient(f: &Field, backend: Backend) -> Result<Field> {
    f.check_finite("gradient input")?;
    let grid = f.grid();
    let n = grid.n();
    let np = grid.points();
    let mut out = Field::zeros(grid, 3 * f.components());
    match backend {
        Backend::Fd2 => {
            for c in 0..f.components() {
                for a in 0..3 {
                    fd2_derivative(f.comp(c), n, a, out.comp_mut(3 * c + a));
                }
            }
        }
        Backend::Spectral => {
            let modes = ModeTables::new(grid);
            let spec = Spectrum::of(f);
            let mut dspec = Spectrum::zeros(grid, 3 * f.components());
            for c in 0..f.components() {
                let src = spec.comp(c);
                for a in 0..3 {
                    let dst = dspec.comp_mut(3 * c + a);
                    for m in 0..np {
                        dst[m] = times_ik(modes.kd(m)[a], src[m]);
                    }
                }
            }
            out = dspec.to_field();
        }
    }
    Ok(out)
}

/// Contracts the last (derivative) slot: for input with `3*m` components,
/// output component `c` is the sum over `a` of the derivative along `a` of
/// input component `3*c + a`.
pub fn row_divergence(f: &Field, backend: Backend) -> Result<Field> {
    f.check_finite("divergence input")?;
    if f.components() % 3 != 0 {
        return Err(Error::InvalidArgument(format!(
            "divergence needs a multiple of 3 components, got {}",
            f.components()
        )));
    }
    let grid = f.grid();
    let n = grid.n();
    let np = grid.points();
    let m_out = f.components() / 3;
    match backend {
        Backend::Fd2 => {
            let mut out = Field::zeros(grid, m_out);
            let mut tmp = vec![0.0; np];
            for c in 0..m_out {
                for a in 0..3 {
                    fd2_derivative(f.comp(3 * c + a), n, a, &mut tmp);
                    for (o, t) in out.comp_mut(c).iter_mut().zip(&tmp) {
                        *o += t;
                    }
                }
            }
            Ok(out)
        }
        Backend::Spectral => {
            let modes = ModeTables::new(grid);
            let spec = Spectrum::of(f);
            let mut dspec = Spectrum::zeros(grid, m_out);
            for c in 0..m_out {
                for m in 0..np {
                    let k = modes.kd(m);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (a, &ka) in k.iter().enumerate() {
                        acc += times_ik(ka, spec.at(3 * c + a, m));
                    }
                    dspec.set(c, m, acc);
                }
            }
            Ok(dspec.to_field())
        }
    }
}

pub fn grad_scalar(f: &Field, backend: Backend) -> Result<Field> {
    f.expect_components(1, "grad_scalar")?;
    gradient(f, backend)
}

pub fn div_vector(v: &Field, backend: Backend) -> Result<Field> {
    v.expect_components(3, "div_vector")?;
    row_divergence(v, backend)
}

/// Component `i` is the sum over `j` of the derivative along `j` of `T_ij`.
pub fn div_tensor_rowwise(t: &Field, backend: Backend) -> Result<Field> {
    t.expect_components(9, "div_tensor_rowwise")?;
    row_divergence(t, backend)
}

/// Curl of each row: `out_ip = e_pqr d_q T_ir`.
pub fn curl_rowwise(t: &Field, backend: Backend) -> Result<Field> {
    t.expect_components(9, "curl_rowwise")?;
    let g = gradient(t, backend)?;
    let grid = t.grid();
    let mut out = Field::zeros(grid, 9);
    for i in 0..3 {
        for &(p, q, r, sign) in &LEVI_CIVITA_TERMS {
            // d_q T_ir lives in gradient component 3*(3i + r) + q.
            let src = g.comp(3 * (3 * i + r) + q).to_vec();
            for (o, s) in out.comp_mut(3 * i + p).iter_mut().zip(&src) {
                *o += sign * s;
            }
        }
    }
    Ok(out)
}

/// Orthogonal projection onto divergence-free fields; the mean is kept.
pub fn leray_project(v: &Field, backend: Backend) -> Result<Field> {
    v.expect_components(3, "leray_project")?;
    if backend != Backend::Spectral {
        return Err(Error::UnsupportedBackend(format!(
            "leray projection requires the spectral backend, got {backend}"
        )));
    }
    v.check_finite("leray input")?;
    let grid = v.grid();
    let modes = ModeTables::new(grid);
    let mut spec = Spectrum::of(v);
    project_spectrum(&mut spec, &modes);
    Ok(spec.to_field())
}

/// Removes the longitudinal part of a 3-component spectrum in place.
pub(crate) fn project_spectrum(spec: &mut Spectrum, modes: &ModeTables) {
    for m in 0..spec.grid().points() {
        let k = modes.kd(m);
        let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if kk == 0.0 {
            continue;
        }
        let u = [spec.at(0, m), spec.at(1, m), spec.at(2, m)];
        let kdotu = (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]) / kk;
        for a in 0..3 {
            spec.set(a, m, u[a] - kdotu * k[a]);
        }
    }
}

/// Spectral Laplacian of every component.
pub fn laplacian(f: &Field) -> Result<Field> {
    f.check_finite("laplacian input")?;
    let grid = f.grid();
    let modes = ModeTables::new(grid);
    let mut spec = Spectrum::of(f);
    for c in 0..f.components() {
        let comp = spec.comp_mut(c);
        for (m, z) in comp.iter_mut().enumerate() {
            *z *= -modes.k2(m);
        }
    }
    Ok(spec.to_field())
}

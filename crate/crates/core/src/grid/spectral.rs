//! 3-D FFT plans and per-mode multipliers.
//!
//! Transforms are complex-to-complex over the full cube. Odd derivative
//! multipliers vanish on the Nyquist index of even-sized axes, so the
//! discrete derivative matrices are real and skew-symmetric.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, PeriodicGrid};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Shared plans for an `n`-point axis.
pub fn plans(n: usize) -> Arc<Fft3> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft3 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl Fft3 {
    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut tmp = vec![Complex64::new(0.0, 0.0); buf.len()];

        // x1 lines are contiguous.
        fft.process_with_scratch(buf, &mut scratch);

        // x2 lines: gather to contiguous, transform, scatter.
        for i3 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    tmp[(i3 * n + i1) * n + i2] = buf[(i3 * n + i2) * n + i1];
                }
            }
        }
        fft.process_with_scratch(&mut tmp, &mut scratch);
        for i3 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    buf[(i3 * n + i2) * n + i1] = tmp[(i3 * n + i1) * n + i2];
                }
            }
        }

        // x3 lines.
        for i2 in 0..n {
            for i1 in 0..n {
                for i3 in 0..n {
                    tmp[(i2 * n + i1) * n + i3] = buf[(i3 * n + i2) * n + i1];
                }
            }
        }
        fft.process_with_scratch(&mut tmp, &mut scratch);
        for i2 in 0..n {
            for i1 in 0..n {
                for i3 in 0..n {
                    buf[(i3 * n + i2) * n + i1] = tmp[(i2 * n + i1) * n + i3];
                }
            }
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spectrum, true);
        let norm = 1.0 / (self.n * self.n * self.n) as f64;
        spectrum.iter().map(|z| z.re * norm).collect()
    }
}

/// Signed integer wavenumber of FFT index `idx` on an `n`-point axis.
#[inline]
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < (n + 1) / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

#[inline]
pub fn is_nyquist(idx: usize, n: usize) -> bool {
    n % 2 == 0 && idx == n / 2
}

/// Multiplier of the first derivative along one axis, without the factor i.
#[inline]
pub fn derivative_factor(idx: usize, n: usize) -> f64 {
    if is_nyquist(idx, n) {
        0.0
    } else {
        2.0 * PI * wavenumber(idx, n) as f64
    }
}

/// Per-mode tables for one grid size.
pub struct ModeTables {
    n: usize,
    /// Derivative factor per axis index (Nyquist zeroed).
    kd: Vec<f64>,
    /// Full angular wavenumber per axis index, used by the Laplacian.
    kf: Vec<f64>,
    /// 2/3-rule keep flag per axis index.
    keep: Vec<bool>,
}

impl ModeTables {
    pub fn new(grid: PeriodicGrid) -> Self {
        let n = grid.n();
        Self {
            n,
            kd: (0..n).map(|i| derivative_factor(i, n)).collect(),
            kf: (0..n)
                .map(|i| 2.0 * PI * wavenumber(i, n) as f64)
                .collect(),
            keep: (0..n).map(|i| (3 * wavenumber(i, n).unsigned_abs() as usize) < n).collect(),
        }
    }

    #[inline]
    pub fn modes(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    fn split(&self, m: usize) -> [usize; 3] {
        let n = self.n;
        [m % n, (m / n) % n, m / (n * n)]
    }

    /// Derivative wave vector of flat mode index `m`.
    #[inline]
    pub fn kd(&self, m: usize) -> [f64; 3] {
        let [a, b, c] = self.split(m);
        [self.kd[a], self.kd[b], self.kd[c]]
    }

    /// |k|^2 with the full wavenumbers (Laplacian symbol is -|k|^2).
    #[inline]
    pub fn k2(&self, m: usize) -> f64 {
        let [a, b, c] = self.split(m);
        self.kf[a] * self.kf[a] + self.kf[b] * self.kf[b] + self.kf[c] * self.kf[c]
    }

    /// Whether mode `m` survives 2/3-rule truncation.
    #[inline]
    pub fn dealias_keep(&self, m: usize) -> bool {
        let [a, b, c] = self.split(m);
        self.keep[a] && self.keep[b] && self.keep[c]
    }
}

/// Complex spectrum of a multi-component field.
#[derive(Clone)]
pub struct Spectrum {
    grid: PeriodicGrid,
    components: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: PeriodicGrid, components: usize) -> Self {
        Self {
            grid,
            components,
            data: vec![Complex64::new(0.0, 0.0); components * grid.points()],
        }
    }

    pub fn of(field: &Field) -> Self {
        let grid = field.grid();
        let fft = plans(grid.n());
        let parts: Vec<Vec<Complex64>> = (0..field.components())
            .into_par_iter()
            .map(|c| fft.forward_real(field.comp(c)))
            .collect();
        let data = parts.concat();
        Self {
            grid,
            components: field.components(),
            data,
        }
    }

    pub fn to_field(&self) -> Field {
        let fft = plans(self.grid.n());
        let np = self.grid.points();
        let parts: Vec<Vec<f64>> = self
            .data
            .par_chunks(np)
            .map(|chunk| fft.inverse_real(chunk.to_vec()))
            .collect();
        let data = parts.concat();
        Field::from_vec(self.grid, self.components, data).expect("consistent spectrum shape")
    }

    #[inline]
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[Complex64] {
        let np = self.grid.points();
        &self.data[c * np..(c + 1) * np]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let np = self.grid.points();
        &mut self.data[c * np..(c + 1) * np]
    }

    #[inline]
    pub fn at(&self, c: usize, m: usize) -> Complex64 {
        self.data[c * self.grid.points() + m]
    }

    #[inline]
    pub fn set(&mut self, c: usize, m: usize, z: Complex64) {
        let np = self.grid.points();
        self.data[c * np + m] = z;
    }

    /// Zeroes every mode outside the 2/3-rule band.
    pub fn dealias(&mut self, modes: &ModeTables) {
        let np = self.grid.points();
        for c in 0..self.components {
            for m in 0..np {
                if !modes.dealias_keep(m) {
                    self.data[c * np + m] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

/// i * k * z for a real derivative factor k.
#[inline]
pub fn times_ik(k: f64, z: Complex64) -> Complex64 {
    Complex64::new(-k * z.im, k * z.re)
}

//! Shared helpers for the integration tests, including a self-contained
//! vector-form MHD integrator used as an independent reference.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use ifdm::dual::{DualState, SpaceTimeLattice, LEVEL_COMPONENTS};
use ifdm::{Field, PeriodicGrid};

pub fn random_dual(lattice: &SpaceTimeLattice, rng: &mut impl Rng, amp: f64) -> DualState {
    let levels = (0..=lattice.nt())
        .map(|_| {
            let data = (0..LEVEL_COMPONENTS * lattice.grid().points())
                .map(|_| rng.gen_range(-amp..amp))
                .collect();
            Field::from_vec(lattice.grid(), LEVEL_COMPONENTS, data).unwrap()
        })
        .collect();
    DualState::from_levels(lattice, levels).unwrap()
}

/// Periodic scalar array on n^3 points, x1 fastest.
type Scalar = Vec<Complex64>;

fn fft3(data: &mut Scalar, n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let strides = [1, n, n * n];
    for &stride in &strides {
        for base in 0..n * n * n {
            // Visit each line once, from its first element.
            if (base / stride) % n != 0 {
                continue;
            }
            for (t, x) in line.iter_mut().enumerate() {
                *x = data[base + t * stride];
            }
            fft.process(&mut line);
            for (t, x) in line.iter().enumerate() {
                data[base + t * stride] = *x;
            }
        }
    }
    if inverse {
        let s = 1.0 / (n * n * n) as f64;
        for x in data.iter_mut() {
            *x *= s;
        }
    }
}

fn signed(idx: usize, n: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Derivative wavenumbers with the Nyquist mode removed.
fn kvec(m: usize, n: usize) -> [f64; 3] {
    let idx = [m % n, (m / n) % n, m / (n * n)];
    idx.map(|i| if 2 * i == n { 0.0 } else { 2.0 * PI * signed(i, n) as f64 })
}

fn kept(m: usize, n: usize) -> bool {
    let idx = [m % n, (m / n) % n, m / (n * n)];
    idx.iter().all(|&i| 3 * signed(i, n).unsigned_abs() < n as u64)
}

struct Mhd {
    n: usize,
}

impl Mhd {
    fn to_spec(&self, f: &[f64]) -> Scalar {
        let mut s: Scalar = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft3(&mut s, self.n, false);
        s
    }

    fn to_phys(&self, mut s: Scalar) -> Vec<f64> {
        fft3(&mut s, self.n, true);
        s.into_iter().map(|z| z.re).collect()
    }

    fn truncate(&self, s: &mut Scalar) {
        for (m, z) in s.iter_mut().enumerate() {
            if !kept(m, self.n) {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn smooth(&self, f: &[f64]) -> Vec<f64> {
        let mut s = self.to_spec(f);
        self.truncate(&mut s);
        self.to_phys(s)
    }

    /// `(dv/dt, dB/dt)` for `v_t + div(v v - B B) + grad p = 0`,
    /// `B_t = curl(v x B)`, with 2/3-rule dealiased products.
    fn rhs(&self, v: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
        let n = self.n;
        let np = n * n * n;
        let v: [Vec<f64>; 3] = std::array::from_fn(|i| self.smooth(&v[i]));
        let b: [Vec<f64>; 3] = std::array::from_fn(|i| self.smooth(&b[i]));
        let mut flux = vec![vec![Complex64::new(0.0, 0.0); np]; 9];
        for i in 0..3 {
            for j in 0..3 {
                let f: Vec<f64> = (0..np).map(|p| v[i][p] * v[j][p] - b[i][p] * b[j][p]).collect();
                flux[3 * i + j] = self.to_spec(&f);
                self.truncate(&mut flux[3 * i + j]);
            }
        }
        // E = B x v, so that dB/dt = -curl E.
        let e: Vec<Scalar> = (0..3)
            .map(|c| {
                let (q, r) = ((c + 1) % 3, (c + 2) % 3);
                let f: Vec<f64> = (0..np).map(|p| b[q][p] * v[r][p] - b[r][p] * v[q][p]).collect();
                let mut s = self.to_spec(&f);
                self.truncate(&mut s);
                s
            })
            .collect();
        let i_unit = Complex64::new(0.0, 1.0);
        let mut dv = vec![vec![Complex64::new(0.0, 0.0); np]; 3];
        let mut db = vec![vec![Complex64::new(0.0, 0.0); np]; 3];
        for m in 0..np {
            let k = kvec(m, n);
            let mut w = [Complex64::new(0.0, 0.0); 3];
            for i in 0..3 {
                for j in 0..3 {
                    w[i] -= i_unit * k[j] * flux[3 * i + j][m];
                }
            }
            let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if kk > 0.0 {
                let kw = (w[0] * k[0] + w[1] * k[1] + w[2] * k[2]) / kk;
                for i in 0..3 {
                    w[i] -= kw * k[i];
                }
            }
            for i in 0..3 {
                dv[i][m] = w[i];
                let (q, r) = ((i + 1) % 3, (i + 2) % 3);
                db[i][m] = -(i_unit * k[q] * e[r][m] - i_unit * k[r] * e[q][m]);
            }
        }
        let dv = dv.try_into().unwrap();
        let db: [Scalar; 3] = db.try_into().unwrap();
        let dv: [Scalar; 3] = dv;
        (dv.map(|s| self.to_phys(s)), db.map(|s| self.to_phys(s)))
    }

    fn longitudinal_removed(&self, v: [Vec<f64>; 3]) -> [Vec<f64>; 3] {
        let n = self.n;
        let s: Vec<Scalar> = v.iter().map(|c| self.to_spec(c)).collect();
        let mut l = vec![vec![Complex64::new(0.0, 0.0); n * n * n]; 3];
        for m in 0..n * n * n {
            let k = kvec(m, n);
            let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if kk == 0.0 {
                continue;
            }
            let kw = (s[0][m] * k[0] + s[1][m] * k[1] + s[2][m] * k[2]) / kk;
            for a in 0..3 {
                l[a][m] = kw * k[a];
            }
        }
        let mut out = v;
        for a in 0..3 {
            let la = self.to_phys(std::mem::take(&mut l[a]));
            for (x, y) in out[a].iter_mut().zip(&la) {
                *x -= y;
            }
        }
        out
    }
}

fn axpy3(x: &[Vec<f64>; 3], h: f64, k: &[Vec<f64>; 3]) -> [Vec<f64>; 3] {
    std::array::from_fn(|c| x[c].iter().zip(&k[c]).map(|(a, b)| a + h * b).collect())
}

/// One classical RK4 step of vector-form ideal MHD.
pub fn mhd_rk4_step(v: &Field, b: &Field, dt: f64) -> (Field, Field) {
    let grid: PeriodicGrid = v.grid();
    let solver = Mhd { n: grid.n() };
    let v0: [Vec<f64>; 3] = std::array::from_fn(|c| v.comp(c).to_vec());
    let b0: [Vec<f64>; 3] = std::array::from_fn(|c| b.comp(c).to_vec());
    let k1 = solver.rhs(&v0, &b0);
    let k2 = solver.rhs(&axpy3(&v0, 0.5 * dt, &k1.0), &axpy3(&b0, 0.5 * dt, &k1.1));
    let k3 = solver.rhs(&axpy3(&v0, 0.5 * dt, &k2.0), &axpy3(&b0, 0.5 * dt, &k2.1));
    let k4 = solver.rhs(&axpy3(&v0, dt, &k3.0), &axpy3(&b0, dt, &k3.1));
    let combine = |x: &[Vec<f64>; 3], ks: [&[Vec<f64>; 3]; 4]| -> [Vec<f64>; 3] {
        std::array::from_fn(|c| {
            (0..x[c].len())
                .map(|p| x[c][p] + dt / 6.0 * (ks[0][c][p] + 2.0 * ks[1][c][p] + 2.0 * ks[2][c][p] + ks[3][c][p]))
                .collect()
        })
    };
    let v1 = solver.longitudinal_removed(combine(&v0, [&k1.0, &k2.0, &k3.0, &k4.0]));
    let b1 = combine(&b0, [&k1.1, &k2.1, &k3.1, &k4.1]);
    let pack = |x: [Vec<f64>; 3]| Field::from_vec(grid, 3, x.concat()).unwrap();
    (pack(v1), pack(b1))
}

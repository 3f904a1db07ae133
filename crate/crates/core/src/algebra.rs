//! Constant tables of the packed Lagrangian
//!
//! `L = U.M D + 1/2 D.B:(U x U) + 1/2 (U - Ub).a (U - Ub)`
//!
//! for the ideal FDM system, together with the per-point matrix
//! `K = a + D.B` and the envelope derivative `dL/dD`.
//!
//! Slot layout (0-based here; docs elsewhere use 1-based tensor indices):
//!
//! * `U`: `v_i` at `i`, `alpha_ij` at `3 + 3i + j`, `p` at 12.
//! * `D`: `dt lambda_i` at `i`; `G_ij = d_j lambda_i` at `3 + 3i + j`;
//!   `d_i mu` at `12 + i`; `dt A_ij` at `15 + 3i + j`;
//!   `H_ijr = d_r A_ij` at `24 + 9i + 3j + r`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const U_LEN: usize = 13;
pub const D_LEN: usize = 51;

pub type PackedU = [f64; U_LEN];
pub type PackedD = [f64; D_LEN];
pub type Mat13 = [[f64; U_LEN]; U_LEN];

/// Slot indices of the packed vectors.
pub mod slot {
    #[inline]
    pub const fn v(i: usize) -> usize {
        i
    }
    #[inline]
    pub const fn alpha(i: usize, j: usize) -> usize {
        3 + 3 * i + j
    }
    pub const P: usize = 12;

    #[inline]
    pub const fn dt_lambda(i: usize) -> usize {
        i
    }
    /// `G_ij = d_j lambda_i`.
    #[inline]
    pub const fn grad_lambda(i: usize, j: usize) -> usize {
        3 + 3 * i + j
    }
    #[inline]
    pub const fn grad_mu(i: usize) -> usize {
        12 + i
    }
    #[inline]
    pub const fn dt_a(i: usize, j: usize) -> usize {
        15 + 3 * i + j
    }
    /// `H_ijr = d_r A_ij`.
    #[inline]
    pub const fn grad_a(i: usize, j: usize, r: usize) -> usize {
        24 + 9 * i + 3 * j + r
    }

    /// Human-readable name of a `U` slot, 1-based tensor indices.
    pub fn u_label(s: usize) -> String {
        match s {
            0..=2 => format!("v{}", s + 1),
            3..=11 => format!("alpha{}{}", (s - 3) / 3 + 1, (s - 3) % 3 + 1),
            12 => "p".into(),
            _ => format!("?{s}"),
        }
    }

    /// Human-readable name of a `D` slot, 1-based tensor indices.
    pub fn d_label(s: usize) -> String {
        match s {
            0..=2 => format!("dt_lambda{}", s + 1),
            3..=11 => format!("G{}{}", (s - 3) / 3 + 1, (s - 3) % 3 + 1),
            12..=14 => format!("grad_mu{}", s - 11),
            15..=23 => format!("dt_A{}{}", (s - 15) / 3 + 1, (s - 15) % 3 + 1),
            24..=50 => {
                let t = s - 24;
                format!("H{}{}{}", t / 9 + 1, (t / 3) % 3 + 1, t % 3 + 1)
            }
            _ => format!("?{s}"),
        }
    }
}

/// Alternating symbol `e_ijk`.
#[inline]
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Diagonal constants of the quadratic auxiliary potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub a_v: f64,
    pub a_alpha: f64,
    pub a_p: f64,
}

impl Default for Penalty {
    fn default() -> Self {
        Self::uniform(100.0)
    }
}

impl Penalty {
    pub fn uniform(a: f64) -> Self {
        Self {
            a_v: a,
            a_alpha: a,
            a_p: a,
        }
    }

    pub fn diag(&self) -> PackedU {
        let mut d = [self.a_alpha; U_LEN];
        d[0..3].fill(self.a_v);
        d[slot::P] = self.a_p;
        d
    }

    pub fn max(&self) -> f64 {
        self.a_v.max(self.a_alpha).max(self.a_p)
    }

    pub fn is_valid(&self) -> bool {
        [self.a_v, self.a_alpha, self.a_p]
            .iter()
            .all(|a| a.is_finite() && *a > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MEntry {
    pub u: usize,
    pub d: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BEntry {
    pub d: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Sparse constant tables, immutable after assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTables {
    m: Vec<MEntry>,
    b: Vec<BEntry>,
}

impl Default for OperatorTables {
    fn default() -> Self {
        Self::assemble()
    }
}

impl OperatorTables {
    pub fn assemble() -> Self {
        Self {
            m: assemble_m(),
            b: assemble_b(),
        }
    }

    pub fn m_entries(&self) -> &[MEntry] {
        &self.m
    }

    pub fn b_entries(&self) -> &[BEntry] {
        &self.b
    }

    pub fn m(&self, u: usize, d: usize) -> f64 {
        self.m
            .iter()
            .filter(|e| e.u == u && e.d == d)
            .map(|e| e.value)
            .sum()
    }

    pub fn b(&self, d: usize, j: usize, k: usize) -> f64 {
        self.b
            .iter()
            .filter(|e| e.d == d && e.j == j && e.k == k)
            .map(|e| e.value)
            .sum()
    }

    /// Copy with one `B` entry shifted by `delta` (both symmetric slots).
    /// Fault-injection hook for the check suites.
    pub fn corrupted(&self, d: usize, j: usize, k: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.b.push(BEntry { d, j, k, value: delta });
        if j != k {
            out.b.push(BEntry {
                d,
                j: k,
                k: j,
                value: delta,
            });
        }
        out
    }

    /// `U.M D`.
    pub fn linear_part(&self, u: &PackedU, d: &PackedD) -> f64 {
        self.m.iter().map(|e| u[e.u] * e.value * d[e.d]).sum()
    }

    /// `1/2 D.B:(x (x) y)`.
    pub fn quadratic_part(&self, d: &PackedD, x: &PackedU, y: &PackedU) -> f64 {
        0.5 * self
            .b
            .iter()
            .map(|e| d[e.d] * e.value * x[e.j] * y[e.k])
            .sum::<f64>()
    }

    pub fn lagrangian(&self, u: &PackedU, d: &PackedD, ubar: &PackedU, a: &Penalty) -> f64 {
        self.linear_part(u, d) + self.quadratic_part(d, u, u) + penalty_energy(u, ubar, a)
    }

    /// `K_IJ = a_IJ + D_G B_GIJ`.
    pub fn k_at(&self, d: &PackedD, a: &Penalty) -> Mat13 {
        let mut k = [[0.0; U_LEN]; U_LEN];
        for (i, ai) in a.diag().iter().enumerate() {
            k[i][i] = *ai;
        }
        for e in &self.b {
            k[e.j][e.k] += d[e.d] * e.value;
        }
        k
    }

    /// Right side of the mapping system, `-(M_IG + B_GIK Ub_K) D_G`.
    pub fn mapping_rhs(&self, d: &PackedD, ubar: &PackedU) -> PackedU {
        let mut r = [0.0; U_LEN];
        for e in &self.m {
            r[e.u] -= e.value * d[e.d];
        }
        for e in &self.b {
            r[e.j] -= d[e.d] * e.value * ubar[e.k];
        }
        r
    }

    /// `N_IG = M_IG + B_GIK Ub_K`, dense 13 x 51.
    pub fn coupling(&self, ubar: &PackedU) -> [[f64; D_LEN]; U_LEN] {
        let mut n = [[0.0; D_LEN]; U_LEN];
        for e in &self.m {
            n[e.u][e.d] += e.value;
        }
        for e in &self.b {
            n[e.j][e.d] += e.value * ubar[e.k];
        }
        n
    }

    /// Envelope derivative `dL/dD_G = U_I M_IG + 1/2 B_GJK U_J U_K` at fixed `U`.
    pub fn envelope(&self, u: &PackedU) -> PackedD {
        let mut g = [0.0; D_LEN];
        for e in &self.m {
            g[e.d] += u[e.u] * e.value;
        }
        for e in &self.b {
            g[e.d] += 0.5 * e.value * u[e.j] * u[e.k];
        }
        g
    }
}

/// `1/2 (U - Ub).a (U - Ub)`.
pub fn penalty_energy(u: &PackedU, ubar: &PackedU, a: &Penalty) -> f64 {
    let diag = a.diag();
    0.5 * (0..U_LEN)
        .map(|i| diag[i] * (u[i] - ubar[i]).powi(2))
        .sum::<f64>()
}

fn assemble_m() -> Vec<MEntry> {
    let mut m = Vec::with_capacity(18);
    for i in 0..3 {
        m.push(MEntry {
            u: slot::v(i),
            d: slot::dt_lambda(i),
            value: -1.0,
        });
        m.push(MEntry {
            u: slot::v(i),
            d: slot::grad_mu(i),
            value: -1.0,
        });
        m.push(MEntry {
            u: slot::P,
            d: slot::grad_lambda(i, i),
            value: -1.0,
        });
        for j in 0..3 {
            m.push(MEntry {
                u: slot::alpha(i, j),
                d: slot::dt_a(i, j),
                value: -1.0,
            });
        }
    }
    m
}

fn assemble_b() -> Vec<BEntry> {
    let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    let mut add = |g: usize, j: usize, k: usize, v: f64| {
        *acc.entry((g, j, k)).or_insert(0.0) += v;
        *acc.entry((g, k, j)).or_insert(0.0) += v;
    };
    for i in 0..3 {
        for j in 0..3 {
            let g = slot::grad_lambda(i, j);
            add(g, slot::v(i), slot::v(j), -1.0);
            for k in 0..3 {
                add(g, slot::alpha(k, i), slot::alpha(k, j), 1.0);
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for r in 0..3 {
                for m in 0..3 {
                    for s in 0..3 {
                        let c: f64 = -(0..3)
                            .map(|p| levi_civita(p, j, r) * levi_civita(p, m, s))
                            .sum::<f64>();
                        if c != 0.0 {
                            add(slot::grad_a(i, j, r), slot::alpha(i, m), slot::v(s), c);
                        }
                    }
                }
            }
        }
    }
    acc.into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|((d, j, k), value)| BEntry { d, j, k, value })
        .collect()
}

/// Unpacked view of a primal point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrimalPoint {
    pub v: [f64; 3],
    pub alpha: [[f64; 3]; 3],
    pub p: f64,
}

impl PrimalPoint {
    pub fn pack(&self) -> PackedU {
        let mut u = [0.0; U_LEN];
        u[0..3].copy_from_slice(&self.v);
        for i in 0..3 {
            for j in 0..3 {
                u[slot::alpha(i, j)] = self.alpha[i][j];
            }
        }
        u[slot::P] = self.p;
        u
    }

    pub fn unpack(u: &PackedU) -> Self {
        let mut alpha = [[0.0; 3]; 3];
        for (i, row) in alpha.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = u[slot::alpha(i, j)];
            }
        }
        Self {
            v: [u[0], u[1], u[2]],
            alpha,
            p: u[slot::P],
        }
    }
}

/// Unpacked view of the dual derivative vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualPoint {
    pub dt_lambda: [f64; 3],
    /// `grad_lambda[i][j] = d_j lambda_i`.
    pub grad_lambda: [[f64; 3]; 3],
    pub grad_mu: [f64; 3],
    pub dt_a: [[f64; 3]; 3],
    /// `grad_a[i][j][r] = d_r A_ij`.
    pub grad_a: [[[f64; 3]; 3]; 3],
}

impl DualPoint {
    pub fn pack(&self) -> PackedD {
        let mut d = [0.0; D_LEN];
        for i in 0..3 {
            d[slot::dt_lambda(i)] = self.dt_lambda[i];
            d[slot::grad_mu(i)] = self.grad_mu[i];
            for j in 0..3 {
                d[slot::grad_lambda(i, j)] = self.grad_lambda[i][j];
                d[slot::dt_a(i, j)] = self.dt_a[i][j];
                for r in 0..3 {
                    d[slot::grad_a(i, j, r)] = self.grad_a[i][j][r];
                }
            }
        }
        d
    }

    pub fn unpack(d: &PackedD) -> Self {
        let mut out = Self::default();
        for i in 0..3 {
            out.dt_lambda[i] = d[slot::dt_lambda(i)];
            out.grad_mu[i] = d[slot::grad_mu(i)];
            for j in 0..3 {
                out.grad_lambda[i][j] = d[slot::grad_lambda(i, j)];
                out.dt_a[i][j] = d[slot::dt_a(i, j)];
                for r in 0..3 {
                    out.grad_a[i][j][r] = d[slot::grad_a(i, j, r)];
                }
            }
        }
        out
    }
}

/// The Lagrangian summed term by term from the PDE, independent of the tables.
pub fn lagrangian_direct(u: &PackedU, d: &PackedD, ubar: &PackedU, a: &Penalty) -> f64 {
    let up = PrimalPoint::unpack(u);
    let dp = DualPoint::unpack(d);
    let (v, al, p) = (up.v, up.alpha, up.p);
    let mut l = 0.0;
    for i in 0..3 {
        l -= v[i] * dp.dt_lambda[i];
        l -= v[i] * dp.grad_mu[i];
        for j in 0..3 {
            let mut flux = v[i] * v[j];
            for row in al.iter() {
                flux -= row[i] * row[j];
            }
            if i == j {
                flux += p;
            }
            l -= flux * dp.grad_lambda[i][j];
            l -= al[i][j] * dp.dt_a[i][j];
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            for r in 0..3 {
                let mut s = 0.0;
                for pp in 0..3 {
                    for m in 0..3 {
                        for q in 0..3 {
                            s += levi_civita(pp, j, r) * levi_civita(pp, m, q) * al[i][m] * v[q];
                        }
                    }
                }
                l -= s * dp.grad_a[i][j][r];
            }
        }
    }
    l + penalty_energy(u, ubar, a)
}

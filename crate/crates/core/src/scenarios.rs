//! Initial and base states: exact constant and Alfvén solutions, seeded smooth
//! random fields, and the MHD row embedding.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, Backend, Field, PeriodicGrid};
use crate::primal::{embed_mhd, PrimalState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Constant,
    BeltramiAlfven,
    RandomSmooth,
    MhdEmbed,
    FromFile,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::Constant,
        ScenarioName::BeltramiAlfven,
        ScenarioName::RandomSmooth,
        ScenarioName::MhdEmbed,
        ScenarioName::FromFile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Constant => "constant",
            ScenarioName::BeltramiAlfven => "beltrami_alfven",
            ScenarioName::RandomSmooth => "random_smooth",
            ScenarioName::MhdEmbed => "mhd_embed",
            ScenarioName::FromFile => "from_file",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// Uniform flow `v = (1, 0, 0)`, `alpha = 0`, `p = 0`.
pub fn constant(grid: PeriodicGrid) -> PrimalState {
    let mut u = [0.0; 13];
    u[0] = 1.0;
    PrimalState::constant(grid, &u)
}

/// `B = (sin 2 pi z, cos 2 pi z, 0)`, with `curl B = 2 pi B`.
pub fn beltrami(grid: PeriodicGrid) -> Field {
    Field::from_fn(grid, 3, |c, [_, _, z]| match c {
        0 => (2.0 * PI * z).sin(),
        1 => (2.0 * PI * z).cos(),
        _ => 0.0,
    })
}

/// Stationary state `v = B`, `alpha` = B in row 1, constant zero pressure.
pub fn beltrami_alfven(grid: PeriodicGrid) -> PrimalState {
    let b = beltrami(grid);
    let alpha = embed_mhd(&b, 1).expect("3-component field");
    PrimalState::new(b, alpha, Field::zeros(grid, 1)).expect("consistent shapes")
}

/// Solenoidal zero-mean random vector field built from Fourier modes with
/// `|k|^2 <= kmax^2`, scaled to max pointwise norm `amplitude`.
pub fn random_solenoidal(grid: PeriodicGrid, rng: &mut impl Rng, kmax: i64, amplitude: f64) -> Field {
    let mut modes = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            for k3 in -kmax..=kmax {
                let kk = k1 * k1 + k2 * k2 + k3 * k3;
                if kk > 0 && kk <= kmax * kmax {
                    let c: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                    modes.push(([k1 as f64, k2 as f64, k3 as f64], c));
                }
            }
        }
    }
    let raw = Field::from_fn(grid, 3, |c, [x, y, z]| {
        modes
            .iter()
            .map(|(k, a)| {
                let ph = 2.0 * PI * (k[0] * x + k[1] * y + k[2] * z);
                a[c] * ph.cos() + a[3 + c] * ph.sin()
            })
            .sum()
    });
    let mut v = grid::leray_project(&raw, Backend::Spectral).expect("finite field");
    for c in 0..3 {
        let m = v.mean(c);
        for x in v.comp_mut(c) {
            *x -= m;
        }
    }
    let norm = v.max_pointwise_norm();
    if norm > 0.0 {
        v.scale(amplitude / norm);
    }
    v
}

/// Smooth random state with solenoidal velocity and solenoidal, zero-mean
/// rows of alpha; pressure reconstructed by the caller if needed.
pub fn random_smooth(grid: PeriodicGrid, seed: u64) -> PrimalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_solenoidal(grid, &mut rng, 2, 0.5);
    let rows: Vec<Field> = (0..3).map(|_| random_solenoidal(grid, &mut rng, 2, 0.3)).collect();
    let alpha = Field::stack(&[&rows[0], &rows[1], &rows[2]]).expect("same grid");
    PrimalState::new(v, alpha, Field::zeros(grid, 1)).expect("consistent shapes")
}

/// Random solenoidal velocity and magnetic field, the latter as row 1.
pub fn mhd_embed(grid: PeriodicGrid, seed: u64) -> PrimalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_solenoidal(grid, &mut rng, 2, 0.5);
    let b = random_solenoidal(grid, &mut rng, 2, 0.5);
    let alpha = embed_mhd(&b, 1).expect("3-component field");
    PrimalState::new(v, alpha, Field::zeros(grid, 1)).expect("consistent shapes")
}

/// `state` plus a smooth solenoidal perturbation of max size `eps` in v and
/// in each row of alpha.
pub fn perturbed(state: &PrimalState, seed: u64, eps: f64) -> PrimalState {
    let grid = state.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = state.clone();
    out.v.axpy(1.0, &random_solenoidal(grid, &mut rng, 1, eps));
    for row in 0..3 {
        let d = random_solenoidal(grid, &mut rng, 1, eps);
        for c in 0..3 {
            let src = d.comp(c).to_vec();
            for (x, y) in out.alpha.comp_mut(3 * row + c).iter_mut().zip(&src) {
                *x += y;
            }
        }
    }
    out
}

/// Named built-in scenario (all but `from_file`).
pub fn builtin(name: ScenarioName, grid: PeriodicGrid, seed: u64) -> Result<PrimalState> {
    match name {
        ScenarioName::Constant => Ok(constant(grid)),
        ScenarioName::BeltramiAlfven => Ok(beltrami_alfven(grid)),
        ScenarioName::RandomSmooth => Ok(random_smooth(grid, seed)),
        ScenarioName::MhdEmbed => Ok(mhd_embed(grid, seed)),
        ScenarioName::FromFile => Err(Error::InvalidArgument(
            "scenario 'from_file' needs a path".into(),
        )),
    }
}

//! Acceptance criteria 1 to 9, one PASS/FAIL line each.
//!
//! Runs as a plain binary so the summary lines are always printed.

mod support;

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ifdm::algebra::{lagrangian_direct, slot, OperatorTables, PackedD, PackedU, Penalty, D_LEN, U_LEN};
use ifdm::dtp;
use ifdm::dual::{maximize, DualProblem, DualState, MaximizeConfig, SpaceTimeLattice, FINAL_FIXED, LEVEL_COMPONENTS};
use ifdm::integrator::{integrate, step_rk4, IntegratorConfig};
use ifdm::primal::{self, embed_mhd, extract_row, PrimalState};
use ifdm::{grid, scenarios, Backend, Error, Field, PeriodicGrid};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_u(rng: &mut impl Rng) -> PackedU {
    std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
}

fn random_d(rng: &mut impl Rng, amp: f64) -> PackedD {
    std::array::from_fn(|_| rng.gen_range(-amp..amp))
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn lattice(n: usize, nt: usize, t: f64) -> SpaceTimeLattice {
    SpaceTimeLattice::new(PeriodicGrid::new(n).unwrap(), nt, t).unwrap()
}

/// Random smooth interval bases with a nonzero pressure and initial data
/// that differ from the first base state.
fn random_problem(lat: SpaceTimeLattice, seed: u64) -> DualProblem {
    let grid = lat.grid();
    let base: Vec<PrimalState> = (0..lat.nt())
        .map(|k| {
            let mut s = scenarios::random_smooth(grid, seed + k as u64);
            s.p = Field::from_fn(grid, 1, |_, [x, y, z]| 0.3 * (2.0 * PI * (x - y)).sin() + 0.1 * (2.0 * PI * z).cos());
            s
        })
        .collect();
    let v0 = base[0].v.scaled(0.9);
    let alpha0 = base[0].alpha.scaled(1.1);
    DualProblem::from_interval_base(lat, &base, v0, alpha0, Penalty::default(), Backend::Spectral).unwrap()
}

fn static_problem(lat: SpaceTimeLattice, base: &PrimalState, initial: &PrimalState) -> DualProblem {
    DualProblem::from_interval_base(
        lat,
        &vec![base.clone(); lat.nt()],
        initial.v.clone(),
        initial.alpha.clone(),
        Penalty::default(),
        Backend::Spectral,
    )
    .unwrap()
}

fn criterion_1() -> Outcome {
    let clock = Instant::now();
    let grid = PeriodicGrid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut constant_max = 0.0f64;
    for _ in 0..5 {
        let s = PrimalState::constant(grid, &random_u(&mut rng));
        let r = primal::primal_residual(&[s.clone(), s.clone(), s], 0.05, Backend::Spectral).unwrap();
        constant_max = constant_max.max(r.max());
    }
    let alf = scenarios::beltrami_alfven(grid);
    let r = primal::primal_residual(&[alf.clone(), alf.clone(), alf], 0.05, Backend::Spectral).unwrap();
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        constant_max == 0.0 && r.max() <= 1e-10 && secs < 10.0,
        format!("constant residual {constant_max:e} (== 0), Alfven residual {:e} (<= 1e-10), {secs:.2} s (< 10 s)", r.max()),
    )
}

fn criterion_2() -> Outcome {
    let clock = Instant::now();
    let tables = OperatorTables::assemble();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = Penalty::default();
    let mut rel = 0.0f64;
    for _ in 0..10_000 {
        let (u, d, ub) = (random_u(&mut rng), random_d(&mut rng, 1.0), random_u(&mut rng));
        let direct = lagrangian_direct(&u, &d, &ub, &a);
        let packed = tables.lagrangian(&u, &d, &ub, &a);
        rel = rel.max((direct - packed).abs() / direct.abs().max(1.0));
    }
    let mut inv = 0.0f64;
    for _ in 0..10_000 {
        let d = random_d(&mut rng, 1.0);
        let (x, y) = (random_u(&mut rng), random_u(&mut rng));
        let mut lam = d;
        let mut adot = d;
        for i in 0..3 {
            for j in 0..3 {
                if i < j {
                    let e = rng.gen_range(-1.0..1.0);
                    lam[slot::grad_lambda(i, j)] += e;
                    lam[slot::grad_lambda(j, i)] -= e;
                }
                for r in j..3 {
                    let e = rng.gen_range(-1.0..1.0);
                    adot[slot::grad_a(i, j, r)] += e;
                    if r != j {
                        adot[slot::grad_a(i, r, j)] += e;
                    }
                }
            }
        }
        let q = tables.quadratic_part(&d, &x, &y);
        inv = inv
            .max((tables.quadratic_part(&lam, &x, &y) - q).abs())
            .max((tables.quadratic_part(&adot, &x, &y) - q).abs());
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        rel <= 1e-13 && inv <= 1e-14 && secs < 5.0,
        format!("packed vs direct {rel:e} (<= 1e-13), reduction invariance {inv:e} (<= 1e-14), {secs:.2} s (< 5 s)"),
    )
}

fn criterion_3() -> Outcome {
    let tables = OperatorTables::assemble();
    let a = Penalty::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut zero_exact = true;
    let mut back = 0.0f64;
    let mut accepted = 0;
    while accepted < 10_000 {
        let ub = random_u(&mut rng);
        let r0 = dtp::dtp_solve(&tables, &[0.0; D_LEN], &ub, &a).unwrap();
        zero_exact &= r0.u_hat == ub;
        let d = random_d(&mut rng, 4.0);
        let Ok(r) = dtp::dtp_solve(&tables, &d, &ub, &a) else { continue };
        accepted += 1;
        back = back.max(max_abs(&dtp::mapping_gradient(&r.u_hat, &d, &ub, &a)) / max_abs(&d));
    }

    let ub = random_u(&mut rng);
    let mut hand = 0.0f64;
    let g = [0.3, -1.2, 2.5];
    let mut d = [0.0; D_LEN];
    for i in 0..3 {
        d[slot::grad_mu(i)] = g[i];
    }
    let r = dtp::dtp_solve(&tables, &d, &ub, &a).unwrap();
    for s in 0..U_LEN {
        let want = if s < 3 { ub[s] + g[s] / a.a_v } else { ub[s] };
        hand = hand.max((r.u_hat[s] - want).abs());
    }
    let mut d = [0.0; D_LEN];
    let q: [f64; 9] = std::array::from_fn(|t| 0.2 * t as f64 - 0.7);
    for i in 0..3 {
        for j in 0..3 {
            d[slot::dt_a(i, j)] = q[3 * i + j];
        }
    }
    let r = dtp::dtp_solve(&tables, &d, &ub, &a).unwrap();
    for s in 0..U_LEN {
        let want = if (3..12).contains(&s) { ub[s] + q[s - 3] / a.a_alpha } else { ub[s] };
        hand = hand.max((r.u_hat[s] - want).abs());
    }
    let pen = Penalty {
        a_v: 100.0,
        a_alpha: 100.0,
        a_p: 10.0,
    };
    let mut ub = [0.0; U_LEN];
    ub[slot::P] = 1.0;
    let mut d = [0.0; D_LEN];
    d[slot::grad_lambda(0, 0)] = 0.5;
    d[slot::grad_lambda(1, 1)] = 1.0;
    d[slot::grad_lambda(2, 2)] = 0.5;
    let r = dtp::dtp_solve(&tables, &d, &ub, &pen).unwrap();
    hand = hand.max((r.u_hat[slot::P] - 1.2).abs());

    outcome(
        zero_exact && back <= 1e-11 && hand <= 1e-14,
        format!("zero dual exact: {zero_exact}, substitute-back {back:e} x |D| (<= 1e-11), hand cases {hand:e} (<= 1e-14)"),
    )
}

fn criterion_4() -> Outcome {
    let clock = Instant::now();
    let p = random_problem(lattice(4, 4, 0.5), 40);
    let lat = *p.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = support::random_dual(&lat, &mut rng, 0.05);
    let g = p.evaluate(&d).unwrap().gradient.to_flat();
    let x = d.to_flat();
    let gmax = max_abs(&g);
    let np = lat.grid().points();
    let fixed_start = lat.nt() * LEVEL_COMPONENTS * np;
    let fixed_end = fixed_start + FINAL_FIXED * np;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut fixed_ok = true;
    for i in 0..x.len() {
        if (fixed_start..fixed_end).contains(&i) {
            fixed_ok &= g[i] == 0.0;
            continue;
        }
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        let sp = p.objective(&DualState::from_flat(&lat, &xp).unwrap()).unwrap();
        let sm = p.objective(&DualState::from_flat(&lat, &xm).unwrap()).unwrap();
        let fd = (sp - sm) / (2.0 * h);
        let denom = g[i].abs().max(fd.abs()).max(1e-4 * gmax);
        worst = worst.max((g[i] - fd).abs() / denom);
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && fixed_ok && secs < 120.0,
        format!(
            "{} components, max relative error {worst:e} (<= 1e-6), {secs:.1} s (< 120 s)",
            x.len() - FINAL_FIXED * np
        ),
    )
}

fn criterion_5() -> Outcome {
    let c = scenarios::constant(PeriodicGrid::new(8).unwrap());
    let pc = static_problem(lattice(8, 8, 0.5), &c, &c);
    let gc = pc.gradient_at_zero().max_abs();
    let mut alfven = Vec::new();
    for nt in [8, 16] {
        let lat = lattice(16, nt, 0.5);
        let alf = scenarios::beltrami_alfven(lat.grid());
        let p = static_problem(lat, &alf, &alf);
        let g = p.gradient_at_zero();
        alfven.push((g.max_abs(), ifdm::dual::normalized_gradient_norm(&lat, g)));
    }
    let ok = gc <= 1e-13 && alfven.iter().all(|&(_, norm)| norm <= 1e-8);
    outcome(
        ok,
        format!(
            "constant {gc:e} (<= 1e-13); Alfven n=16 normalized |grad S(0)| {:e} at N_t=8, {:e} at N_t=16 (<= 1e-8; raw {:e}, {:e})",
            alfven[0].1, alfven[1].1, alfven[0].0, alfven[1].0
        ),
    )
}

fn criterion_6() -> Outcome {
    let p = random_problem(lattice(4, 3, 0.5), 60);
    let lat = *p.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut midpoint = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    let mut second_scaled = f64::NEG_INFINITY;
    let mut pairs = 0;
    while pairs < 100 {
        let d1 = support::random_dual(&lat, &mut rng, 0.2);
        let d2 = support::random_dual(&lat, &mut rng, 0.2);
        let (Ok(s1), Ok(s2)) = (p.objective(&d1), p.objective(&d2)) else { continue };
        let mid = d1.lincomb(0.5, &d2, 0.5);
        let sm = p.objective(&mid).unwrap();
        let scale = 1.0 + s1.abs().max(s2.abs());
        midpoint = midpoint.max((0.5 * (s1 + s2) - sm) / scale);
        let e = d2.lincomb(1.0, &d1, -1.0);
        let h = 0.1;
        let (Ok(sp), Ok(sn)) = (p.objective(&d1.lincomb(1.0, &e, h)), p.objective(&d1.lincomb(1.0, &e, -h))) else {
            continue;
        };
        let dd = sp - 2.0 * s1 + sn;
        second = second.max(dd);
        second_scaled = second_scaled.max(dd / lat.weight());
        pairs += 1;
    }
    outcome(
        midpoint <= 1e-12 && second <= 1e-12,
        format!(
            "midpoint violation {midpoint:e} x (1+|S|) (<= 1e-12), max second difference {second:e} (<= 1e-12; per unit weight {second_scaled:e})"
        ),
    )
}

fn solve(p: &DualProblem, start: &DualState, max_iter: usize) -> ifdm::dual::DualSolution {
    let cfg = MaximizeConfig {
        tol: 1e-8,
        max_iter,
        ..Default::default()
    };
    match maximize(p, start, &cfg) {
        Ok(s) => s,
        Err(Error::Stagnation { last, .. }) => *last,
        Err(e) => panic!("dual solve failed: {e}"),
    }
}

fn criterion_7() -> Outcome {
    let clock = Instant::now();
    let lat = lattice(8, 8, 0.5);
    let grid = lat.grid();
    let c = scenarios::constant(grid);
    let p = static_problem(lat, &c, &c);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d0 = support::random_dual(&lat, &mut rng, 1e-3);
    let sol = solve(&p, &d0, 500);
    let ext = p.extract_primal(&sol.state).unwrap();
    let err = ext
        .states
        .iter()
        .zip(p.base_states())
        .map(|(a, b)| a.max_diff(&b))
        .fold(0.0, f64::max);

    let alf = scenarios::beltrami_alfven(grid);
    let pert = scenarios::perturbed(&alf, 5, 1e-3);
    let pa = static_problem(lat, &pert, &alf);
    let r0 = pa.residual_of(&pa.base_states()).unwrap().max();
    let sola = solve(&pa, &DualState::zeros(&lat), 500);
    let r1 = pa.extract_primal(&sola.state).unwrap().residual.max();
    let monotone = sola.report.objective.windows(2).all(|w| w[1] >= w[0]);
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        err <= 1e-8 && r1 <= 0.5 * r0 && monotone && secs < 600.0,
        format!(
            "constant: |U-Ubar| {err:e} (<= 1e-8) after {} iterations; Alfven: residual {r0:e} -> {r1:e} (ratio {:.3e} <= 0.5) after {} iterations, S monotone: {monotone}; {secs:.1} s (< 600 s)",
            sol.report.iterations,
            r1 / r0,
            sola.report.iterations
        ),
    )
}

fn criterion_8() -> Outcome {
    let grid = PeriodicGrid::new(32).unwrap();
    let initial = scenarios::random_smooth(grid, 8);
    let cfg = IntegratorConfig {
        dt: 0.005,
        steps: 20,
        ..Default::default()
    };
    let traj = integrate(&initial, &cfg, 1).unwrap();
    let e0 = traj.reports[0].energy;
    let h0 = traj.reports[0].helicity_total;
    let mut de = 0.0f64;
    let mut dh = 0.0f64;
    let mut div = 0.0f64;
    for r in &traj.reports {
        de = de.max((r.energy - e0).abs() / e0.abs());
        dh = dh.max((r.helicity_total - h0).abs() / h0.abs());
        div = div.max(r.div_v_norm).max(r.div_alpha_norm);
    }
    let hb = primal::helicity(&scenarios::beltrami_alfven(grid).alpha).unwrap().total;
    let hb_err = (hb - 1.0 / (2.0 * PI)).abs();
    outcome(
        de <= 1e-6 && dh <= 1e-6 && hb_err <= 1e-10 && div <= 1e-10,
        format!(
            "energy drift {de:e}, helicity drift {dh:e} (<= 1e-6 relative); Beltrami helicity error {hb_err:e} (<= 1e-10); max divergence {div:e} (<= 1e-10)"
        ),
    )
}

fn criterion_9() -> Outcome {
    let grid = PeriodicGrid::new(16).unwrap();
    let mut state = scenarios::mhd_embed(grid, 9);
    let mut v = state.v.clone();
    let mut b = extract_row(&state.alpha, 1).unwrap();
    let cfg = IntegratorConfig {
        dt: 0.01,
        steps: 1,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    let mut other_rows = 0.0f64;
    for _ in 0..10 {
        let next = step_rk4(&state, &cfg).unwrap();
        let (v_ref, b_ref) = support::mhd_rk4_step(&v, &b, cfg.dt);
        let b_next = extract_row(&next.alpha, 1).unwrap();
        worst = worst.max(next.v.max_diff(&v_ref)).max(b_next.max_diff(&b_ref));
        other_rows = other_rows.max(next.alpha.max_diff(&embed_mhd(&b_next, 1).unwrap()));
        // Restart both from the same state so the error is measured per step.
        state = next;
        v = state.v.clone();
        b = b_next;
    }
    let div = grid::div_vector(&b, Backend::Spectral).unwrap().max_abs();
    outcome(
        worst <= 1e-12 && other_rows == 0.0,
        format!("10 steps, max per-step deviation {worst:e} (<= 1e-12), other rows {other_rows:e} (== 0), final div B {div:e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exact-solution residuals", criterion_1),
        ("algebraic fidelity", criterion_2),
        ("dual-to-primal contract", criterion_3),
        ("gradient correctness", criterion_4),
        ("critical-point consistency", criterion_5),
        ("concavity", criterion_6),
        ("recovery experiment", criterion_7),
        ("conservation diagnostics", criterion_8),
        ("MHD embedding equivalence", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let o = run();
        println!("criterion {} ({name}): {} | {}", i + 1, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

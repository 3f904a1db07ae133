use ifdm::integrator::{integrate, time_reversed, IntegratorConfig};
use ifdm::primal::{self, PrimalState};
use ifdm::{scenarios, PeriodicGrid};

fn final_state(initial: &PrimalState, dt: f64, steps: usize) -> PrimalState {
    let cfg = IntegratorConfig {
        dt,
        steps,
        ..Default::default()
    };
    integrate(initial, &cfg, steps).unwrap().states.pop().unwrap()
}

#[test]
fn temporal_convergence_is_fourth_order() {
    let grid = PeriodicGrid::new(8).unwrap();
    let initial = scenarios::random_smooth(grid, 21);
    let t = 0.2;
    let runs: Vec<PrimalState> = [10, 20, 40].iter().map(|&s| final_state(&initial, t / s as f64, s)).collect();
    let e1 = runs[0].v.max_diff(&runs[1].v).max(runs[0].alpha.max_diff(&runs[1].alpha));
    let e2 = runs[1].v.max_diff(&runs[2].v).max(runs[1].alpha.max_diff(&runs[2].alpha));
    let order = (e1 / e2).log2();
    assert!(order >= 3.8, "observed order {order} ({e1:e}, {e2:e})");
}

#[test]
fn ideal_run_conserves_quadratic_invariants() {
    let grid = PeriodicGrid::new(16).unwrap();
    let initial = scenarios::mhd_embed(grid, 22);
    let cfg = IntegratorConfig {
        dt: 0.005,
        steps: 20,
        ..Default::default()
    };
    let traj = integrate(&initial, &cfg, 5).unwrap();
    let r0 = traj.reports[0];
    for r in &traj.reports {
        assert!((r.energy - r0.energy).abs() <= 1e-6 * r0.energy);
        assert!((r.helicity_total - r0.helicity_total).abs() <= 1e-6 * r0.helicity_total.abs().max(1e-3));
        assert!(r.div_v_norm <= 1e-10 && r.div_alpha_norm <= 1e-10);
    }
}

#[test]
fn dissipation_decreases_energy_monotonically() {
    let grid = PeriodicGrid::new(8).unwrap();
    let initial = scenarios::random_smooth(grid, 23);
    let cfg = IntegratorConfig {
        dt: 0.005,
        steps: 40,
        nu: 0.05,
        eta: 0.05,
        dealias: true,
    };
    let traj = integrate(&initial, &cfg, 2).unwrap();
    for w in traj.reports.windows(2) {
        assert!(w[1].energy < w[0].energy, "{} -> {}", w[0].energy, w[1].energy);
    }
}

#[test]
fn ideal_run_is_time_reversible() {
    let grid = PeriodicGrid::new(8).unwrap();
    let initial = scenarios::random_smooth(grid, 24);
    let forward = final_state(&initial, 0.005, 20);
    let back = final_state(&time_reversed(&forward), 0.005, 20);
    let recovered = time_reversed(&back);
    let err = recovered.v.max_diff(&initial.v).max(recovered.alpha.max_diff(&initial.alpha));
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn alfven_state_stays_stationary() {
    let grid = PeriodicGrid::new(16).unwrap();
    let alf = scenarios::beltrami_alfven(grid);
    let end = final_state(&alf, 0.01, 50);
    let err = end.v.max_diff(&alf.v).max(end.alpha.max_diff(&alf.alpha));
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn trajectory_residual_decreases_with_the_step() {
    // Without dealiasing the integrator and the residual share one spatial
    // discretization, so the residual is a pure time-differencing error.
    let grid = PeriodicGrid::new(8).unwrap();
    let initial = scenarios::random_smooth(grid, 25);
    let residual = |dt: f64, steps: usize| {
        let cfg = IntegratorConfig {
            dt,
            steps,
            dealias: false,
            ..Default::default()
        };
        let traj = integrate(&initial, &cfg, 1).unwrap();
        primal::primal_residual(&traj.states, dt, ifdm::Backend::Spectral).unwrap()
    };
    let coarse = residual(0.01, 10);
    let fine = residual(0.005, 20);
    let ratio = coarse.momentum.max(coarse.transport) / fine.momentum.max(fine.transport);
    assert!(ratio > 3.5, "ratio {ratio}");
    assert!(fine.div_v <= 1e-10 && fine.div_alpha <= 1e-10);
}

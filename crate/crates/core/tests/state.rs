mod common;

use common::{desk, problem, random_control, rel_diff};
use elastoplastic_control::control::ControlTrajectory;
use elastoplastic_control::fem;
use elastoplastic_control::mesh::Part;
use elastoplastic_control::optim::dist_k;
use elastoplastic_control::state::{
    energy_check, equilibrium_residual, flow_rule_pairing, solve_state, solve_state_with_data, solve_timestep,
    NewtonJacobian,
};
use elastoplastic_control::tensor::SymTensor2;
use elastoplastic_control::ProblemParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn zero_data_gives_zero_state() {
    let p = problem(ProblemParams {
        offset_scale: 0.0,
        ..desk(8)
    });
    let zero = ControlTrajectory::zeros(p.grid, p.n_dofs());
    let traj = solve_state(&p, &zero).unwrap();
    for k in 0..=8 {
        assert!(traj.u[k].iter().all(|&x| x == 0.0));
        assert!(traj.z[k].iter().all(|z| *z == SymTensor2::ZERO));
        assert!(traj.sigma[k].iter().all(|s| *s == SymTensor2::ZERO));
    }
    let step = solve_timestep(&p, &traj.u[0], &traj.z[0], &traj.u[0], 0.1).unwrap();
    assert_eq!(step.iterations, 0);
    assert!(solve_timestep(&p, &traj.u[0], &traj.z[0], &traj.u[0], 0.0).is_err());
}

/// Direct elasticity solve with the Dirichlet data of step `k`, built from scratch.
fn elastic_oracle(p: &elastoplastic_control::Problem, u_d: &[f64]) -> Vec<f64> {
    let c = p.elasticity.mandel();
    let k = fem::assemble_stiffness(&p.mesh, &p.pattern, |_| c);
    let mask = p.mesh.dof_mask(Part::GammaD);
    k.factor(&mask)
        .unwrap()
        .solve_lifted(&vec![0.0; p.n_dofs()], Some(u_d))
        .unwrap()
}

#[test]
fn small_offset_stays_elastic() {
    let p = problem(ProblemParams {
        offset_scale: 0.1,
        ..desk(16)
    });
    let zero = ControlTrajectory::zeros(p.grid, p.n_dofs());
    let traj = solve_state(&p, &zero).unwrap();
    let gamma = p.yield_params.gamma;
    assert!(dist_k(&traj, gamma) < -0.5);
    let u_t = elastic_oracle(&p, &traj.u_d[16]);
    let sigma_t: Vec<SymTensor2> = fem::strain(&p.mesh, &u_t)
        .iter()
        .map(|e| p.elasticity.apply(e))
        .collect();
    for k in 0..=16 {
        assert!(traj.z[k].iter().all(|z| z.frob_norm() <= 1e-12));
        let t = p.grid.t(k);
        let scaled: Vec<f64> = u_t.iter().map(|x| t * x).collect();
        assert!(rel_diff(&traj.u[k], &scaled) <= 1e-10 || k == 0);
        for (s, s_t) in traj.sigma[k].iter().zip(&sigma_t) {
            assert!((*s - *s_t * t).frob_norm() <= 1e-8 * s_t.frob_norm().max(1e-3));
        }
    }
}

#[test]
fn dirichlet_values_and_equilibrium_hold_in_plastic_run() {
    let p = problem(desk(32));
    let zero = ControlTrajectory::zeros(p.grid, p.n_dofs());
    let traj = solve_state(&p, &zero).unwrap();
    assert!(dist_k(&traj, p.yield_params.gamma) > 0.0);
    for k in 0..=32 {
        for (i, &fixed) in p.gamma_d.iter().enumerate() {
            if fixed {
                assert_eq!(traj.u[k][i], traj.u_d[k][i]);
            }
        }
        assert!(traj.hooke_defect(&p, k) <= 1e-12);
        let r = equilibrium_residual(&p, &traj.sigma[k]);
        assert!(r.iter().all(|x| x.abs() <= 1e-9), "step {k}");
        assert!(traj.residuals[k] <= 1e-10, "step {k}: {}", traj.residuals[k]);
    }
}

#[test]
fn patch_test_reproduces_uniaxial_state() {
    // affine motion with traction free top and bottom
    let p = problem(ProblemParams {
        offset_scale: 0.0,
        ..desk(4)
    });
    let (lame, mu) = (p.elasticity.lambda_lame, p.elasticity.mu_lame);
    let a = 1e-3;
    let b = -lame * a / (lame + 2.0 * mu);
    let u_d: Vec<Vec<f64>> = (0..=4)
        .map(|k| {
            let t = p.grid.t(k);
            fem::interpolate(&p.mesh, |x, y| [t * a * x, t * b * y])
        })
        .collect();
    let traj = solve_state_with_data(&p, u_d.clone()).unwrap();
    for k in 0..=4 {
        assert!(rel_diff(&traj.u[k], &u_d[k]) <= 1e-10 || k == 0);
        let expected = p.elasticity.apply(&SymTensor2::new(p.grid.t(k) * a, p.grid.t(k) * b, 0.0));
        for s in &traj.sigma[k] {
            assert!((*s - expected).frob_norm() <= 1e-12);
        }
    }
}

fn random_point(p: &elastoplastic_control::Problem, seed: u64) -> (Vec<f64>, Vec<SymTensor2>, Vec<SymTensor2>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..p.n_dofs()).map(|_| rng.random_range(-0.01..0.01)).collect();
    let mut t = || SymTensor2::new(rng.random_range(-3e-3..3e-3), rng.random_range(-3e-3..3e-3), rng.random_range(-3e-3..3e-3));
    let z: Vec<SymTensor2> = (0..p.mesh.n_triangles()).map(|_| t()).collect();
    let z_prev: Vec<SymTensor2> = (0..p.mesh.n_triangles()).map(|_| t()).collect();
    (u, z, z_prev)
}

#[test]
fn jacobian_matches_finite_differences() {
    for eps in [0.0, 0.5] {
        let p = problem(ProblemParams {
            epsilon_hardening: eps,
            ..desk(8)
        });
        let dt = p.grid.dt();
        let (u, z, z_prev) = random_point(&p, 3);
        let (du, dz, _) = random_point(&p, 4);
        let du: Vec<f64> = du.iter().zip(&p.gamma_d).map(|(x, &f)| if f { 0.0 } else { *x }).collect();
        let jac = NewtonJacobian::new(&p, &u, &z, dt);
        let (ju, jz) = jac.apply(&du, &dz);
        let (r0u, r0z) = NewtonJacobian::residual(&p, &u, &z, &z_prev, dt);
        let defect = |s: f64| {
            let us = fem::axpy(&u, s, &du);
            let zs: Vec<SymTensor2> = z.iter().zip(&dz).map(|(a, b)| *a + *b * s).collect();
            let (ru, rz) = NewtonJacobian::residual(&p, &us, &zs, &z_prev, dt);
            let eu: f64 = ru
                .iter()
                .zip(&r0u)
                .zip(&ju)
                .map(|((r, r0), j)| ((r - r0) / s - j).powi(2))
                .sum();
            let ez: f64 = rz
                .iter()
                .zip(&r0z)
                .zip(&jz)
                .map(|((r, r0), j)| ((*r - *r0) * (1.0 / s) - *j).frob_norm().powi(2))
                .sum();
            let scale: f64 = ju.iter().map(|x| x * x).sum::<f64>() + jz.iter().map(|x| x.frob_norm().powi(2)).sum::<f64>();
            ((eu + ez) / scale).sqrt()
        };
        let (e1, e2) = (defect(1e-6), defect(5e-7));
        assert!(e1 <= 1e-4, "eps {eps}: {e1}");
        // first order: halving s at least does not increase the defect
        assert!(e2 <= 0.75 * e1 || e2 <= 1e-8, "eps {eps}: {e1} -> {e2}");
    }
}

#[test]
fn condensed_system_is_symmetric() {
    let p = problem(desk(8));
    let dt = p.grid.dt();
    let (u, z, _) = random_point(&p, 11);
    let k = NewtonJacobian::new(&p, &u, &z, dt).condensed().unwrap();
    let scale = k.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(k.max_asymmetry() <= 1e-13 * scale);
    // elastic point: the plain stiffness
    let zero_u = vec![0.0; p.n_dofs()];
    let zero_z = vec![SymTensor2::ZERO; p.mesh.n_triangles()];
    let elastic = NewtonJacobian::new(&p, &zero_u, &zero_z, dt).condensed().unwrap();
    let diff = elastic
        .values()
        .iter()
        .zip(p.stiffness.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-12 * scale);
}

#[test]
fn energy_inequality_holds() {
    for eps in [0.0, 0.2] {
        let p = problem(ProblemParams {
            epsilon_hardening: eps,
            ..desk(32)
        });
        let zero = ControlTrajectory::zeros(p.grid, p.n_dofs());
        let traj = solve_state(&p, &zero).unwrap();
        let report = energy_check(&p, &traj);
        assert!(report.satisfied, "eps {eps}: {report:?}");
    }
    let p = problem(ProblemParams {
        offset_scale: 0.1,
        ..desk(16)
    });
    let traj = solve_state(&p, &ControlTrajectory::zeros(p.grid, p.n_dofs())).unwrap();
    let report = energy_check(&p, &traj);
    let largest = report.slack.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    assert!(largest <= 1e-12, "elastic slack {largest}");
}

#[test]
fn random_controls_keep_state_contracts() {
    let p = problem(desk(16));
    for seed in 0..4 {
        let l = random_control(&p, seed, 2e-3);
        let traj = solve_state(&p, &l).unwrap();
        for k in 0..=16 {
            assert!(traj.hooke_defect(&p, k) <= 1e-12);
            assert!(traj.residuals[k] <= 1e-10);
        }
    }
}

/// Worst normalized flow rule pairing over sampled `(j, k)`; the exact inequality
/// holds for test fields inside the admissible set.
fn worst_flow_pairing(lambda: f64) -> f64 {
    let p = problem(ProblemParams {
        lambda_yosida: lambda,
        ..desk(32)
    });
    let traj = solve_state(&p, &ControlTrajectory::zeros(p.grid, p.n_dofs())).unwrap();
    let mut worst = f64::INFINITY;
    for k in (2..=32).step_by(3) {
        for j in (0..=32).step_by(4) {
            let pairing = flow_rule_pairing(&p, &traj, j, k);
            worst = worst.min(pairing);
        }
    }
    worst
}

#[test]
fn flow_rule_cross_test_tightens_with_lambda() {
    let pairings: Vec<f64> = [1.0, 0.1, 0.01].iter().map(|&l| worst_flow_pairing(l)).collect();
    // violations come from test fields outside K and shrink with λ
    let violation: Vec<f64> = pairings.iter().map(|p| (-p).max(0.0)).collect();
    assert!(violation[1] <= violation[0] && violation[2] <= violation[1], "{pairings:?}");
    assert!(violation[2] <= 1e-10, "{pairings:?}");
}

#![allow(dead_code)]

use elastoplastic_control::control::ControlTrajectory;
use elastoplastic_control::{Problem, ProblemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 16 × 4 mesh, 16 steps, reference material.
pub fn desk(n_t: usize) -> ProblemParams {
    ProblemParams {
        n_x: 16,
        n_y: 4,
        n_t,
        ..ProblemParams::default()
    }
}

pub fn problem(params: ProblemParams) -> Problem {
    Problem::new(params).expect("problem assembles")
}

/// Random admissible control: zero at both ends and on the clamped part.
pub fn random_control(problem: &Problem, seed: u64, scale: f64) -> ControlTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_t = problem.grid.n_t;
    let clamped = problem.control.lambda_d_dofs().to_vec();
    ControlTrajectory::from_fn(problem.grid, |k, _| {
        (0..problem.n_dofs())
            .map(|i| {
                if k == 0 || k == n_t || clamped[i] {
                    0.0
                } else {
                    scale * rng.random_range(-1.0..1.0)
                }
            })
            .collect()
    })
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

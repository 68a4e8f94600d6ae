//! Von Mises yield set, its Yosida regularization and the C¹ smoothing used by
//! the differentiable state equation. Everything here acts on one tensor at a
//! time; the FEM layer applies it cellwise to piecewise constant fields.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::tensor::{deviatoric_projector, HardeningTensor, IsotropicElasticity, SymTensor2};

/// Deviator norms below this are treated as exactly zero.
const DEVIATOR_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YieldParams {
    /// Uniaxial yield stress γ [kN/mm²].
    pub gamma: f64,
    /// Yosida parameter λ > 0.
    pub lambda_yosida: f64,
    /// Smoothing width δ ∈ (0, 1) of `max_δ`.
    pub delta_smooth: f64,
    /// Hardening weight ε ≥ 0.
    pub epsilon_hardening: f64,
}

impl YieldParams {
    pub fn new(gamma: f64, lambda_yosida: f64, delta_smooth: f64, epsilon_hardening: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("yield stress must be positive, got {gamma}")));
        }
        if !(lambda_yosida > 0.0) {
            return Err(Error::Parameter(format!(
                "Yosida parameter must be positive, got {lambda_yosida}"
            )));
        }
        if !(delta_smooth > 0.0 && delta_smooth < 1.0) {
            return Err(Error::Parameter(format!(
                "smoothing parameter must lie in (0, 1), got {delta_smooth}"
            )));
        }
        if !(epsilon_hardening >= 0.0) {
            return Err(Error::Parameter(format!(
                "hardening weight must be non-negative, got {epsilon_hardening}"
            )));
        }
        Ok(YieldParams {
            gamma,
            lambda_yosida,
            delta_smooth,
            epsilon_hardening,
        })
    }

    /// γ = 0.45, δ = 1e-8, ε = 0 with the given λ.
    pub fn steel(lambda_yosida: f64) -> Result<Self> {
        Self::new(0.45, lambda_yosida, 1e-8, 0.0)
    }

    /// Pointwise bound on `|A_δ(τ) − ∂I_λ(τ)|_F`.
    pub fn smoothing_gap_bound(&self) -> f64 {
        self.gamma * self.delta_smooth / (4.0 * self.lambda_yosida * (1.0 - self.delta_smooth))
    }
}

pub fn in_k(t: &SymTensor2, p: &YieldParams) -> bool {
    t.deviator().frob_norm() <= p.gamma
}

/// Projection onto K; the volumetric part is left untouched.
pub fn project_k(t: &SymTensor2, p: &YieldParams) -> SymTensor2 {
    let dev = t.deviator();
    let r = dev.frob_norm();
    if r <= p.gamma {
        *t
    } else {
        *t - dev * (1.0 - p.gamma / r)
    }
}

/// Yosida approximation `(τ − π_K(τ))/λ`.
pub fn yosida(t: &SymTensor2, p: &YieldParams) -> SymTensor2 {
    let dev = t.deviator();
    let r = dev.frob_norm();
    if r < DEVIATOR_FLOOR {
        return SymTensor2::ZERO;
    }
    dev * ((1.0 - p.gamma / r).max(0.0) / p.lambda_yosida)
}

/// C¹ smoothing of `max{0, r}` with quadratic transition on `|r| < δ`.
pub fn max_delta(r: f64, delta: f64) -> f64 {
    if r >= delta {
        r
    } else if r <= -delta {
        0.0
    } else {
        (r + delta) * (r + delta) / (4.0 * delta)
    }
}

pub fn max_delta_prime(r: f64, delta: f64) -> f64 {
    if r >= delta {
        1.0
    } else if r <= -delta {
        0.0
    } else {
        (r + delta) / (2.0 * delta)
    }
}

/// Smoothed Yosida operator `A_δ(τ) = max_δ(1 − γ/|τ^D|)/λ · τ^D`.
pub fn a_delta(t: &SymTensor2, p: &YieldParams) -> SymTensor2 {
    let dev = t.deviator();
    let r = dev.frob_norm();
    if r < DEVIATOR_FLOOR {
        return SymTensor2::ZERO;
    }
    dev * (max_delta(1.0 - p.gamma / r, p.delta_smooth) / p.lambda_yosida)
}

/// Directional derivative `A_δ'(τ) h`.
pub fn a_delta_jac(t: &SymTensor2, p: &YieldParams, h: &SymTensor2) -> SymTensor2 {
    let dev = t.deviator();
    let r = dev.frob_norm();
    if r < DEVIATOR_FLOOR {
        return SymTensor2::ZERO;
    }
    let s = 1.0 - p.gamma / r;
    let hd = h.deviator();
    let radial = max_delta_prime(s, p.delta_smooth) * p.gamma / (r * r * r) * dev.dot(&hd);
    (dev * radial + hd * max_delta(s, p.delta_smooth)) * (1.0 / p.lambda_yosida)
}

/// `A_δ'(τ)` as a symmetric Mandel matrix; `None` when it vanishes identically.
pub fn a_delta_jac_matrix(t: &SymTensor2, p: &YieldParams) -> Option<Matrix3<f64>> {
    let dev = t.deviator();
    let r = dev.frob_norm();
    if r < DEVIATOR_FLOOR {
        return None;
    }
    let s = 1.0 - p.gamma / r;
    let m = max_delta(s, p.delta_smooth);
    let dm = max_delta_prime(s, p.delta_smooth);
    if m == 0.0 && dm == 0.0 {
        return None;
    }
    let d = dev.to_mandel();
    let radial = dm * p.gamma / (r * r * r);
    Some((d * d.transpose() * radial + deviatoric_projector() * m) / p.lambda_yosida)
}

/// Result of the implicit Euler update of the flow rule in one cell.
#[derive(Clone, Copy, Debug)]
pub struct LocalUpdate {
    pub z: SymTensor2,
    pub sigma: SymTensor2,
    /// `dσ/d(∇ˢu)` in the Mandel basis.
    pub tangent: Matrix3<f64>,
    /// `A_δ'` at the converged argument does not vanish.
    pub plastic: bool,
}

/// Solve `z = z_prev + Δt A_δ(C(e − z) − εBz)` for `z` at fixed total strain `e`.
///
/// `A_δ` only produces deviators and `C` acts on deviators as `2μ`, so the
/// update is radial: the deviator of the argument keeps its direction and its
/// norm `r` solves the scalar monotone equation `r (1 + c·max_δ(1 − γ/r)) = r_trial`
/// with `c = (2μ + εb)Δt/λ`.
pub fn local_update(
    strain: &SymTensor2,
    z_prev: &SymTensor2,
    dt: f64,
    elasticity: &IsotropicElasticity,
    hardening: &HardeningTensor,
    p: &YieldParams,
) -> LocalUpdate {
    let eps_b = p.epsilon_hardening * hardening.scale;
    let sigma_trial = elasticity.apply(&(*strain - *z_prev));
    let xi_trial = sigma_trial - *z_prev * eps_b;
    let dev_trial = xi_trial.deviator();
    let r_trial = dev_trial.frob_norm();
    let elastic = LocalUpdate {
        z: *z_prev,
        sigma: sigma_trial,
        tangent: elasticity.mandel(),
        plastic: false,
    };
    let delta = p.delta_smooth;
    if r_trial <= p.gamma / (1.0 + delta) || r_trial < DEVIATOR_FLOOR {
        return elastic;
    }
    let c = (2.0 * elasticity.mu_lame + eps_b) * dt / p.lambda_yosida;
    let r = radial_return(r_trial, c, p);
    let rate = max_delta(1.0 - p.gamma / r, delta) / p.lambda_yosida;
    let dz = dev_trial * (dt * rate * r / r_trial);
    let z = *z_prev + dz;
    let sigma = elasticity.apply(&(*strain - z));
    let xi = sigma - z * eps_b;
    match a_delta_jac_matrix(&xi, p) {
        None => LocalUpdate { z, sigma, ..elastic },
        Some(jac) => {
            let tangent = condensed_tangent(&jac, &elasticity.mandel(), eps_b, dt)
                .expect("I + Δt A'(C + εB) is invertible for monotone A'");
            LocalUpdate {
                z,
                sigma,
                tangent,
                plastic: true,
            }
        }
    }
}

/// `C − Δt C (I + Δt A'(C + εB))⁻¹ A' C`, the stress response to a strain
/// increment once the flow rule is eliminated. `None` if the cell block is singular.
pub fn condensed_tangent(jac: &Matrix3<f64>, cm: &Matrix3<f64>, eps_b: f64, dt: f64) -> Option<Matrix3<f64>> {
    let block = Matrix3::identity() + jac * (cm + Matrix3::identity() * eps_b) * dt;
    let dz_de = block.lu().solve(&(jac * cm * dt))?;
    let tangent = cm - cm * dz_de;
    Some(0.5 * (tangent + tangent.transpose()))
}

/// Root of `r + c·max_δ(1 − γ/r)·r = r_trial` for `r_trial > γ/(1+δ)`.
fn radial_return(r_trial: f64, c: f64, p: &YieldParams) -> f64 {
    let (gamma, delta) = (p.gamma, p.delta_smooth);
    let upper = gamma / (1.0 - delta);
    // beyond the smoothing window max_δ(1 − γ/r) r = r − γ
    if r_trial >= upper + c * (upper - gamma) {
        return (r_trial + c * gamma) / (1.0 + c);
    }
    let f = |r: f64| r + c * max_delta(1.0 - gamma / r, delta) * r - r_trial;
    let df = |r: f64| {
        let s = 1.0 - gamma / r;
        1.0 + c * (max_delta(s, delta) + max_delta_prime(s, delta) * gamma / r)
    };
    let mut lo = gamma / (1.0 + delta);
    let mut hi = upper.min(r_trial);
    let mut r = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fr = f(r);
        if fr == 0.0 {
            return r;
        }
        if fr < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let newton = r - fr / df(r);
        r = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi || fr.abs() <= 1e-17 * r_trial {
            break;
        }
    }
    r
}

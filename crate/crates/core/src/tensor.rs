//! Pointwise algebra on symmetric 2×2 tensors and the isotropic material tensors.
//!
//! Tensors are stored by their three independent components. Linear maps on
//! them are represented as 3×3 matrices in the orthonormal Mandel basis
//! `[xx, yy, √2·xy]`, in which the Frobenius inner product is the Euclidean one
//! and self-adjoint maps are symmetric matrices.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Symmetric 2×2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };
    pub const IDENTITY: SymTensor2 = SymTensor2 {
        xx: 1.0,
        yy: 1.0,
        xy: 0.0,
    };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    pub const fn diag(xx: f64, yy: f64) -> Self {
        SymTensor2 { xx, yy, xy: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Trace-free part `t - tr(t)/2 · I`.
    pub fn deviator(&self) -> Self {
        let m = 0.5 * self.trace();
        SymTensor2::new(self.xx - m, self.yy - m, self.xy)
    }

    /// Frobenius inner product, off-diagonal entries counted twice.
    pub fn dot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn frob_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn to_mandel(&self) -> Vector3<f64> {
        Vector3::new(self.xx, self.yy, SQRT_2 * self.xy)
    }

    pub fn from_mandel(v: &Vector3<f64>) -> Self {
        SymTensor2::new(v[0], v[1], v[2] / SQRT_2)
    }

    /// Apply a Mandel-basis matrix to this tensor.
    pub fn transform(&self, op: &Matrix3<f64>) -> Self {
        SymTensor2::from_mandel(&(op * self.to_mandel()))
    }
}

/// Deviator of `t` (free-function form).
pub fn deviator(t: &SymTensor2) -> SymTensor2 {
    t.deviator()
}

/// Frobenius norm of `t` (free-function form).
pub fn frob_norm(t: &SymTensor2) -> f64 {
    t.frob_norm()
}

/// Orthogonal projector onto trace-free tensors in the Mandel basis.
pub fn deviatoric_projector() -> Matrix3<f64> {
    Matrix3::new(0.5, -0.5, 0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 1.0)
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + rhs.xx, self.yy + rhs.yy, self.xy + rhs.xy)
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - rhs.xx, self.yy - rhs.yy, self.xy - rhs.xy)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        SymTensor2::new(-self.xx, -self.yy, -self.xy)
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> SymTensor2 {
        SymTensor2::new(s * self.xx, s * self.yy, s * self.xy)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, t: SymTensor2) -> SymTensor2 {
        t * self
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: SymTensor2) {
        *self = *self + rhs;
    }
}

impl SubAssign for SymTensor2 {
    fn sub_assign(&mut self, rhs: SymTensor2) {
        *self = *self - rhs;
    }
}

/// Isotropic elasticity tensor `C e = λ tr(e) I + 2μ e` (plane strain).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicElasticity {
    pub lambda_lame: f64,
    pub mu_lame: f64,
}

impl IsotropicElasticity {
    pub fn new(lambda_lame: f64, mu_lame: f64) -> Result<Self> {
        if !(mu_lame > 0.0) || !(lambda_lame + mu_lame > 0.0) {
            return Err(Error::Parameter(format!(
                "elasticity tensor is not coercive (lambda = {lambda_lame}, mu = {mu_lame})"
            )));
        }
        Ok(IsotropicElasticity {
            lambda_lame,
            mu_lame,
        })
    }

    /// Lamé parameters from Young's modulus and Poisson's ratio.
    pub fn from_youngs(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) || !(-1.0 < poisson_ratio && poisson_ratio < 0.5) {
            return Err(Error::Parameter(format!(
                "need E > 0 and -1 < nu < 0.5 (E = {youngs_modulus}, nu = {poisson_ratio})"
            )));
        }
        let e = youngs_modulus;
        let nu = poisson_ratio;
        Self::new(e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 + 2.0 * nu))
    }

    /// E = 210 kN/mm², ν = 0.3.
    pub fn steel() -> Self {
        Self::from_youngs(210.0, 0.3).expect("steel parameters are valid")
    }

    /// `C e`.
    pub fn apply(&self, e: &SymTensor2) -> SymTensor2 {
        let vol = self.lambda_lame * e.trace();
        let two_mu = 2.0 * self.mu_lame;
        SymTensor2::new(vol + two_mu * e.xx, vol + two_mu * e.yy, two_mu * e.xy)
    }

    /// `A s = C⁻¹ s = s/(2μ) − λ/(2μ(2λ+2μ)) tr(s) I`.
    pub fn apply_inverse(&self, s: &SymTensor2) -> SymTensor2 {
        let two_mu = 2.0 * self.mu_lame;
        let vol = self.lambda_lame / (two_mu * (2.0 * self.lambda_lame + two_mu)) * s.trace();
        SymTensor2::new(s.xx / two_mu - vol, s.yy / two_mu - vol, s.xy / two_mu)
    }

    pub fn mandel(&self) -> Matrix3<f64> {
        let l = self.lambda_lame;
        let m2 = 2.0 * self.mu_lame;
        Matrix3::new(l + m2, l, 0.0, l, l + m2, 0.0, 0.0, 0.0, m2)
    }
}

/// Hardening tensor `B = scale · I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardeningTensor {
    pub scale: f64,
}

impl HardeningTensor {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale >= 0.0) {
            return Err(Error::Parameter(format!(
                "hardening scale must be non-negative, got {scale}"
            )));
        }
        Ok(HardeningTensor { scale })
    }

    pub fn identity() -> Self {
        HardeningTensor { scale: 1.0 }
    }

    pub fn apply(&self, t: &SymTensor2) -> SymTensor2 {
        *t * self.scale
    }
}

impl Default for HardeningTensor {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &SymTensor2, b: &SymTensor2, tol: f64) -> bool {
        (*a - *b).frob_norm() <= tol
    }

    #[test]
    fn deviator_examples() {
        assert_eq!(SymTensor2::IDENTITY.deviator(), SymTensor2::ZERO);
        assert_eq!(SymTensor2::diag(2.0, 0.0).deviator(), SymTensor2::diag(1.0, -1.0));
        assert_eq!(
            SymTensor2::new(1.0, 1.0, 1.0).deviator(),
            SymTensor2::new(0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn frobenius_counts_off_diagonal_twice() {
        assert_eq!(SymTensor2::ZERO.frob_norm(), 0.0);
        assert!((SymTensor2::diag(1.0, -1.0).frob_norm() - SQRT_2).abs() < 1e-15);
        assert!((SymTensor2::new(0.0, 0.0, 1.0).frob_norm() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn steel_lame_parameters() {
        let c = IsotropicElasticity::steel();
        assert!((c.lambda_lame - 121.1538).abs() < 1e-4);
        assert!((c.mu_lame - 80.7692).abs() < 1e-4);
        let s = c.apply(&SymTensor2::diag(1.0, 0.0));
        assert!((s.xx - 282.6923).abs() < 1e-4);
        assert!((s.yy - 121.1538).abs() < 1e-4);
        assert_eq!(s.xy, 0.0);
        assert_eq!(c.apply(&SymTensor2::ZERO), SymTensor2::ZERO);
    }

    #[test]
    fn compliance_of_identity_matches_voigt_solve() {
        // Voigt form with engineering shear: [sxx, syy, sxy] = V [exx, eyy, 2exy].
        let c = IsotropicElasticity::steel();
        let (l, m) = (c.lambda_lame, c.mu_lame);
        let v = Matrix3::new(l + 2.0 * m, l, 0.0, l, l + 2.0 * m, 0.0, 0.0, 0.0, m);
        let x = v.lu().solve(&Vector3::new(1.0, 1.0, 0.0)).unwrap();
        let e = c.apply_inverse(&SymTensor2::IDENTITY);
        assert!((e.xx - x[0]).abs() < 1e-15);
        assert!((e.yy - x[1]).abs() < 1e-15);
        assert!((2.0 * e.xy - x[2]).abs() < 1e-15);
        assert!(close(
            &c.apply_inverse(&c.apply(&SymTensor2::diag(1.0, 0.0))),
            &SymTensor2::diag(1.0, 0.0),
            1e-14
        ));
    }

    #[test]
    fn degenerate_moduli_are_rejected() {
        assert!(IsotropicElasticity::new(1.0, 0.0).is_err());
        assert!(IsotropicElasticity::new(-2.0, 1.0).is_err());
        assert!(IsotropicElasticity::from_youngs(210.0, 0.5).is_err());
        assert!(HardeningTensor::new(-1.0).is_err());
    }

    #[test]
    fn mandel_matrix_matches_apply() {
        let c = IsotropicElasticity::steel();
        let e = SymTensor2::new(0.3, -0.2, 0.7);
        assert!(close(&e.transform(&c.mandel()), &c.apply(&e), 1e-12));
        let p = deviatoric_projector();
        assert!(close(&e.transform(&p), &e.deviator(), 1e-15));
    }

    fn tensor() -> impl Strategy<Value = SymTensor2> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64)
            .prop_map(|(a, b, c)| SymTensor2::new(a, b, c))
    }

    proptest! {
        #[test]
        fn deviator_is_idempotent_and_trace_free(t in tensor()) {
            let d = t.deviator();
            prop_assert!(d.trace().abs() < 1e-14);
            prop_assert!(close(&d.deviator(), &d, 1e-14));
        }

        #[test]
        fn elasticity_is_coercive_and_self_adjoint(e1 in tensor(), e2 in tensor()) {
            let c = IsotropicElasticity::steel();
            prop_assert!(c.apply(&e1).dot(&e1) >= 2.0 * c.mu_lame * e1.dot(&e1) * (1.0 - 1e-12));
            let lhs = c.apply(&e1).dot(&e2);
            let rhs = e1.dot(&c.apply(&e2));
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn compliance_inverts_elasticity(e in tensor()) {
            let c = IsotropicElasticity::steel();
            let back = c.apply_inverse(&c.apply(&e));
            prop_assert!((back - e).frob_norm() <= 1e-12 * e.frob_norm().max(1e-300));
            let s = e;
            let fwd = c.apply(&c.apply_inverse(&s));
            prop_assert!((fwd - s).frob_norm() <= 1e-12 * s.frob_norm().max(1e-300));
        }
    }
}

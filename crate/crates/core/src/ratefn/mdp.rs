//! Moderate-deviation quadratic forms.
//!
//! The local covariance of √n(Vⁿ − [V]) is Σ_t = 2·K_t, where
//!
//! ```text
//! K_t = [[σ₁⁴,        σ₁²σ₂²ρ²,  σ₁³σ₂ρ           ],
//!        [σ₁²σ₂²ρ²,   σ₂⁴,       σ₁σ₂³ρ           ],
//!        [σ₁³σ₂ρ,     σ₁σ₂³ρ,    ½σ₁²σ₂²(1+ρ²)    ]]
//! ```
//!
//! is half the Hessian of P_ρ at the origin after scaling the tilt by
//! (σ₁², σ₂², σ₁σ₂). K_t has the closed-form inverse implemented in
//! [`kernel_inverse`] and det K_t = ½σ₁⁶σ₂⁶(1−ρ²)³. The fixed-time covariance
//! is Σ₁ = ∫₀¹ Σ_t dt and the rate is ½⟨x, Σ₁⁻¹x⟩.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSpec, Integrand};
use crate::error::{CovolError, Result};

pub const MAX_CONDITION: f64 = 1e12;

/// K_t at a single point.
pub fn kernel_matrix(s1: f64, s2: f64, rho: f64) -> Matrix3<f64> {
    let cross = s1 * s1 * s2 * s2;
    Matrix3::new(
        s1.powi(4),
        cross * rho * rho,
        s1.powi(3) * s2 * rho,
        cross * rho * rho,
        s2.powi(4),
        s1 * s2.powi(3) * rho,
        s1.powi(3) * s2 * rho,
        s1 * s2.powi(3) * rho,
        0.5 * cross * (1.0 + rho * rho),
    )
}

/// ½σ₁⁶σ₂⁶(1−ρ²)³
pub fn kernel_determinant(s1: f64, s2: f64, rho: f64) -> f64 {
    0.5 * s1.powi(6) * s2.powi(6) * (1.0 - rho * rho).powi(3)
}

/// Closed-form K_t⁻¹ (adjugate over determinant).
pub fn kernel_inverse(s1: f64, s2: f64, rho: f64) -> Matrix3<f64> {
    let a = 1.0 - rho * rho;
    let adj11 = 0.5 * s1 * s1 * s2.powi(6) * a;
    let adj12 = 0.5 * s1.powi(4) * s2.powi(4) * rho * rho * a;
    let adj13 = -s1.powi(3) * s2.powi(5) * rho * a;
    let adj22 = 0.5 * s1.powi(6) * s2 * s2 * a;
    let adj23 = -s1.powi(5) * s2.powi(3) * rho * a;
    let adj33 = s1.powi(4) * s2.powi(4) * (1.0 - rho.powi(4));
    Matrix3::new(
        adj11, adj12, adj13, adj12, adj22, adj23, adj13, adj23, adj33,
    ) / kernel_determinant(s1, s2, rho)
}

/// The MDP covariance Σ₁ and its per-time counterparts for one spec.
#[derive(Debug, Clone)]
pub struct MdpCovariance {
    spec: CoefficientSpec,
    sigma1: Matrix3<f64>,
}

impl MdpCovariance {
    pub fn new(spec: &CoefficientSpec) -> Self {
        let int = |sel| {
            spec.integrate(sel, 0.0, 1.0)
                .expect("[0, 1] is always a valid interval")
        };
        let k11 = int(Integrand::Sigma1Pow4);
        let k22 = int(Integrand::Sigma2Pow4);
        let k12 = int(Integrand::CrossSqRhoSq);
        let k13 = int(Integrand::Sigma1CubedSigma2Rho);
        let k23 = int(Integrand::Sigma1Sigma2CubedRho);
        let k33 = int(Integrand::HalfCrossOnePlusRhoSq);
        let kernel = Matrix3::new(k11, k12, k13, k12, k22, k23, k13, k23, k33);
        MdpCovariance {
            spec: spec.clone(),
            sigma1: 2.0 * kernel,
        }
    }

    /// Σ₁: asymptotic covariance of √n(V₁ⁿ − [V]₁).
    pub fn sigma1(&self) -> &Matrix3<f64> {
        &self.sigma1
    }

    /// ∫₀¹ K_t dt = Σ₁/2.
    pub fn kernel1(&self) -> Matrix3<f64> {
        0.5 * self.sigma1
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.sigma1)
    }

    pub fn sigma_t(&self, t: f64) -> Result<Matrix3<f64>> {
        Ok(2.0 * self.kernel_t(t)?)
    }

    /// Σ_t⁻¹ from the closed-form kernel inverse.
    pub fn sigma_t_inv(&self, t: f64) -> Result<Matrix3<f64>> {
        Ok(0.5 * self.kernel_inv_t(t)?)
    }

    /// det Σ_t = 8 det K_t = 4σ₁⁶σ₂⁶(1−ρ²)³.
    pub fn det_t(&self, t: f64) -> Result<f64> {
        Ok(8.0 * self.kernel_det_t(t)?)
    }

    pub fn kernel_t(&self, t: f64) -> Result<Matrix3<f64>> {
        let (s1, s2, rho) = self.spec.evaluate(t)?;
        Ok(kernel_matrix(s1, s2, rho))
    }

    pub fn kernel_inv_t(&self, t: f64) -> Result<Matrix3<f64>> {
        let (s1, s2, rho) = self.spec.evaluate(t)?;
        Ok(kernel_inverse(s1, s2, rho))
    }

    pub fn kernel_det_t(&self, t: f64) -> Result<f64> {
        let (s1, s2, rho) = self.spec.evaluate(t)?;
        Ok(kernel_determinant(s1, s2, rho))
    }
}

pub(crate) fn condition_number(m: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*m).eigenvalues;
    let max = eig.iter().fold(f64::MIN, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::MAX, |a, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn mdp_sigma1(spec: &CoefficientSpec) -> MdpCovariance {
    MdpCovariance::new(spec)
}

/// M⁻¹x by Cholesky solve, refusing ill-conditioned M.
fn checked_solve(m: &Matrix3<f64>, x: &Vector3<f64>) -> Result<Vector3<f64>> {
    let condition = condition_number(m);
    if !(condition <= MAX_CONDITION) {
        return Err(CovolError::Singular { condition });
    }
    let chol = m
        .cholesky()
        .ok_or(CovolError::Singular { condition })?;
    Ok(chol.solve(x))
}

/// ½ xᵀ M⁻¹ x.
pub(crate) fn half_quadratic_form(m: &Matrix3<f64>, x: &Vector3<f64>) -> Result<f64> {
    Ok(0.5 * x.dot(&checked_solve(m, x)?))
}

/// I_mdp(x) = ½⟨x, Σ₁⁻¹x⟩.
pub fn mdp_rate(x: [f64; 3], spec: &CoefficientSpec) -> Result<f64> {
    half_quadratic_form(MdpCovariance::new(spec).sigma1(), &Vector3::from(x))
}

/// Maximizer Σ₁⁻¹x of ⟨λ,x⟩ − ½⟨λ,Σ₁λ⟩.
pub fn mdp_argmax(x: [f64; 3], spec: &CoefficientSpec) -> Result<[f64; 3]> {
    let l = checked_solve(MdpCovariance::new(spec).sigma1(), &Vector3::from(x))?;
    Ok([l[0], l[1], l[2]])
}

/// Speed exponent γ of b_n = n^γ, 0 < γ < ½.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MdpScale {
    gamma: f64,
}

impl MdpScale {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 0.5 {
            Ok(MdpScale { gamma })
        } else {
            Err(CovolError::domain("gamma", gamma, "MDP exponent must lie in (0, 1/2)"))
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn b_n(&self, n: usize) -> f64 {
        (n as f64).powf(self.gamma)
    }

    /// b_n²
    pub fn speed(&self, n: usize) -> f64 {
        (n as f64).powf(2.0 * self.gamma)
    }

    /// √n / b_n
    pub fn normalization(&self, n: usize) -> f64 {
        (n as f64).sqrt() / self.b_n(n)
    }
}

impl TryFrom<f64> for MdpScale {
    type Error = CovolError;

    fn try_from(gamma: f64) -> Result<Self> {
        MdpScale::new(gamma)
    }
}

impl From<MdpScale> for f64 {
    fn from(s: MdpScale) -> f64 {
        s.gamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefFn, Drift, DEFAULT_RHO_MARGIN};
    use crate::ratefn::integrated::{ConvexCgf, IntegratedCgf};

    #[test]
    fn sigma1_constant_examples() {
        let m = mdp_sigma1(&CoefficientSpec::constant(1.0, 1.0, 0.0).unwrap());
        let want = Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0));
        assert!((m.sigma1() - want).abs().max() < 1e-15);
        assert!((m.kernel1() - want / 2.0).abs().max() < 1e-15);

        let m = mdp_sigma1(&CoefficientSpec::constant(1.0, 2.0, 0.5).unwrap());
        assert!((m.kernel1()[(0, 2)] - 1.0).abs() < 1e-15);
        assert!((m.sigma1()[(2, 2)] - 5.0).abs() < 1e-14);

        let near = mdp_sigma1(&CoefficientSpec::constant(1.0, 1.0, 1.0 - DEFAULT_RHO_MARGIN).unwrap());
        assert!(near.condition_number() > 1e6);
    }

    #[test]
    fn sigma1_is_the_hessian_of_the_integrated_cgf() {
        let spec = CoefficientSpec::new(
            CoefFn::Grid(vec![0.9, 1.3]),
            CoefFn::Grid(vec![1.1, 0.6, 1.0]),
            CoefFn::Grid(vec![-0.4, 0.5]),
            Drift::None,
            DEFAULT_RHO_MARGIN,
        )
        .unwrap();
        let (_, h) = IntegratedCgf::new(&spec).derivatives(&[0.0; 3]).unwrap();
        let m = mdp_sigma1(&spec);
        assert!((m.sigma1() - h).abs().max() < 1e-12);
    }

    #[test]
    fn mdp_rate_examples() {
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.0).unwrap();
        assert_eq!(mdp_rate([0.0; 3], &spec).unwrap(), 0.0);
        assert!((mdp_rate([1.0, 0.0, 0.0], &spec).unwrap() - 0.25).abs() < 1e-15);
        assert!((mdp_rate([0.0, 0.0, 1.0], &spec).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singular_sigma_is_rejected() {
        let m = Matrix3::new(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            half_quadratic_form(&m, &Vector3::new(1.0, 0.0, 0.0)),
            Err(CovolError::Singular { .. })
        ));
    }

    #[test]
    fn kernel_inverse_and_determinant() {
        for &(s1, s2, rho) in &[(1.0, 1.0, 0.5), (0.7, 1.9, -0.8), (2.3, 0.4, 0.95)] {
            let k = kernel_matrix(s1, s2, rho);
            let dense = k.try_inverse().unwrap();
            let closed = kernel_inverse(s1, s2, rho);
            let scale = dense.abs().max();
            assert!((dense - closed).abs().max() < 1e-10 * scale);
            let det = k.determinant();
            assert!((det / kernel_determinant(s1, s2, rho) - 1.0).abs() < 1e-9);
        }
        let spec = CoefficientSpec::constant(1.0, 1.0, 0.5).unwrap();
        let m = mdp_sigma1(&spec);
        let prod = m.sigma_t(0.4).unwrap() * m.sigma_t_inv(0.4).unwrap();
        assert!((prod - Matrix3::identity()).abs().max() < 1e-12);
        let det = m.sigma_t(0.4).unwrap().determinant();
        assert!((det / m.det_t(0.4).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mdp_scale_validation() {
        assert!(MdpScale::new(0.0).is_err());
        assert!(MdpScale::new(0.5).is_err());
        let s = MdpScale::new(0.25).unwrap();
        assert!((s.b_n(400) - 400f64.powf(0.25)).abs() < 1e-12);
        assert!((s.speed(400) - 20.0).abs() < 1e-12);
        assert!((s.normalization(400) - 20.0 / 400f64.powf(0.25)).abs() < 1e-12);
    }
}

//! The bivariate Gaussian quadratic-form CGF P_c, its effective domain D_c,
//! its Legendre transform P*_c and its recession function.
//!
//! For (ξ, ξ′) standard normal with correlation c,
//! P_c(λ) = log E exp(λ₁ξ² + λ₂ξ′² + λ₃ξξ′)
//!        = −½ log([(1−2λ₁(1−c²))(1−2λ₂(1−c²)) − (λ₃(1−c²)+c)²] / (1−c²)).
//!
//! Writing m₁ = 1−2λ₁(1−c²), m₂ = 1−2λ₂(1−c²), q = λ₃(1−c²)+c and
//! det = m₁m₂ − q², the tilted covariance of (ξ, ξ′) is
//! S = (1−c²)/det · [[m₂, q], [q, m₁]], and ∇P_c = (S₁₁, S₂₂, S₁₂).

use nalgebra::Matrix3;

use crate::error::{CovolError, Result};

/// Dual variables (λ₁, λ₂, λ₃) paired with (q₁, q₂, c).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TiltPoint(pub [f64; 3]);

impl From<[f64; 3]> for TiltPoint {
    fn from(v: [f64; 3]) -> Self {
        TiltPoint(v)
    }
}

pub(crate) fn check_correlation(c: f64) -> Result<()> {
    if c.is_finite() && c.abs() < 1.0 {
        Ok(())
    } else {
        Err(CovolError::domain("c", c, "correlation must satisfy |c| < 1"))
    }
}

/// P_c for a fixed correlation; all methods assume |c| < 1.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussianQuadCgf {
    c: f64,
    /// 1 − c²
    a: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TiltParts {
    pub m1: f64,
    pub m2: f64,
    pub q: f64,
    pub det: f64,
}

impl GaussianQuadCgf {
    pub fn new(c: f64) -> Self {
        GaussianQuadCgf { c, a: 1.0 - c * c }
    }

    pub fn parts(&self, l: &[f64; 3]) -> TiltParts {
        let m1 = 1.0 - 2.0 * l[0] * self.a;
        let m2 = 1.0 - 2.0 * l[1] * self.a;
        let q = l[2] * self.a + self.c;
        TiltParts {
            m1,
            m2,
            q,
            det: m1 * m2 - q * q,
        }
    }

    pub fn contains(&self, l: &[f64; 3]) -> bool {
        let bound = 1.0 / (2.0 * self.a);
        if !(l[0] < bound && l[1] < bound) {
            return false;
        }
        let p = self.parts(l);
        p.m1 * p.m2 > p.q * p.q
    }

    pub fn value(&self, l: &[f64; 3]) -> f64 {
        if !self.contains(l) {
            return f64::INFINITY;
        }
        let p = self.parts(l);
        -0.5 * (p.det / self.a).ln()
    }

    /// Tilted covariance S of the normalized pair; `None` outside D_c.
    pub fn tilted_covariance(&self, l: &[f64; 3]) -> Option<[f64; 3]> {
        if !self.contains(l) {
            return None;
        }
        let p = self.parts(l);
        let f = self.a / p.det;
        Some([f * p.m2, f * p.m1, f * p.q])
    }

    pub fn gradient(&self, l: &[f64; 3]) -> Option<[f64; 3]> {
        self.tilted_covariance(l)
    }

    pub fn hessian_from_cov(s: [f64; 3]) -> Matrix3<f64> {
        let [s11, s22, s12] = s;
        Matrix3::new(
            2.0 * s11 * s11,
            2.0 * s12 * s12,
            2.0 * s11 * s12,
            2.0 * s12 * s12,
            2.0 * s22 * s22,
            2.0 * s22 * s12,
            2.0 * s11 * s12,
            2.0 * s22 * s12,
            s11 * s22 + s12 * s12,
        )
    }

    /// Smallest eigenvalue of the normalized tilted precision; 0 on ∂D_c.
    pub fn boundary_margin(&self, l: &[f64; 3]) -> f64 {
        let p = self.parts(l);
        let mean = 0.5 * (p.m1 + p.m2);
        let half = 0.5 * (p.m1 - p.m2);
        mean - (half * half + p.q * p.q).sqrt()
    }

    pub fn legendre(&self, x: &[f64; 3]) -> f64 {
        let d = x[0] * x[1] - x[2] * x[2];
        if !(x[0] > 0.0 && x[1] > 0.0 && d > 0.0) {
            return f64::INFINITY;
        }
        (self.a.sqrt() / d.sqrt()).ln() - 1.0 + (x[0] + x[1] - 2.0 * self.c * x[2]) / (2.0 * self.a)
    }

    /// The maximizer of ⟨λ,x⟩ − P_c(λ): Λ = (Σ⁻¹ − X⁻¹)/2 in matrix form.
    pub fn legendre_argmax(&self, x: &[f64; 3]) -> Option<[f64; 3]> {
        let d = x[0] * x[1] - x[2] * x[2];
        if !(x[0] > 0.0 && x[1] > 0.0 && d > 0.0) {
            return None;
        }
        let inv_a = 1.0 / self.a;
        Some([
            0.5 * (inv_a - x[1] / d),
            0.5 * (inv_a - x[0] / d),
            x[2] / d - self.c * inv_a,
        ])
    }
}

/// Membership of λ in the open effective domain D_c.
pub fn in_domain(lambda: TiltPoint, c: f64) -> Result<bool> {
    check_correlation(c)?;
    Ok(GaussianQuadCgf::new(c).contains(&lambda.0))
}

/// P_c(λ); `f64::INFINITY` outside D_c.
pub fn cgf_pointwise(lambda: TiltPoint, c: f64) -> Result<f64> {
    check_correlation(c)?;
    Ok(GaussianQuadCgf::new(c).value(&lambda.0))
}

/// Analytic ∇P_c(λ) for λ strictly inside D_c.
pub fn cgf_gradient(lambda: TiltPoint, c: f64) -> Result<[f64; 3]> {
    check_correlation(c)?;
    GaussianQuadCgf::new(c)
        .gradient(&lambda.0)
        .ok_or_else(|| CovolError::domain("lambda", lambda.0[0], "tilt is not strictly inside D_c"))
}

/// Analytic Hessian of P_c at λ strictly inside D_c.
pub fn cgf_hessian(lambda: TiltPoint, c: f64) -> Result<Matrix3<f64>> {
    check_correlation(c)?;
    GaussianQuadCgf::new(c)
        .tilted_covariance(&lambda.0)
        .map(GaussianQuadCgf::hessian_from_cov)
        .ok_or_else(|| CovolError::domain("lambda", lambda.0[0], "tilt is not strictly inside D_c"))
}

/// [[2, 2c², 2c], [2c², 2, 2c], [2c, 2c, 1+c²]].
pub fn cgf_hessian_at_zero(c: f64) -> Result<Matrix3<f64>> {
    check_correlation(c)?;
    Ok(Matrix3::new(
        2.0,
        2.0 * c * c,
        2.0 * c,
        2.0 * c * c,
        2.0,
        2.0 * c,
        2.0 * c,
        2.0 * c,
        1.0 + c * c,
    ))
}

/// P*_c(x); finite iff x₁ > 0, x₂ > 0 and x₁x₂ > x₃².
pub fn legendre_pointwise(x: [f64; 3], c: f64) -> Result<f64> {
    check_correlation(c)?;
    Ok(GaussianQuadCgf::new(c).legendre(&x))
}

/// Closed-form maximizer λ*(x) of ⟨λ,x⟩ − P_c(λ), when P*_c(x) is finite.
pub fn legendre_argmax(x: [f64; 3], c: f64) -> Result<Option<TiltPoint>> {
    check_correlation(c)?;
    Ok(GaussianQuadCgf::new(c).legendre_argmax(&x).map(TiltPoint))
}

/// Recession function of P*_c: lim_{h→∞} P*_c(hx)/h.
pub fn recession(x: [f64; 3], c: f64) -> Result<f64> {
    check_correlation(c)?;
    if x == [0.0; 3] {
        return Ok(0.0);
    }
    if x[0] > 0.0 && x[1] > 0.0 && x[2] * x[2] < x[0] * x[1] {
        Ok((x[0] + x[1] - 2.0 * c * x[2]) / (2.0 * (1.0 - c * c)))
    } else {
        Ok(f64::INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn domain_examples() {
        for c in [-0.9, 0.0, 0.5] {
            assert!(in_domain(TiltPoint([0.0; 3]), c).unwrap());
        }
        assert!(!in_domain(TiltPoint([0.5, 0.0, 0.0]), 0.0).unwrap());
        assert!(in_domain(TiltPoint([0.0, 0.0, 0.999]), 0.0).unwrap());
        assert!(!in_domain(TiltPoint([0.0, 0.0, 1.001]), 0.0).unwrap());
        assert!(in_domain(TiltPoint([0.0; 3]), 1.0).is_err());
    }

    #[test]
    fn cgf_examples() {
        assert_eq!(cgf_pointwise(TiltPoint([0.0; 3]), 0.7).unwrap(), 0.0);
        let v = cgf_pointwise(TiltPoint([0.25, 0.0, 0.0]), 0.0).unwrap();
        assert!((v - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(cgf_pointwise(TiltPoint([0.6, 0.0, 0.0]), 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn gradient_examples() {
        let g = cgf_gradient(TiltPoint([0.0; 3]), 0.3).unwrap();
        assert_eq!(g, [1.0, 1.0, 0.3]);
        let g = cgf_gradient(TiltPoint([0.25, 0.0, 0.0]), 0.0).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15 && g[2].abs() < 1e-15);
        assert!(cgf_gradient(TiltPoint([0.5, 0.0, 0.0]), 0.0).is_err());
    }

    #[test]
    fn hessian_examples() {
        let h = cgf_hessian_at_zero(0.0).unwrap();
        assert_eq!(h, Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 2.0, 1.0)));
        let h = cgf_hessian_at_zero(0.5).unwrap();
        let want = Matrix3::new(2.0, 0.5, 1.0, 0.5, 2.0, 1.0, 1.0, 1.0, 1.25);
        assert!((h - want).abs().max() < 1e-15);
        let at_zero = cgf_hessian(TiltPoint([0.0; 3]), 0.5).unwrap();
        assert!((at_zero - want).abs().max() < 1e-15);
    }

    #[test]
    fn legendre_examples() {
        for c in [-0.5, 0.0, 0.8] {
            assert!(legendre_pointwise([1.0, 1.0, c], c).unwrap().abs() < 1e-15);
        }
        let near = legendre_pointwise([1.0, 1.0, -1.0 + 1e-9], 0.0).unwrap();
        assert!(near.is_finite() && near > 5.0);
        assert_eq!(legendre_pointwise([1.0, 1.0, -1.0], 0.0).unwrap(), f64::INFINITY);
        let v = legendre_pointwise([1.5, 1.0, 0.0], 0.0).unwrap();
        assert!((v - (0.25 - 0.5 * 1.5f64.ln())).abs() < 1e-15);
        assert!((v - 0.047_268).abs() < 1e-6);
    }

    #[test]
    fn recession_examples() {
        assert!((recession([1.0, 1.0, 0.4], 0.4).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(recession([0.0; 3], 0.4).unwrap(), 0.0);
        assert_eq!(recession([2.0, 2.0, 1.0], 0.0).unwrap(), 2.0);
        let h = 1e6;
        let lim = legendre_pointwise([2.0 * h, 2.0 * h, h], 0.0).unwrap() / h;
        assert!((lim - 2.0).abs() < 1e-4);
        assert_eq!(recession([1.0, -1.0, 0.0], 0.0).unwrap(), f64::INFINITY);
    }

    /// Independent oracle: maximize ⟨λ,x⟩ − P_c(λ) by a shrinking coordinate
    /// grid search around the origin-free starting box.
    fn grid_sup(x: [f64; 3], c: f64) -> f64 {
        let f = |l: [f64; 3]| {
            let p = cgf_pointwise(TiltPoint(l), c).unwrap();
            l[0] * x[0] + l[1] * x[1] + l[2] * x[2] - p
        };
        let mut centre = [0.0; 3];
        let mut width = 4.0 / (1.0 - c * c);
        let mut best = f(centre);
        for _ in 0..60 {
            let steps = 6;
            let mut next = centre;
            for i in -steps..=steps {
                for j in -steps..=steps {
                    for k in -steps..=steps {
                        let s = width / steps as f64;
                        let l = [
                            centre[0] + i as f64 * s,
                            centre[1] + j as f64 * s,
                            centre[2] + k as f64 * s,
                        ];
                        let v = f(l);
                        if v > best {
                            best = v;
                            next = l;
                        }
                    }
                }
            }
            centre = next;
            width *= 0.5;
        }
        best
    }

    #[test]
    fn grid_duality_on_sample_points() {
        for &(x, c) in &[
            ([1.5, 1.0, 0.0], 0.0),
            ([0.8, 1.3, 0.4], 0.5),
            ([1.1, 0.6, -0.7], -0.5),
            ([2.0, 0.9, 1.2], 0.9),
        ] {
            let closed = legendre_pointwise(x, c).unwrap();
            let numeric = grid_sup(x, c);
            assert!((closed - numeric).abs() < 1e-5, "x={x:?} c={c}: {closed} vs {numeric}");
            let arg = legendre_argmax(x, c).unwrap().unwrap();
            let at_arg = arg.0.iter().zip(x.iter()).map(|(l, v)| l * v).sum::<f64>()
                - cgf_pointwise(arg, c).unwrap();
            assert!((at_arg - closed).abs() < 1e-12);
        }
    }

    fn interior_tilt(c: f64) -> impl Strategy<Value = [f64; 3]> {
        let bound = 0.45 / (1.0 - c * c);
        prop::array::uniform3(-bound..bound).prop_filter("inside D_c", move |l| {
            GaussianQuadCgf::new(c).boundary_margin(l) > 1e-3
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn convexity(c in -0.9..0.9f64, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
            let cgf = GaussianQuadCgf::new(c);
            let bound = 0.45 / (1.0 - c * c);
            let mut draw = || loop {
                let l = [rng.random_range(-bound..bound), rng.random_range(-bound..bound), rng.random_range(-bound..bound)];
                if cgf.contains(&l) { return l; }
            };
            let (l, m) = (draw(), draw());
            let alpha: f64 = rng.random_range(0.01..0.99);
            let mix = [0, 1, 2].map(|i| alpha * l[i] + (1.0 - alpha) * m[i]);
            prop_assert!(cgf.value(&mix) <= alpha * cgf.value(&l) + (1.0 - alpha) * cgf.value(&m) + 1e-12);
        }

        #[test]
        fn gradient_matches_central_differences(c in -0.9..0.9f64, l in interior_tilt(0.0)) {
            let cgf = GaussianQuadCgf::new(c);
            prop_assume!(cgf.boundary_margin(&l) > 0.05);
            let g = cgf.gradient(&l).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                let mut up = l; up[i] += h;
                let mut dn = l; dn[i] -= h;
                let fd = (cgf.value(&up) - cgf.value(&dn)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() < 1e-6 * g[i].abs().max(1.0), "i={} fd={} g={}", i, fd, g[i]);
            }
        }
    }
}

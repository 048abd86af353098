//! Green's functions of the 2D Helmholtz operator and the terms of their
//! low-frequency expansion
//! `Φ_ω = τ_ω + G₀ + ω² log ω · G₁ + ω² G₂ + O(ω⁴ log ω)`.
//!
//! Normal derivatives are always taken in the first argument, `∂_{ν_x}`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{dot, norm, sub, CurvePoint, Point};
use crate::specfun::{cylinder01, EULER_GAMMA};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `c_γ = (γ − ½)/(4π) − i/8`.
pub const C_GAMMA: Complex64 = Complex64::new((EULER_GAMMA - 0.5) / (4.0 * PI), -0.125);

/// Coefficient of `|x − y|²` in `G₂`: `(γ − 1)/(8π) − i/16`.
///
/// Satisfies `c_γ = 1/(8π) + 2 c_sl`, so that `∂_ν G₂` carries exactly the
/// `c_γ (x − y)·ν` term.
pub const C_SL: Complex64 = Complex64::new((EULER_GAMMA - 1.0) / (8.0 * PI), -0.0625);

/// Scalar constants of the low-frequency expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    pub gamma: f64,
    pub c_gamma: Complex64,
    pub c_sl: Complex64,
}

impl Default for KernelConstants {
    fn default() -> Self {
        Self {
            gamma: EULER_GAMMA,
            c_gamma: C_GAMMA,
            c_sl: C_SL,
        }
    }
}

impl KernelConstants {
    pub fn tau(&self, omega: Complex64) -> Complex64 {
        tau(omega)
    }
}

/// `τ_ω = −log ω/(2π) + i/4 − (γ − log 2)/(2π)` on the principal branch.
pub fn tau(omega: Complex64) -> Complex64 {
    -omega.ln() / (2.0 * PI) + I * 0.25 - (EULER_GAMMA - LN_2) / (2.0 * PI)
}

fn separation(x: Point, y: Point) -> Result<(Point, f64)> {
    let diff = sub(x, y);
    let r = norm(diff);
    if r == 0.0 {
        return Err(Error::Domain("kernel evaluated at coincident points".into()));
    }
    Ok((diff, r))
}

/// `Φ_ω(x, y) = (i/4) H₀⁽¹⁾(ω|x − y|)`.
pub fn phi_omega(omega: Complex64, x: Point, y: Point) -> Result<Complex64> {
    let (_, r) = separation(x, y)?;
    if omega.norm() == 0.0 {
        return Err(Error::Domain("frequency must be nonzero".into()));
    }
    Ok(I * 0.25 * cylinder01(omega * r)?.h0())
}

/// `∂_{ν_x} Φ_ω(x, y) = −(iω/4) H₁⁽¹⁾(ω r) (x − y)·ν_x / r`.
pub fn dnu_phi_omega(omega: Complex64, x: Point, y: Point, nu_x: Point) -> Result<Complex64> {
    let (diff, r) = separation(x, y)?;
    if omega.norm() == 0.0 {
        return Err(Error::Domain("frequency must be nonzero".into()));
    }
    let d = dot(diff, nu_x);
    Ok(-I * omega * 0.25 * cylinder01(omega * r)?.h1() * (d / r))
}

/// Order of a static kernel in the expansion.
fn check_order(k: u8) -> Result<()> {
    if k <= 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("static kernel order must be 0, 1 or 2, got {k}")))
    }
}

/// `G₀ = −log r/(2π)`, `G₁ = r²/(8π)`, `G₂ = G₁ log(r/2) + c_sl r²`.
pub fn g_k(k: u8, x: Point, y: Point) -> Result<Complex64> {
    check_order(k)?;
    let r = norm(sub(x, y));
    if r == 0.0 && k != 1 {
        if k == 2 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::Domain("G_0 is singular at coincident points".into()));
    }
    let r2 = r * r;
    Ok(match k {
        0 => Complex64::new(-r.ln() / (2.0 * PI), 0.0),
        1 => Complex64::new(r2 / (8.0 * PI), 0.0),
        _ => r2 / (8.0 * PI) * (r / 2.0).ln() + C_SL * r2,
    })
}

/// `∂_{ν_x} G_k`. For `k ∈ {1, 2}` the value at coincident points is 0.
pub fn dnu_g_k(k: u8, x: Point, y: Point, nu_x: Point) -> Result<Complex64> {
    check_order(k)?;
    let diff = sub(x, y);
    let r = norm(diff);
    let d = dot(diff, nu_x);
    if r == 0.0 {
        if k == 0 {
            return Err(Error::Domain("∂νG_0 is singular at coincident points".into()));
        }
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(match k {
        0 => Complex64::new(-d / (2.0 * PI * r * r), 0.0),
        1 => Complex64::new(d / (4.0 * PI), 0.0),
        _ => d / (4.0 * PI) * (r / 2.0).ln() + C_GAMMA * d,
    })
}

/// Kernels on a boundary, with their diagonal limits.
///
/// `x` carries the normal; `y` is the integration point. On a single smooth
/// curve the coincident-point limits come from the local expansion
/// `x(φ) − x(θ) ≈ x'h + x''h²/2`.
pub mod boundary {
    use super::*;

    /// `(x − y)·ν_x` and `|x − y|`.
    #[inline]
    pub fn geometry(x: &CurvePoint, y: &CurvePoint) -> (f64, f64) {
        let diff = sub(x.x, y.x);
        (dot(diff, x.normal), norm(diff))
    }

    /// Limit of `(x − y)·ν_x / |x − y|²` as y → x along the curve.
    #[inline]
    pub fn curvature_limit(x: &CurvePoint) -> f64 {
        -dot(x.second, x.normal) / (2.0 * x.speed * x.speed)
    }

    /// `∂_{ν_x} G₀`, with diagonal value `x''·ν/(4π s²)`.
    pub fn dnu_g0(x: &CurvePoint, y: &CurvePoint, diagonal: bool) -> f64 {
        let ratio = if diagonal {
            curvature_limit(x)
        } else {
            let (d, r) = geometry(x, y);
            d / (r * r)
        };
        -ratio / (2.0 * PI)
    }

    /// `∂_{ν_x} G₁ = (x − y)·ν_x/(4π)`.
    pub fn dnu_g1(x: &CurvePoint, y: &CurvePoint) -> f64 {
        geometry(x, y).0 / (4.0 * PI)
    }

    /// `∂_{ν_x} Φ_ω − ∂_{ν_x} G₀ = −(iω/4)(d/r)[H₁(ωr) + 2i/(πωr)]`, free of the
    /// small-argument cancellation in the difference. Zero on the diagonal.
    pub fn dnu_phi_minus_g0(omega: Complex64, x: &CurvePoint, y: &CurvePoint) -> Result<Complex64> {
        let (d, r) = geometry(x, y);
        if r == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let c = cylinder01(omega * r)?;
        Ok(-I * omega * 0.25 * (d / r) * c.h1_regular())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_reference_value() {
        let v = phi_omega(c(1.0, 0.0), [0.0, 0.0], [1.0, 0.0]).unwrap();
        let expected = I * 0.25 * c(0.765_197_686_557_966_6, 0.088_256_964_215_676_96);
        assert!((v - expected).norm() < 1e-14);
        assert!(phi_omega(c(1.0, 0.0), [1.0, 2.0], [1.0, 2.0]).is_err());
    }

    #[test]
    fn static_kernels() {
        assert!(g_k(0, [0.0, 0.0], [1.0, 0.0]).unwrap().norm() < 1e-16);
        let g1 = g_k(1, [0.0, 0.0], [2.0, 0.0]).unwrap();
        assert!((g1.re - 1.0 / (2.0 * PI)).abs() < 1e-16);
        let d1 = dnu_g_k(1, [1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]).unwrap();
        assert!((d1.re - 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert!(g_k(0, [0.0, 0.0], [0.0, 0.0]).is_err());
        assert!(dnu_g_k(0, [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]).is_err());
        assert_eq!(dnu_g_k(2, [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]).unwrap(), c(0.0, 0.0));
        assert!(g_k(3, [0.0, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn constants_are_consistent() {
        assert!((C_GAMMA - (1.0 / (8.0 * PI) + 2.0 * C_SL)).norm() < 1e-17);
    }

    #[test]
    fn low_frequency_limit() {
        let (x, y) = ([0.3, 0.1], [-0.4, 0.5]);
        let omega = c(1e-6, 0.0);
        let phi = phi_omega(omega, x, y).unwrap();
        let lead = tau(omega) + g_k(0, x, y).unwrap();
        assert!((phi - lead).norm() < 1e-10);
    }

    #[test]
    fn dnu_phi_difference_is_consistent() {
        let curve = crate::geometry::BoundaryCurve::ellipse([0.0, 0.0], [1.5, 0.8], 0.2).unwrap();
        let (x, y) = (curve.eval(0.4), curve.eval(2.9));
        let omega = c(0.7, -0.05);
        let full = dnu_phi_omega(omega, x.x, y.x, x.normal).unwrap();
        let split = boundary::dnu_phi_minus_g0(omega, &x, &y).unwrap() + boundary::dnu_g0(&x, &y, false);
        assert!((full - split).norm() < 1e-14);
    }

    #[test]
    fn double_layer_diagonal_limit() {
        let curve = crate::geometry::BoundaryCurve::ellipse([0.0, 0.0], [1.5, 0.8], 0.2).unwrap();
        let x = curve.eval(1.1);
        let limit = boundary::dnu_g0(&x, &x, true);
        let y = curve.eval(1.1 + 1e-5);
        assert!((boundary::dnu_g0(&x, &y, false) - limit).abs() < 1e-5 * limit.abs());
        let circle = crate::geometry::BoundaryCurve::circle([0.0, 0.0], 2.0).unwrap();
        let p = circle.eval(0.3);
        assert!((boundary::dnu_g0(&p, &p, true) + 1.0 / (8.0 * PI)).abs() < 1e-16);
    }
}

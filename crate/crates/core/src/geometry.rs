//! Smooth closed boundary curves and multi-resonator configurations.
//!
//! Every curve is a 2π-periodic, counterclockwise parametrization `x(θ)`.
//! The outward normal is the unit tangent rotated by −π/2.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Shape family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveKind {
    Circle {
        center: Point,
        radius: f64,
    },
    /// Semi-axes `(p, q)` rotated counterclockwise by `rotation` radians.
    Ellipse {
        center: Point,
        semi_axes: [f64; 2],
        #[serde(default)]
        rotation: f64,
    },
    /// Radius `r0 (1 + ε cos kθ)` about `center`.
    Star {
        center: Point,
        base_radius: f64,
        amplitude: f64,
        lobes: u32,
    },
}

/// Position and derivatives of a curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: Point,
    pub tangent: Point,
    pub second: Point,
    pub normal: Point,
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundaryCurve {
    kind: CurveKind,
}

impl BoundaryCurve {
    pub fn new(kind: CurveKind) -> Result<Self> {
        let ok = match kind {
            CurveKind::Circle { center, radius } => finite(&center) && radius > 0.0,
            CurveKind::Ellipse {
                center,
                semi_axes,
                rotation,
            } => finite(&center) && semi_axes[0] > 0.0 && semi_axes[1] > 0.0 && rotation.is_finite(),
            CurveKind::Star {
                center,
                base_radius,
                amplitude,
                lobes,
            } => {
                finite(&center)
                    && base_radius > 0.0
                    && amplitude.abs() < 1.0
                    && (lobes > 0 || amplitude == 0.0)
                    && star_is_simple(amplitude, lobes)
            }
        };
        if ok {
            Ok(Self { kind })
        } else {
            Err(Error::Config(format!("invalid curve parameters: {kind:?}")))
        }
    }

    pub fn circle(center: Point, radius: f64) -> Result<Self> {
        Self::new(CurveKind::Circle { center, radius })
    }

    pub fn ellipse(center: Point, semi_axes: [f64; 2], rotation: f64) -> Result<Self> {
        Self::new(CurveKind::Ellipse {
            center,
            semi_axes,
            rotation,
        })
    }

    pub fn star(center: Point, base_radius: f64, amplitude: f64, lobes: u32) -> Result<Self> {
        Self::new(CurveKind::Star {
            center,
            base_radius,
            amplitude,
            lobes,
        })
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn center(&self) -> Point {
        match self.kind {
            CurveKind::Circle { center, .. }
            | CurveKind::Ellipse { center, .. }
            | CurveKind::Star { center, .. } => center,
        }
    }

    /// Radius if this is a circle.
    pub fn as_circle(&self) -> Option<(Point, f64)> {
        match self.kind {
            CurveKind::Circle { center, radius } => Some((center, radius)),
            _ => None,
        }
    }

    pub fn eval(&self, theta: f64) -> CurvePoint {
        let (s, c) = theta.sin_cos();
        let (x, d1, d2) = match self.kind {
            CurveKind::Circle { center, radius } => (
                [center[0] + radius * c, center[1] + radius * s],
                [-radius * s, radius * c],
                [-radius * c, -radius * s],
            ),
            CurveKind::Ellipse {
                center,
                semi_axes: [p, q],
                rotation,
            } => {
                let (sr, cr) = rotation.sin_cos();
                let rot = |v: Point| [cr * v[0] - sr * v[1], sr * v[0] + cr * v[1]];
                let x = rot([p * c, q * s]);
                (
                    [center[0] + x[0], center[1] + x[1]],
                    rot([-p * s, q * c]),
                    rot([-p * c, -q * s]),
                )
            }
            CurveKind::Star {
                center,
                base_radius,
                amplitude,
                lobes,
            } => {
                let k = lobes as f64;
                let (sk, ck) = (k * theta).sin_cos();
                let rho = base_radius * (1.0 + amplitude * ck);
                let drho = -base_radius * amplitude * k * sk;
                let ddrho = -base_radius * amplitude * k * k * ck;
                (
                    [center[0] + rho * c, center[1] + rho * s],
                    [drho * c - rho * s, drho * s + rho * c],
                    [
                        ddrho * c - 2.0 * drho * s - rho * c,
                        ddrho * s + 2.0 * drho * c - rho * s,
                    ],
                )
            }
        };
        let speed = norm(d1);
        CurvePoint {
            x,
            tangent: d1,
            second: d2,
            normal: [d1[1] / speed, -d1[0] / speed],
            speed,
        }
    }

    /// Perimeter by the trapezoidal rule on the speed.
    pub fn perimeter(&self) -> f64 {
        if let CurveKind::Circle { radius, .. } = self.kind {
            return 2.0 * PI * radius;
        }
        converged_periodic_integral(|t| self.eval(t).speed)
    }

    /// Enclosed area via ½∮(x dy − y dx).
    pub fn area(&self) -> f64 {
        if let CurveKind::Circle { radius, .. } = self.kind {
            return PI * radius * radius;
        }
        let c = self.center();
        converged_periodic_integral(|t| {
            let p = self.eval(t);
            let r = sub(p.x, c);
            0.5 * (r[0] * p.tangent[1] - r[1] * p.tangent[0])
        })
    }

    /// Largest distance between two curve points (sampled).
    pub fn diameter(&self) -> f64 {
        match self.kind {
            CurveKind::Circle { radius, .. } => 2.0 * radius,
            CurveKind::Ellipse { semi_axes, .. } => 2.0 * semi_axes[0].max(semi_axes[1]),
            CurveKind::Star {
                base_radius,
                amplitude,
                ..
            } => 2.0 * base_radius * (1.0 + amplitude.abs()),
        }
    }

    /// Polygon of `m` equispaced parameter samples.
    pub fn sample(&self, m: usize) -> Vec<Point> {
        (0..m)
            .map(|q| self.eval(2.0 * PI * q as f64 / m as f64).x)
            .collect()
    }

    /// Winding-number test against a dense polygon of the curve.
    pub fn contains(&self, p: Point) -> bool {
        let poly = self.sample(1024);
        let mut winding = 0i32;
        for k in 0..poly.len() {
            let a = poly[k];
            let b = poly[(k + 1) % poly.len()];
            let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
            if a[1] <= p[1] {
                if b[1] > p[1] && cross > 0.0 {
                    winding += 1;
                }
            } else if b[1] <= p[1] && cross < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }
}

fn finite(p: &Point) -> bool {
    p[0].is_finite() && p[1].is_finite()
}

/// A star curve with radius `r0(1+ε cos kθ)` is always simple for |ε| < 1,
/// since it is a graph over the angle.
fn star_is_simple(amplitude: f64, _lobes: u32) -> bool {
    amplitude.abs() < 1.0
}

/// Trapezoidal rule for a smooth periodic integrand, doubling until stable.
fn converged_periodic_integral(f: impl Fn(f64) -> f64) -> f64 {
    let mut m = 64;
    let mut prev = f64::NAN;
    loop {
        let h = 2.0 * PI / m as f64;
        let sum: f64 = (0..m).map(|q| f(q as f64 * h)).sum::<f64>() * h;
        if (sum - prev).abs() <= 1e-15 * sum.abs() || m >= 1 << 16 {
            return sum;
        }
        prev = sum;
        m *= 2;
    }
}

/// Closest approach between two curves: coarse sampling then local refinement.
pub fn curve_distance(a: &BoundaryCurve, b: &BoundaryCurve) -> f64 {
    let m = 256;
    let pa = a.sample(m);
    let pb = b.sample(m);
    let mut best = (f64::INFINITY, 0usize, 0usize);
    for (i, x) in pa.iter().enumerate() {
        for (j, y) in pb.iter().enumerate() {
            let d = norm(sub(*x, *y));
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    let h = 2.0 * PI / m as f64;
    let (mut s, mut t) = (best.1 as f64 * h, best.2 as f64 * h);
    let dist = |s: f64, t: f64| norm(sub(a.eval(s).x, b.eval(t).x));
    // alternating golden-section refinement in each parameter
    for _ in 0..30 {
        s = golden_min(|u| dist(u, t), s - h, s + h);
        t = golden_min(|u| dist(s, u), t - h, t + h);
    }
    dist(s, t).min(best.0)
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Relative separation threshold: curves closer than this fraction of the
/// largest diameter are rejected.
pub const MIN_SEPARATION_FRACTION: f64 = 1e-6;

/// N disjoint resonators plus contrast and discretization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorSystem {
    curves: Vec<BoundaryCurve>,
    perimeters: Vec<f64>,
    areas: Vec<f64>,
    delta: f64,
    f: usize,
    q: usize,
}

/// Smallest admissible quadrature size for truncation order `f`.
pub fn auto_quadrature(f: usize) -> usize {
    let q = 4 * (f + 4);
    q + q % 2
}

impl ResonatorSystem {
    pub fn new(curves: Vec<BoundaryCurve>, delta: f64, f: usize, q: usize) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::Config("at least one resonator is required".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("contrast must be positive, got {delta}")));
        }
        if !q.is_multiple_of(2) || q < auto_quadrature(f) {
            return Err(Error::Parameter(format!(
                "quadrature size Q = {q} must be even and at least 4(F+4) = {}",
                auto_quadrature(f)
            )));
        }
        if curves.len() >= 2 {
            check_disjoint(&curves)?;
        }
        let perimeters = curves.iter().map(BoundaryCurve::perimeter).collect();
        let areas = curves.iter().map(BoundaryCurve::area).collect();
        Ok(Self {
            curves,
            perimeters,
            areas,
            delta,
            f,
            q,
        })
    }

    pub fn curves(&self) -> &[BoundaryCurve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn truncation(&self) -> usize {
        self.f
    }

    pub fn quadrature(&self) -> usize {
        self.q
    }

    pub fn perimeter(&self, j: usize) -> f64 {
        self.perimeters[j]
    }

    pub fn area(&self, j: usize) -> f64 {
        self.areas[j]
    }

    pub fn all_circles(&self) -> bool {
        self.curves.iter().all(|c| c.as_circle().is_some())
    }

    /// Number of Fourier modes per curve, `2F + 1`.
    pub fn modes(&self) -> usize {
        2 * self.f + 1
    }

    /// Size of one density block, `N(2F + 1)`.
    pub fn block_dim(&self) -> usize {
        self.len() * self.modes()
    }

    /// Flat index of mode `m ∈ [−F, F]` on curve `j`.
    pub fn index(&self, j: usize, m: i64) -> usize {
        j * self.modes() + (m + self.f as i64) as usize
    }

    /// Same geometry with a different contrast.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("contrast must be positive, got {delta}")));
        }
        Ok(Self {
            delta,
            ..self.clone()
        })
    }

    /// Same geometry with a different truncation; `q = None` picks `4(F+4)`
    /// or keeps the current Q if that is larger.
    pub fn with_truncation(&self, f: usize, q: Option<usize>) -> Result<Self> {
        let q = q.unwrap_or_else(|| self.q.max(auto_quadrature(f)));
        Self::new(self.curves.clone(), self.delta, f, q)
    }

    pub fn min_separation(&self) -> Result<f64> {
        min_separation(&self.curves)
    }
}

/// Smallest distance between any two distinct curves.
pub fn min_separation(curves: &[BoundaryCurve]) -> Result<f64> {
    if curves.len() < 2 {
        return Err(Error::InvalidArgument(
            "separation needs at least two curves".into(),
        ));
    }
    check_disjoint(curves)
}

fn check_disjoint(curves: &[BoundaryCurve]) -> Result<f64> {
    let diameter = curves.iter().map(BoundaryCurve::diameter).fold(0.0, f64::max);
    let threshold = MIN_SEPARATION_FRACTION * diameter;
    let mut best = f64::INFINITY;
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            let nested = curves[j].contains(curves[i].eval(0.0).x)
                || curves[i].contains(curves[j].eval(0.0).x);
            let d = curve_distance(&curves[i], &curves[j]);
            if nested || d < threshold {
                return Err(Error::Config(format!(
                    "resonators {} and {} overlap (separation {d:.3e})",
                    i + 1,
                    j + 1
                )));
            }
            best = best.min(d);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle_point() {
        let c = BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap();
        let p = c.eval(0.0);
        assert!((p.x[0] - 1.0).abs() < 1e-15 && p.x[1].abs() < 1e-15);
        assert!((p.normal[0] - 1.0).abs() < 1e-15 && p.normal[1].abs() < 1e-15);
        assert!((p.speed - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ellipse_point() {
        let e = BoundaryCurve::ellipse([0.0, 0.0], [2.0, 1.0], 0.0).unwrap();
        let p = e.eval(PI / 2.0);
        assert!(p.x[0].abs() < 1e-15 && (p.x[1] - 1.0).abs() < 1e-15);
        assert!((p.speed - 2.0).abs() < 1e-15);
        assert!((e.area() - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn degenerate_star_is_circle() {
        let s = BoundaryCurve::star([0.3, -0.2], 1.0, 0.0, 3).unwrap();
        let c = BoundaryCurve::circle([0.3, -0.2], 1.0).unwrap();
        for k in 0..17 {
            let t = 0.37 * k as f64;
            let (a, b) = (s.eval(t), c.eval(t));
            assert!(norm(sub(a.x, b.x)) < 1e-15);
            assert!(norm(sub(a.normal, b.normal)) < 1e-15);
            assert!((a.speed - b.speed).abs() < 1e-15);
        }
    }

    #[test]
    fn circle_measures() {
        let c = BoundaryCurve::circle([1.0, 1.0], 2.0).unwrap();
        assert!((c.perimeter() - 4.0 * PI).abs() < 1e-14);
        assert!((c.area() - 4.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn star_area() {
        let eps = 0.1;
        let s = BoundaryCurve::star([0.0, 0.0], 1.0, eps, 3).unwrap();
        assert!((s.area() - PI * (1.0 + eps * eps / 2.0)).abs() < 1e-13);
    }

    #[test]
    fn ellipse_perimeter_series() {
        // Gauss–Kummer series in h = ((p-q)/(p+q))^2
        let (p, q) = (2.0f64, 1.0f64);
        let h = ((p - q) / (p + q)).powi(2);
        let mut coeff = 1.0f64; // binomial(1/2, n)^2
        let mut sum = 1.0;
        for n in 1..60 {
            let nf = n as f64;
            coeff *= ((1.5 - nf) / nf).powi(2);
            sum += coeff * h.powi(n);
        }
        let reference = PI * (p + q) * sum;
        let e = BoundaryCurve::ellipse([0.0, 0.0], [p, q], 0.4).unwrap();
        assert!((e.perimeter() - reference).abs() < 1e-12 * reference);
    }

    #[test]
    fn separation_and_overlap() {
        let a = BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap();
        let b = BoundaryCurve::circle([3.0, 0.0], 1.0).unwrap();
        assert!((min_separation(&[a, b]).unwrap() - 1.0).abs() < 1e-10);
        let inner = BoundaryCurve::circle([0.1, 0.0], 0.5).unwrap();
        let err = min_separation(&[a, inner]).unwrap_err();
        assert!(err.to_string().contains("resonators 1 and 2"));
        let crossing = BoundaryCurve::circle([1.5, 0.0], 1.0).unwrap();
        assert!(min_separation(&[a, crossing]).is_err());
    }

    #[test]
    fn near_touching_ellipses_match_brute_force() {
        let a = BoundaryCurve::ellipse([0.0, 0.0], [2.0, 1.0], 0.3).unwrap();
        let b = BoundaryCurve::ellipse([4.2, 1.0], [1.5, 0.7], -0.5).unwrap();
        let d = min_separation(&[a, b]).unwrap();
        let m = 10_000;
        let pa = a.sample(m);
        let pb = b.sample(m);
        let mut brute = f64::INFINITY;
        for x in &pa {
            for y in &pb {
                brute = brute.min(norm(sub(*x, *y)));
            }
        }
        assert!(d > 0.0 && (d - brute).abs() < 1e-3);
    }

    #[test]
    fn system_validation() {
        let a = BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap();
        assert!(ResonatorSystem::new(vec![a], 1e-3, 3, 27).is_err());
        assert!(ResonatorSystem::new(vec![a], 1e-3, 3, 26).is_err());
        assert!(ResonatorSystem::new(vec![a], -1.0, 3, 28).is_err());
        let s = ResonatorSystem::new(vec![a], 1e-3, 3, 28).unwrap();
        assert_eq!(s.block_dim(), 7);
        assert_eq!(s.index(0, -3), 0);
        assert!(BoundaryCurve::star([0.0, 0.0], 1.0, 1.2, 3).is_err());
    }
}

//! Boundary eigenmodes and near fields of computed resonances.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, Point, ResonatorSystem};
use crate::quadrature::CurveGrid;
use crate::solver::ResonanceBranch;
use crate::specfun::cylinder01;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Density `u(x) = Σ_n c_{j,n} e^{inθ_j}/√|∂D_j|` on each boundary.
#[derive(Debug, Clone)]
pub struct BoundaryMode {
    pub f: usize,
    /// `coeffs[j][n + F]`.
    pub coeffs: Vec<Vec<Complex64>>,
    pub perimeters: Vec<f64>,
}

impl BoundaryMode {
    pub fn eval(&self, j: usize, theta: f64) -> Complex64 {
        let f = self.f as i32;
        let sum: Complex64 = self.coeffs[j]
            .iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::from_polar(1.0, (k as i32 - f) as f64 * theta))
            .sum();
        sum / self.perimeters[j].sqrt()
    }

    /// `‖u‖_{L²(∂D)}` by the trapezoidal rule on `grids`.
    fn l2_norm(&self, grids: &[CurveGrid]) -> f64 {
        let mut total = 0.0;
        for (j, g) in grids.iter().enumerate() {
            let q = g.points.len();
            for (k, p) in g.points.iter().enumerate() {
                let theta = 2.0 * PI * k as f64 / q as f64;
                total += self.eval(j, theta).norm_sqr() * p.speed * 2.0 * PI / q as f64;
            }
        }
        total.sqrt()
    }
}

/// Boundary density of a branch, scaled to unit `L²(∂D)` norm.
pub fn boundary_mode(branch: &ResonanceBranch, system: &ResonatorSystem) -> Result<BoundaryMode> {
    boundary_mode_from(&branch.mode_coeffs, system)
}

pub fn boundary_mode_from(coeffs: &[Complex64], system: &ResonatorSystem) -> Result<BoundaryMode> {
    let modes = system.modes();
    if coeffs.len() != system.block_dim() {
        return Err(Error::Dimension {
            expected: system.block_dim(),
            got: coeffs.len(),
        });
    }
    let mut mode = BoundaryMode {
        f: system.truncation(),
        coeffs: coeffs.chunks(modes).map(|c| c.to_vec()).collect(),
        perimeters: (0..system.len()).map(|j| system.perimeter(j)).collect(),
    };
    let grids = eval_grids(system, (4 * system.quadrature()).max(512))?;
    let n = mode.l2_norm(&grids);
    if n > 0.0 {
        for c in mode.coeffs.iter_mut().flatten() {
            *c /= n;
        }
    }
    Ok(mode)
}

fn eval_grids(system: &ResonatorSystem, q: usize) -> Result<Vec<CurveGrid>> {
    system.curves().iter().map(|c| CurveGrid::new(c, q)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Interior,
    Exterior,
    /// Too close to a boundary for the trapezoidal rule; value copied from the
    /// nearest resolved cell.
    NearBoundary,
}

/// Sampling box and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub n_x: usize,
    pub n_y: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > self.x_min && self.y_max > self.y_min) || self.n_x < 2 || self.n_y < 2 {
            return Err(Error::InvalidArgument(format!("degenerate field grid {self:?}")));
        }
        Ok(())
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point {
        [
            self.x_min + (self.x_max - self.x_min) * ix as f64 / (self.n_x - 1) as f64,
            self.y_min + (self.y_max - self.y_min) * iy as f64 / (self.n_y - 1) as f64,
        ]
    }

    /// Box around all resonators with a margin of `pad` diameters.
    pub fn around(system: &ResonatorSystem, pad: f64, n_x: usize, n_y: usize) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        let mut diam: f64 = 0.0;
        for c in system.curves() {
            diam = diam.max(c.diameter());
            for p in c.sample(256) {
                for k in 0..2 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        let m = pad * diam;
        Self {
            x_min: lo[0] - m,
            x_max: hi[0] + m,
            y_min: lo[1] - m,
            y_max: hi[1] + m,
            n_x,
            n_y,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub omega: Complex64,
    /// `values[iy * n_x + ix]`.
    pub values: Vec<Complex64>,
    pub mask: Vec<CellKind>,
}

impl FieldGrid {
    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.spec.n_x + ix]
    }

    pub fn kind(&self, ix: usize, iy: usize) -> CellKind {
        self.mask[iy * self.spec.n_x + ix]
    }
}

/// Single-layer potential `Σ_j ∫ Φ_ω(x − y) u_j(y) ds_y` of a boundary mode,
/// by the trapezoidal rule on `q` points per curve.
pub struct LayerPotential {
    omega: Complex64,
    nodes: Vec<(Point, Complex64)>,
}

impl LayerPotential {
    pub fn new(mode: &BoundaryMode, system: &ResonatorSystem, omega: Complex64, q: usize) -> Result<Self> {
        if omega.norm() == 0.0 {
            return Err(Error::Domain("field evaluation needs ω ≠ 0".into()));
        }
        let mut nodes = Vec::new();
        for (j, g) in eval_grids(system, q)?.iter().enumerate() {
            for (k, p) in g.points.iter().enumerate() {
                let theta = 2.0 * PI * k as f64 / q as f64;
                nodes.push((p.x, mode.eval(j, theta) * p.speed * 2.0 * PI / q as f64));
            }
        }
        Ok(Self { omega, nodes })
    }

    pub fn eval(&self, x: Point) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for (y, w) in &self.nodes {
            let r = norm(sub(x, *y));
            if r == 0.0 {
                return Err(Error::Domain("evaluation point on a quadrature node".into()));
            }
            sum += cylinder01(self.omega * r)?.h0() * w;
        }
        Ok(I * 0.25 * sum)
    }
}

/// Quadrature points per curve used for grid evaluation.
pub fn field_quadrature(system: &ResonatorSystem) -> usize {
    system.quadrature().max(512)
}

/// `Re u` and the rest of the complex field on a grid.
pub fn near_field(branch: &ResonanceBranch, system: &ResonatorSystem, spec: &GridSpec) -> Result<FieldGrid> {
    spec.validate()?;
    let mode = boundary_mode(branch, system)?;
    let q = field_quadrature(system);
    let potential = LayerPotential::new(&mode, system, branch.omega, q)?;
    // polyline samples for distances; the band covers 1e-3 diameters and at
    // least five node spacings, where the trapezoidal rule loses accuracy
    let bands: Vec<(Vec<Point>, f64)> = system
        .curves()
        .iter()
        .map(|c| {
            let band = (1e-3 * c.diameter()).max(5.0 * c.perimeter() / q as f64);
            (c.sample(4 * q), band)
        })
        .collect();
    let cells: Vec<(usize, usize)> = (0..spec.n_y).flat_map(|iy| (0..spec.n_x).map(move |ix| (ix, iy))).collect();
    let evaluated: Vec<(CellKind, Complex64)> = cells
        .par_iter()
        .map(|&(ix, iy)| -> Result<(CellKind, Complex64)> {
            let x = spec.point(ix, iy);
            let near = bands
                .iter()
                .any(|(pts, band)| pts.iter().any(|p| norm(sub(x, *p)) < *band));
            if near {
                return Ok((CellKind::NearBoundary, Complex64::new(0.0, 0.0)));
            }
            let kind = if system.curves().iter().any(|c| c.contains(x)) {
                CellKind::Interior
            } else {
                CellKind::Exterior
            };
            Ok((kind, potential.eval(x)?))
        })
        .collect::<Result<_>>()?;
    let mask: Vec<CellKind> = evaluated.iter().map(|e| e.0).collect();
    let mut values: Vec<Complex64> = evaluated.iter().map(|e| e.1).collect();
    let resolved: Vec<usize> = (0..cells.len()).filter(|&k| mask[k] != CellKind::NearBoundary).collect();
    if !resolved.is_empty() {
        for k in 0..cells.len() {
            if mask[k] == CellKind::NearBoundary {
                let (ix, iy) = cells[k];
                let nearest = resolved
                    .iter()
                    .min_by_key(|&&r| {
                        let (rx, ry) = cells[r];
                        let (dx, dy) = (rx as i64 - ix as i64, ry as i64 - iy as i64);
                        (dx * dx + dy * dy, r)
                    })
                    .expect("nonempty");
                values[k] = values[*nearest];
            }
        }
    }
    Ok(FieldGrid {
        spec: *spec,
        omega: branch.omega,
        values,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{auto_quadrature, BoundaryCurve};
    use crate::solver::{BranchClass, Stage};
    use crate::specfun::hankel1;

    fn system(centers: &[[f64; 2]], f: usize) -> ResonatorSystem {
        let curves = centers.iter().map(|&c| BoundaryCurve::circle(c, 1.0).unwrap()).collect();
        ResonatorSystem::new(curves, 1e-5, f, auto_quadrature(f)).unwrap()
    }

    fn branch(coeffs: Vec<Complex64>, omega: Complex64) -> ResonanceBranch {
        ResonanceBranch {
            omega,
            branch_class: BranchClass::Logarithmic,
            stage: Stage::Refined,
            mode_coeffs: coeffs,
            sigma_min: None,
            iterations: 0,
            converged: true,
            seed: omega,
            effective: None,
        }
    }

    #[test]
    fn unit_coefficient_gives_constant_density() {
        let s = system(&[[0.0, 0.0], [3.0, 0.0]], 2);
        let mut c = vec![Complex64::new(0.0, 0.0); 10];
        c[2] = Complex64::new(1.0, 0.0);
        let mode = boundary_mode_from(&c, &s).unwrap();
        let expected = 1.0 / (2.0 * PI).sqrt();
        assert!((mode.eval(0, 0.7) - expected).norm() < 1e-14);
        assert!(mode.eval(1, 0.7).norm() < 1e-15);
        assert!(boundary_mode_from(&c[..5], &s).is_err());
    }

    #[test]
    fn normalized_to_unit_l2() {
        let e = BoundaryCurve::ellipse([0.0, 0.0], [1.4, 0.6], 0.3).unwrap();
        let s = ResonatorSystem::new(vec![e], 1e-5, 3, auto_quadrature(3)).unwrap();
        let c: Vec<Complex64> = (0..7).map(|k| Complex64::new(k as f64 - 2.0, 0.5 * k as f64)).collect();
        let mode = boundary_mode_from(&c, &s).unwrap();
        let grids = eval_grids(&s, 256).unwrap();
        assert!((mode.l2_norm(&grids) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn center_value_and_decay() {
        let s = system(&[[0.0, 0.0]], 0);
        let omega = Complex64::new(0.02, -1e-3);
        let mode = boundary_mode_from(&[Complex64::new(1.0, 0.0)], &s).unwrap();
        let pot = LayerPotential::new(&mode, &s, omega, 128).unwrap();
        let density = 1.0 / (2.0 * PI).sqrt();
        let expected = I * PI / 2.0 * hankel1(0, omega).unwrap() * density;
        assert!((pot.eval([0.0, 0.0]).unwrap() - expected).norm() < 1e-13 * expected.norm());
        assert!(pot.eval([100.0, 0.0]).unwrap().norm() < pot.eval([2.0, 0.0]).unwrap().norm());
        let zero = LayerPotential::new(&boundary_mode_from(&[Complex64::new(0.0, 0.0)], &s).unwrap(), &s, omega, 64).unwrap();
        assert_eq!(zero.eval([0.3, 0.2]).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn traces_match_circle_expansion_on_both_sides() {
        let s = system(&[[0.0, 0.0]], 2);
        let omega = Complex64::new(0.05, -1e-3);
        let c: Vec<Complex64> = [0.2, 0.5, 1.0, -0.3, 0.1].iter().map(|&v| Complex64::new(v, 0.1)).collect();
        let mode = boundary_mode_from(&c, &s).unwrap();
        let pot = LayerPotential::new(&mode, &s, omega, 4096).unwrap();
        // S[e^{imθ}] = (iπ/2) J_m(ωr_<) H_m(ωr_>) e^{imθ} for a = 1
        let exact = |r: f64, t: f64| -> Complex64 {
            (-2i32..=2)
                .map(|m| {
                    let (lo, hi) = if r < 1.0 { (r, 1.0) } else { (1.0, r) };
                    let j = crate::specfun::bessel_j(m, omega * lo).unwrap();
                    let h = hankel1(m, omega * hi).unwrap();
                    I * PI / 2.0 * j * h * mode.coeffs[0][(m + 2) as usize] / (2.0 * PI).sqrt()
                        * Complex64::from_polar(1.0, m as f64 * t)
                })
                .sum()
        };
        for t in [0.3f64, 1.9, 4.4] {
            for r in [0.99, 1.01] {
                let v = pot.eval([r * t.cos(), r * t.sin()]).unwrap();
                let e = exact(r, t);
                assert!((v - e).norm() < 1e-10 * e.norm(), "r={r} t={t}: {v} vs {e}");
            }
            assert!((exact(0.99, t) - exact(1.01, t)).norm() < 0.05 * exact(1.0, t).norm());
        }
    }

    #[test]
    fn grid_mask_and_fallback() {
        let s = system(&[[0.0, 0.0]], 1);
        let b = branch(
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            Complex64::new(0.01, -1e-4),
        );
        let spec = GridSpec::around(&s, 0.5, 41, 41);
        let g = near_field(&b, &s, &spec).unwrap();
        assert_eq!(g.kind(20, 20), CellKind::Interior);
        assert_eq!(g.kind(0, 0), CellKind::Exterior);
        // the point (1, 0) lies on the boundary
        let ix = ((1.0 - spec.x_min) / (spec.x_max - spec.x_min) * 40.0).round() as usize;
        assert_eq!(g.kind(ix, 20), CellKind::NearBoundary);
        assert!(g.value(ix, 20).norm() > 0.0);
        // refining the grid leaves shared points unchanged
        let fine = near_field(&b, &s, &GridSpec { n_x: 81, n_y: 81, ..spec }).unwrap();
        assert!((fine.value(40, 40) - g.value(20, 20)).norm() < 1e-8 * g.value(20, 20).norm());
        assert!((fine.value(0, 0) - g.value(0, 0)).norm() < 1e-8 * g.value(0, 0).norm());
    }
}

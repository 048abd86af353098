//! Closed-form leading-order resonances for small contrast δ.
//!
//! On the constant modes the effective matrix reads
//! `δI + ω² log ω K₁⁰ + ω² K₂⁰`. `K₁⁰ = σ u vᴴ` has rank one with trace `μ₁`, so
//! the problem splits along `V = span(u)` and the kernel `v^⊥` of `K₁⁰`:
//!
//! - one logarithmic branch, `ω² = −2δ / (μ₁ log δ − μ₁ log(−½ μ₁ log δ) + 2α)`
//!   with `α = vᴴK₂⁰u / vᴴu`;
//! - `N − 1` regular branches, `ω_j² = −δ/ν_j` with `ν_j` the eigenvalues of
//!   `B = (UᴴY)⁻¹ UᴴK₂⁰Y`, where `Y` spans `v^⊥` and `U` spans `u^⊥`.
//!
//! The overall signs follow the orientation of `K₂⁰` used in this crate.

use log::warn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, eig, singular_values, solve, CMatrix, CVector};

/// Largest δ treated as asymptotic.
pub const DELTA_MAX: f64 = 1e-2;

/// Whether a seed belongs to the logarithmic or to a regular branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchClass {
    Logarithmic,
    Regular,
}

#[derive(Debug, Clone)]
pub struct BranchSeeds {
    pub mu1: f64,
    pub alpha: Complex64,
    /// Eigenvalues of `B`, ordered by `|δ/ν|` ascending then by argument.
    pub b_eigs: Vec<Complex64>,
    pub omega_log: Complex64,
    pub omega_reg: Vec<Complex64>,
    /// Unit vectors in `ℂᴺ` over the constant modes: the log branch first,
    /// then the regular branches in the order of `omega_reg`.
    pub null_vectors: Vec<CVector>,
}

impl BranchSeeds {
    pub fn len(&self) -> usize {
        1 + self.omega_reg.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(ω, class, null vector)` for every branch, log branch first.
    pub fn branches(&self) -> Vec<(Complex64, BranchClass, &CVector)> {
        std::iter::once((self.omega_log, BranchClass::Logarithmic))
            .chain(self.omega_reg.iter().map(|&w| (w, BranchClass::Regular)))
            .zip(&self.null_vectors)
            .map(|((w, c), v)| (w, c, v))
            .collect()
    }

    /// Null vectors embedded into the `N(2F+1)` Galerkin space on the
    /// constant modes `(j, 0)`.
    pub fn lifted(&self, f: usize) -> Vec<CVector> {
        let modes = 2 * f + 1;
        self.null_vectors
            .iter()
            .map(|v| {
                let mut out = CVector::zeros(v.len() * modes);
                for (j, c) in v.iter().enumerate() {
                    out[j * modes + f] = *c;
                }
                out
            })
            .collect()
    }
}

/// Square root with `Re ≥ 0`.
fn right_sqrt(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

fn normalized(v: CVector) -> CVector {
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Leading-order seeds from the constant-mode matrices `K₁⁰`, `K₂⁰`.
pub fn seeds(k1_0: &CMatrix, k2_0: &CMatrix, delta: f64) -> Result<BranchSeeds> {
    let n = k1_0.nrows();
    if n == 0 || k1_0.ncols() != n || k2_0.shape() != (n, n) {
        return Err(Error::Dimension {
            expected: n,
            got: k2_0.ncols(),
        });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Parameter(format!("contrast must be positive, got {delta}")));
    }
    if delta > DELTA_MAX {
        warn!("δ = {delta:.3e} is above the asymptotic regime (δ ≤ {DELTA_MAX:.0e}); seeds are rough");
    }

    let svd = k1_0.clone().svd(true, true);
    let k = (0..n)
        .max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .expect("n > 0");
    let u: CVector = svd.u.as_ref().expect("requested").column(k).into_owned();
    let v: CVector = svd.v_t.as_ref().expect("requested").row(k).adjoint();
    let vu = v.dotc(&u);
    if vu.norm() < 1e-12 {
        return Err(Error::Degenerate("K₁⁰ is nilpotent; no logarithmic branch".into()));
    }
    let mu1 = k1_0.trace().re;
    let alpha = v.dotc(&(k2_0 * &u)) / vu;

    let ld = delta.ln();
    let denom = mu1 * ld - mu1 * (-0.5 * mu1 * ld).ln() + 2.0 * alpha;
    let omega_log = right_sqrt(-2.0 * delta / denom);

    let mut null_vectors = vec![normalized(u.clone())];
    let mut b_eigs = Vec::new();
    let mut omega_reg = Vec::new();
    if n > 1 {
        let y = complement_basis(&v)?;
        let uc = complement_basis(&u)?;
        let b = solve(&(uc.adjoint() * &y), &(uc.adjoint() * k2_0 * &y))?;
        let sv = singular_values(&b);
        if sv[sv.len() - 1] <= 1e-12 * sv[0] {
            return Err(Error::Degenerate(format!(
                "regular-branch matrix B is singular (σ_min/σ_max = {:.2e})",
                sv[sv.len() - 1] / sv[0]
            )));
        }
        let (nu, vecs) = eig(&b)?;
        let mut order: Vec<usize> = (0..nu.len()).collect();
        // |δ/ν| ascending, i.e. |ν| descending
        order.sort_by(|&a, &c| {
            nu[c]
                .norm()
                .total_cmp(&nu[a].norm())
                .then(nu[a].arg().total_cmp(&nu[c].arg()))
        });
        for idx in order {
            b_eigs.push(nu[idx]);
            omega_reg.push(right_sqrt(Complex64::new(-delta, 0.0) / nu[idx]));
            null_vectors.push(normalized(&y * vecs.column(idx)));
        }
    }
    Ok(BranchSeeds {
        mu1,
        alpha,
        b_eigs,
        omega_log,
        omega_reg,
        null_vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly_effective::capacitance_f0;
    use crate::geometry::{auto_quadrature, BoundaryCurve, ResonatorSystem};

    fn circles(centers: &[[f64; 2]], radius: f64) -> ResonatorSystem {
        let curves = centers.iter().map(|&c| BoundaryCurve::circle(c, radius).unwrap()).collect();
        ResonatorSystem::new(curves, 1e-6, 0, auto_quadrature(0)).unwrap()
    }

    #[test]
    fn unit_circle_log_branch() {
        let s = circles(&[[0.0, 0.0]], 1.0);
        let (k1, k2) = capacitance_f0(&s).unwrap();
        let seeds = seeds(&k1, &k2, 1e-6).unwrap();
        assert!((seeds.mu1 - 0.5).abs() < 1e-14);
        assert!(seeds.omega_reg.is_empty());
        assert_eq!(seeds.null_vectors.len(), 1);
        // scalar reference built directly from the K₂ symbol at m = 0
        let alpha = k2[(0, 0)];
        let d: f64 = 1e-6;
        let w2 = -2.0 * d / (0.5 * d.ln() - 0.5 * (-0.25 * d.ln()).ln() + 2.0 * alpha);
        assert!((seeds.omega_log * seeds.omega_log - w2).norm() < 1e-14 * w2.norm());
        assert!(seeds.omega_log.re > 0.0 && seeds.omega_log.im < 0.0);
    }

    #[test]
    fn seeds_solve_reduced_equations() {
        let s = circles(&[[0.0, 0.0], [2.5, 0.0], [1.0, 2.2]], 0.8);
        let (k1, k2) = capacitance_f0(&s).unwrap();
        let delta = 1e-6;
        let seeds = seeds(&k1, &k2, delta).unwrap();
        assert_eq!(seeds.len(), 3);
        let y = complement_basis(&seeds.null_vectors[0]).unwrap();
        assert!(y.ncols() == 2);
        for (j, w) in seeds.omega_reg.iter().enumerate() {
            assert!(w.re > 0.0);
            // K₁⁰ annihilates regular null vectors
            let v = &seeds.null_vectors[j + 1];
            assert!((&k1 * v).norm() < 1e-12);
            let nu = seeds.b_eigs[j];
            assert!((w * w * nu + delta).norm() < 1e-14 * delta);
        }
        let mags: Vec<f64> = seeds.b_eigs.iter().map(|z| z.norm()).collect();
        assert!(mags.windows(2).all(|p| p[0] >= p[1]));
        assert!(seeds.omega_log.norm() < seeds.omega_reg.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn identical_pair_has_one_regular_branch() {
        let s = circles(&[[0.0, 0.0], [3.0, 0.0]], 1.0);
        let (k1, k2) = capacitance_f0(&s).unwrap();
        let seeds = seeds(&k1, &k2, 1e-5).unwrap();
        assert_eq!(seeds.omega_reg.len(), 1);
        // symmetric pair: regular mode is antisymmetric
        let v = &seeds.null_vectors[1];
        assert!((v[0] + v[1]).norm() < 1e-12);
        let lifted = seeds.lifted(2);
        assert_eq!(lifted[1].len(), 10);
        assert_eq!(lifted[1][2], v[0]);
    }

    #[test]
    fn rejects_bad_input() {
        let s = circles(&[[0.0, 0.0]], 1.0);
        let (k1, k2) = capacitance_f0(&s).unwrap();
        assert!(seeds(&k1, &k2, 0.0).is_err());
        assert!(seeds(&k1, &CMatrix::zeros(2, 2), 1e-4).is_err());
        let z = CMatrix::zeros(2, 2);
        let mut k = CMatrix::zeros(2, 2);
        k[(0, 0)] = Complex64::new(1.0, 0.0);
        assert!(matches!(seeds(&k, &z, 1e-4), Err(Error::Degenerate(_))));
    }
}

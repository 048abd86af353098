//! Full Fourier–Galerkin matrix of the transmission system in the normalized
//! basis, with unknowns ordered `(interior density φ, exterior density ψ)`:
//!
//! ```text
//! A(ω, δ) = [ S_ω            −S_ω            ]
//!           [ −½G − K'_ω     −δ(½G − K'_ω)   ]
//! ```
//!
//! The second row encodes `δ ∂_ν u⁺ = ∂_ν u⁻` with the traces
//! `∂_ν S[φ]|_∓ = (±½ + K')φ` that hold for the kernel signs in use.
//! `K'_ω` is split as `K₀' + ΔK_ω` so that small ω does not cancel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::assembly_effective::{assemble_blocks, assemble_effective, grids, AssemblyMethod, EffectiveMatrices};
use crate::error::{Error, Result};
use crate::geometry::{CurvePoint, ResonatorSystem};
use crate::kernels::boundary;
use crate::linalg::{CMatrix, CVector};
use crate::quadrature::{km_log_diagonal, smooth_block_galerkin, CurveGrid, LogSplitSample};
use crate::specfun::{cylinder01, BesselTable, EULER_GAMMA};

pub use crate::linalg::{smallest_singular, SingularTriplet};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense `2N(2F+1)` square matrix with its block layout.
#[derive(Debug, Clone)]
pub struct FullSystemMatrix {
    pub omega: Complex64,
    pub delta: f64,
    pub n: usize,
    pub f: usize,
    pub matrix: CMatrix,
}

impl FullSystemMatrix {
    pub fn modes(&self) -> usize {
        2 * self.f + 1
    }

    /// Size of one operator block, `N(2F+1)`.
    pub fn block_dim(&self) -> usize {
        self.n * self.modes()
    }

    /// Row/column of mode `m` on curve `j` in operator block `l ∈ {0, 1}`.
    pub fn index(&self, l: usize, j: usize, m: i64) -> usize {
        l * self.block_dim() + j * self.modes() + (m + self.f as i64) as usize
    }

    /// Operator block `(r, c)` with `r, c ∈ {0, 1}`.
    pub fn block(&self, r: usize, c: usize) -> CMatrix {
        let b = self.block_dim();
        self.matrix.view((r * b, c * b), (b, b)).into_owned()
    }
}

/// Geometry of a pair of circles for the addition-theorem blocks.
#[derive(Debug, Clone, Copy)]
struct CirclePair {
    a_test: f64,
    a_trial: f64,
    distance: f64,
    /// Angle of `c_test − c_trial`.
    angle: f64,
}

fn circle_pair(system: &ResonatorSystem, i: usize, j: usize) -> Option<CirclePair> {
    let (ci, ai) = system.curves()[i].as_circle()?;
    let (cj, aj) = system.curves()[j].as_circle()?;
    let v = [ci[0] - cj[0], ci[1] - cj[1]];
    Some(CirclePair {
        a_test: ai,
        a_trial: aj,
        distance: v[0].hypot(v[1]),
        angle: v[1].atan2(v[0]),
    })
}

/// Per-ω diagonal symbols of one circle.
struct CircleSymbols {
    single: Vec<Complex64>,
    interior: Vec<Complex64>,
    exterior: Vec<Complex64>,
}

fn circle_symbols(a: f64, omega: Complex64, f: usize) -> Result<CircleSymbols> {
    let z = omega * a;
    let t = BesselTable::new(f + 1, z)?;
    let mut s = CircleSymbols {
        single: Vec::new(),
        interior: Vec::new(),
        exterior: Vec::new(),
    };
    for m in -(f as i32)..=f as i32 {
        s.single.push(I * PI * a / 2.0 * t.j(m) * t.h1(m));
        s.interior.push(-I * PI * z / 2.0 * t.j_prime(m) * t.h1(m));
        s.exterior.push(-I * PI * z / 2.0 * t.j(m) * t.h1_prime(m));
    }
    Ok(s)
}

/// Normalized single-layer and `K'` blocks between two circles from the
/// addition theorem:
/// `S(m, n) = (iπ/2)√(a_i a_j) J_m(ωa_i) J_n(ωa_j) H_{n−m}(ωd) e^{i(n−m)α}`;
/// `K'` replaces `J_m(ωa_i)` by `ω J_m'(ωa_i)`.
fn graf_blocks(p: CirclePair, omega: Complex64, f: usize) -> Result<(CMatrix, CMatrix)> {
    let ti = BesselTable::first_kind(f + 1, omega * p.a_test)?;
    let tj = BesselTable::first_kind(f + 1, omega * p.a_trial)?;
    let th = BesselTable::new(2 * f, omega * p.distance)?;
    let modes = 2 * f + 1;
    let pref = I * PI / 2.0 * (p.a_test * p.a_trial).sqrt();
    let mut s = CMatrix::zeros(modes, modes);
    let mut k = CMatrix::zeros(modes, modes);
    for mi in 0..modes {
        let m = mi as i32 - f as i32;
        for ni in 0..modes {
            let n = ni as i32 - f as i32;
            let t = pref * tj.j(n) * th.h1(n - m) * Complex64::from_polar(1.0, (n - m) as f64 * p.angle);
            s[(mi, ni)] = t * ti.j(m);
            k[(mi, ni)] = t * omega * ti.j_prime(m);
        }
    }
    Ok((s, k))
}

/// Single-layer kernel split for the logarithmic diagonal rule.
fn single_layer_split(omega: Complex64) -> impl Fn(&CurvePoint, &CurvePoint, bool) -> LogSplitSample + Sync {
    move |x, y, diagonal| {
        if diagonal {
            let value = I * 0.25 - ((omega * x.speed * 0.5).ln() + EULER_GAMMA) / (2.0 * PI);
            return LogSplitSample {
                log_factor: Complex64::new(-1.0 / (2.0 * PI), 0.0),
                value,
            };
        }
        let (_, r) = boundary::geometry(x, y);
        let c = cylinder01(omega * r).expect("distinct boundary points");
        LogSplitSample {
            log_factor: -c.j0 / (2.0 * PI),
            value: I * 0.25 * c.h0(),
        }
    }
}

/// `ΔK_ω = ∂_ν Φ_ω − ∂_ν G₀` split for the logarithmic diagonal rule.
fn delta_k_split(omega: Complex64) -> impl Fn(&CurvePoint, &CurvePoint, bool) -> LogSplitSample + Sync {
    move |x, y, diagonal| {
        if diagonal {
            return LogSplitSample {
                log_factor: ZERO,
                value: ZERO,
            };
        }
        let (d, r) = boundary::geometry(x, y);
        let c = cylinder01(omega * r).expect("distinct boundary points");
        LogSplitSample {
            log_factor: omega / (2.0 * PI) * c.j1 * (d / r),
            value: -I * omega * 0.25 * (d / r) * c.h1_regular(),
        }
    }
}

fn single_layer_kernel(omega: Complex64) -> impl Fn(&CurvePoint, &CurvePoint) -> Complex64 + Sync {
    move |x, y| {
        let (_, r) = boundary::geometry(x, y);
        I * 0.25 * cylinder01(omega * r).expect("disjoint curves").h0()
    }
}

fn dnu_single_layer_kernel(omega: Complex64) -> impl Fn(&CurvePoint, &CurvePoint) -> Complex64 + Sync {
    move |x, y| {
        let (d, r) = boundary::geometry(x, y);
        -I * omega * 0.25 * cylinder01(omega * r).expect("disjoint curves").h1() * (d / r)
    }
}

/// Assembles `A(ω, δ)` repeatedly for one system, caching the ω-independent parts.
#[derive(Debug, Clone)]
pub struct FullAssembler {
    system: ResonatorSystem,
    method: AssemblyMethod,
    grids: Vec<CurveGrid>,
    statics: EffectiveMatrices,
}

impl FullAssembler {
    pub fn new(system: &ResonatorSystem, method: AssemblyMethod) -> Result<Self> {
        Ok(Self {
            system: system.clone(),
            method,
            grids: grids(system)?,
            statics: assemble_effective(system, method)?,
        })
    }

    /// Reuse already assembled static matrices (they must belong to `system`).
    pub fn with_statics(system: &ResonatorSystem, method: AssemblyMethod, statics: EffectiveMatrices) -> Result<Self> {
        if statics.f != system.truncation() || statics.n != system.len() {
            return Err(Error::Dimension {
                expected: system.block_dim(),
                got: statics.dim(),
            });
        }
        Ok(Self {
            system: system.clone(),
            method,
            grids: grids(system)?,
            statics,
        })
    }

    pub fn system(&self) -> &ResonatorSystem {
        &self.system
    }

    pub fn statics(&self) -> &EffectiveMatrices {
        &self.statics
    }

    fn circle(&self, j: usize) -> Option<f64> {
        match self.method {
            AssemblyMethod::Auto => self.system.curves()[j].as_circle().map(|(_, a)| a),
            AssemblyMethod::Quadrature => None,
        }
    }

    fn pair(&self, i: usize, j: usize) -> Option<CirclePair> {
        match self.method {
            AssemblyMethod::Auto => circle_pair(&self.system, i, j),
            AssemblyMethod::Quadrature => None,
        }
    }

    fn norm(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(1.0 / (self.system.perimeter(i) * self.system.perimeter(j)).sqrt(), 0.0)
    }

    /// Blocks `(S, −½G − K', ½G − K')` for the curve pair `(i, j)`.
    fn pair_blocks(&self, omega: Complex64, i: usize, j: usize) -> Result<[CMatrix; 3]> {
        let f = self.system.truncation();
        let modes = 2 * f + 1;
        let diag = |v: &[Complex64]| CMatrix::from_fn(modes, modes, |m, n| if m == n { v[m] } else { ZERO });
        if i == j {
            if let Some(a) = self.circle(i) {
                let s = circle_symbols(a, omega, f)?;
                return Ok([diag(&s.single), diag(&s.interior), diag(&s.exterior)]);
            }
            let g = &self.grids[i];
            let s = km_log_diagonal(single_layer_split(omega), g, f)? * self.norm(i, i);
            let dk = km_log_diagonal(delta_k_split(omega), g, f)? * self.norm(i, i);
            let b = modes * i;
            let c0 = self.statics.c0.view((b, b), (modes, modes));
            let gram = self.statics.gram.view((b, b), (modes, modes));
            let interior = c0 - &dk;
            let exterior = gram + c0 - &dk;
            return Ok([s, interior, exterior]);
        }
        let (s, k) = if let Some(p) = self.pair(i, j) {
            graf_blocks(p, omega, f)?
        } else {
            let (gi, gj) = (&self.grids[i], &self.grids[j]);
            (
                smooth_block_galerkin(single_layer_kernel(omega), gi, gj, f)? * self.norm(i, j),
                smooth_block_galerkin(dnu_single_layer_kernel(omega), gi, gj, f)? * self.norm(i, j),
            )
        };
        Ok([s, -&k, -k])
    }

    pub fn assemble(&self, omega: Complex64) -> Result<FullSystemMatrix> {
        if omega.norm() == 0.0 || !(omega.re.is_finite() && omega.im.is_finite()) {
            return Err(Error::Domain(format!("cannot assemble A at ω = {omega}")));
        }
        let n = self.system.len();
        let modes = self.system.modes();
        let delta = self.system.delta();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let blocks: Vec<[CMatrix; 3]> = pairs
            .par_iter()
            .map(|&(i, j)| self.pair_blocks(omega, i, j))
            .collect::<Result<_>>()?;
        let b = n * modes;
        let mut a = CMatrix::zeros(2 * b, 2 * b);
        let md = Complex64::new(-delta, 0.0);
        for (&(i, j), [s, int, ext]) in pairs.iter().zip(&blocks) {
            let (r, c) = (i * modes, j * modes);
            a.view_mut((r, c), (modes, modes)).copy_from(s);
            a.view_mut((r, b + c), (modes, modes)).copy_from(&-s);
            a.view_mut((b + r, c), (modes, modes)).copy_from(int);
            a.view_mut((b + r, b + c), (modes, modes)).copy_from(&(ext * md));
        }
        Ok(FullSystemMatrix {
            omega,
            delta,
            n,
            f: self.system.truncation(),
            matrix: a,
        })
    }

    /// The single-layer operator block alone.
    pub fn single_layer(&self, omega: Complex64) -> Result<CMatrix> {
        let modes = self.system.modes();
        assemble_blocks(self.system.len(), modes, |i, j| Ok(self.pair_blocks(omega, i, j)?[0].clone()))
    }
}

/// One-shot dense assembly.
pub fn assemble_a(system: &ResonatorSystem, omega: Complex64, method: AssemblyMethod) -> Result<FullSystemMatrix> {
    FullAssembler::new(system, method)?.assemble(omega)
}

/// Scaled Toeplitz correlation `z_m = Σ_n T(n−m) y_n` over `m, n ∈ −F..=F`,
/// evaluated by FFT on `4F+1` points. `t[k + 2F] = T(k)`.
///
/// The sequence `T(k)` grows factorially in `|k|` while the outer Bessel
/// factors decay, so each half `k > 0`, `k < 0` is rescaled by `ρ^k` with
/// `ρ` chosen to balance the three factors before the FFT.
struct ToeplitzApply {
    f: usize,
    halves: Vec<ScaledHalf>,
    center: Complex64,
}

struct ScaledHalf {
    rho: f64,
    spectrum: Vec<Complex64>,
}

impl ToeplitzApply {
    fn new(t: &[Complex64], f: usize, left: &[f64], right: &[f64]) -> Self {
        let len = 4 * f + 1;
        let fft = FftPlanner::new().plan_fft_forward(len);
        let mut halves = Vec::new();
        for sign in [1i64, -1] {
            let ks: Vec<i64> = (1..=2 * f as i64).map(|k| sign * k).collect();
            if ks.is_empty() {
                continue;
            }
            let log_t: Vec<f64> = ks.iter().map(|&k| t[(k + 2 * f as i64) as usize].norm().ln()).collect();
            let rho = best_scale(&ks, &log_t, f, left, right);
            // correlation kernel t'_l = T(−l) placed at l mod len, scaled
            let mut spectrum = vec![ZERO; len];
            for (&k, _) in ks.iter().zip(&log_t) {
                let l = (-k).rem_euclid(len as i64) as usize;
                spectrum[l] = t[(k + 2 * f as i64) as usize] * rho.powi(-(k as i32));
            }
            fft.process(&mut spectrum);
            halves.push(ScaledHalf { rho, spectrum });
        }
        Self {
            f,
            halves,
            center: t[2 * f],
        }
    }

    fn apply(&self, y: &[Complex64]) -> Vec<Complex64> {
        let f = self.f;
        let len = 4 * f + 1;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut out: Vec<Complex64> = y.iter().map(|v| v * self.center).collect();
        for h in &self.halves {
            let mut buf = vec![ZERO; len];
            for (idx, v) in y.iter().enumerate() {
                let n = idx as i32 - f as i32;
                buf[idx] = v * h.rho.powi(n);
            }
            fwd.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&h.spectrum) {
                *b *= s;
            }
            inv.process(&mut buf);
            for (idx, o) in out.iter_mut().enumerate() {
                let m = idx as i32 - f as i32;
                *o += buf[idx] * h.rho.powi(-m) / len as f64;
            }
        }
        out
    }
}

/// Scale `ρ` minimizing `max|left_m ρ^{−m}| · max|T(k) ρ^{−k}| · max|right_n ρ^n|`
/// (all in logs) over a grid of `log₁₀ ρ ∈ [−12, 12]`.
fn best_scale(ks: &[i64], log_t: &[f64], f: usize, left: &[f64], right: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, 1.0);
    for step in -240..=240 {
        let lr = step as f64 * 0.05 * std::f64::consts::LN_10;
        let mut a = f64::NEG_INFINITY;
        let mut c = f64::NEG_INFINITY;
        for idx in 0..left.len() {
            let m = idx as f64 - f as f64;
            a = a.max(left[idx] - m * lr);
            c = c.max(right[idx] + m * lr);
        }
        let b = ks
            .iter()
            .zip(log_t)
            .fold(f64::NEG_INFINITY, |acc, (&k, lt)| acc.max(lt - k as f64 * lr));
        let cost = a + b + c;
        if cost < best.0 {
            best = (cost, lr.exp());
        }
    }
    best.1
}

/// Matrix–vector product with `A(ω, δ)` for circles, never forming the
/// off-diagonal blocks: diagonal symbols as scalings and addition-theorem
/// blocks as FFT-evaluated Toeplitz correlations.
pub fn apply_a_fast(system: &ResonatorSystem, omega: Complex64, x: &CVector) -> Result<CVector> {
    let n = system.len();
    let f = system.truncation();
    let modes = 2 * f + 1;
    let b = n * modes;
    if !system.all_circles() {
        return Err(Error::Unsupported("fast apply requires circular resonators".into()));
    }
    if x.len() != 2 * b {
        return Err(Error::Dimension {
            expected: 2 * b,
            got: x.len(),
        });
    }
    if omega.norm() == 0.0 {
        return Err(Error::Domain("cannot apply A at ω = 0".into()));
    }
    let delta = system.delta();
    let radii: Vec<f64> = system.curves().iter().map(|c| c.as_circle().expect("checked").1).collect();
    // u = φ − ψ drives S, w = φ − δψ drives the off-diagonal K' couplings
    let u: Vec<Complex64> = (0..b).map(|k| x[k] - x[b + k]).collect();
    let w: Vec<Complex64> = (0..b).map(|k| x[k] - x[b + k] * delta).collect();

    let tables: Vec<BesselTable> = radii
        .iter()
        .map(|&a| BesselTable::first_kind(f + 1, omega * a))
        .collect::<Result<_>>()?;
    let symbols: Vec<CircleSymbols> = radii.iter().map(|&a| circle_symbols(a, omega, f)).collect::<Result<_>>()?;

    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
            let s = &symbols[i];
            let mut top: Vec<Complex64> = (0..modes).map(|m| s.single[m] * u[i * modes + m]).collect();
            let mut bottom: Vec<Complex64> = (0..modes)
                .map(|m| s.interior[m] * x[i * modes + m] - s.exterior[m] * delta * x[b + i * modes + m])
                .collect();
            let ti = &tables[i];
            let dj: Vec<Complex64> = (0..modes).map(|m| ti.j(m as i32 - f as i32)).collect();
            let dk: Vec<Complex64> = (0..modes).map(|m| omega * ti.j_prime(m as i32 - f as i32)).collect();
            let left: Vec<f64> = dj.iter().zip(&dk).map(|(a, c)| (a.norm() + c.norm()).ln()).collect();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let p = circle_pair(system, i, j).expect("circles");
                let th = BesselTable::new(2 * f, omega * p.distance)?;
                let t: Vec<Complex64> = (-2 * f as i32..=2 * f as i32)
                    .map(|k| th.h1(k) * Complex64::from_polar(1.0, k as f64 * p.angle))
                    .collect();
                let tj = &tables[j];
                let jn: Vec<Complex64> = (0..modes).map(|m| tj.j(m as i32 - f as i32)).collect();
                let right: Vec<f64> = jn.iter().map(|v| v.norm().ln()).collect();
                let op = ToeplitzApply::new(&t, f, &left, &right);
                let pref = I * PI / 2.0 * (p.a_test * p.a_trial).sqrt();
                let yu: Vec<Complex64> = (0..modes).map(|m| jn[m] * u[j * modes + m]).collect();
                let yw: Vec<Complex64> = (0..modes).map(|m| jn[m] * w[j * modes + m]).collect();
                let zu = op.apply(&yu);
                let zw = op.apply(&yw);
                for m in 0..modes {
                    top[m] += pref * dj[m] * zu[m];
                    bottom[m] -= pref * dk[m] * zw[m];
                }
            }
            Ok((top, bottom))
        })
        .collect::<Result<_>>()?;

    let mut out = CVector::zeros(2 * b);
    for (i, (top, bottom)) in rows.into_iter().enumerate() {
        for m in 0..modes {
            out[i * modes + m] = top[m];
            out[b + i * modes + m] = bottom[m];
        }
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundaryCurve;
    use crate::quadrature::brute_force_galerkin;

    fn two_circles(f: usize) -> ResonatorSystem {
        let a = BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap();
        let b = BoundaryCurve::circle([2.6, 1.1], 0.7).unwrap();
        ResonatorSystem::new(vec![a, b], 1e-3, f, crate::geometry::auto_quadrature(f)).unwrap()
    }

    #[test]
    fn graf_blocks_match_oversampled_quadrature() {
        let s = two_circles(4);
        let omega = Complex64::new(0.8, -0.05);
        let p = circle_pair(&s, 1, 0).unwrap();
        let (gs, gk) = graf_blocks(p, omega, 4).unwrap();
        let gi = CurveGrid::new(&s.curves()[1], 320).unwrap();
        let gj = CurveGrid::new(&s.curves()[0], 320).unwrap();
        let scale = Complex64::new(1.0 / (s.perimeter(0) * s.perimeter(1)).sqrt(), 0.0);
        let qs = brute_force_galerkin(single_layer_kernel(omega), &gi, &gj, 4) * scale;
        let qk = brute_force_galerkin(dnu_single_layer_kernel(omega), &gi, &gj, 4) * scale;
        assert!((&gs - &qs).norm() < 1e-12 * qs.norm(), "{}", (&gs - &qs).norm());
        assert!((&gk - &qk).norm() < 1e-12 * qk.norm(), "{}", (&gk - &qk).norm());
    }

    #[test]
    fn generic_path_matches_closed_forms() {
        let s = two_circles(4);
        let s = s.with_truncation(4, Some(96)).unwrap();
        let omega = Complex64::new(0.3, -0.01);
        let auto = assemble_a(&s, omega, AssemblyMethod::Auto).unwrap();
        let quad = assemble_a(&s, omega, AssemblyMethod::Quadrature).unwrap();
        let err = (&auto.matrix - &quad.matrix).norm() / auto.matrix.norm();
        assert!(err < 1e-11, "{err}");
        assert_eq!(auto.block(0, 1), -auto.block(0, 0));
    }

    #[test]
    fn fast_apply_matches_dense() {
        let s = two_circles(6);
        let omega = Complex64::new(0.05, -1e-3);
        let a = assemble_a(&s, omega, AssemblyMethod::Auto).unwrap();
        let x = CVector::from_fn(a.matrix.ncols(), |k, _| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()));
        let fast = apply_a_fast(&s, omega, &x).unwrap();
        let dense = &a.matrix * &x;
        assert!((fast - dense).norm() < 1e-12 * x.norm());
        let zero = apply_a_fast(&s, omega, &CVector::zeros(x.len())).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn fast_apply_rejects_non_circles() {
        let e = BoundaryCurve::ellipse([0.0, 0.0], [1.0, 0.5], 0.0).unwrap();
        let s = ResonatorSystem::new(vec![e], 1e-3, 1, 20).unwrap();
        let x = CVector::zeros(6);
        assert!(matches!(apply_a_fast(&s, Complex64::new(0.1, 0.0), &x), Err(Error::Unsupported(_))));
    }
}

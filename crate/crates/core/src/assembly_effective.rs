//! ω-independent Galerkin matrices of the reduced problem, in the normalized
//! basis `η_{j,n} = e^{inθ}/√|∂D_j|`.
//!
//! With the kernel signs used throughout (`∂_ν G₀ = −(x−y)·ν/(2π r²)`), constants
//! on a single curve satisfy `(½I + K₀')[1] = 0`, so
//!
//! * `C₀ = −½G − K₀'` (rows of the constant test modes vanish),
//! * `K₁`, `K₂` are the Galerkin matrices of `∂_ν G₁`, `∂_ν G₂`,
//! * `R_F(ω, δ) = (1−δ)C₀ − δG − ω² log ω K₁ − ω² K₂`,
//!
//! where `G` is the Gram matrix of the basis (the identity for circles).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CurvePoint, ResonatorSystem};
use crate::kernels::{boundary, C_GAMMA};
use crate::linalg::CMatrix;
use crate::quadrature::{bin, km_log_diagonal, smooth_block_galerkin, CurveGrid, LogSplitSample};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Whether circles may use closed-form symbols instead of quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyMethod {
    #[default]
    Auto,
    Quadrature,
}

/// Cached reduced matrices of one resonator system.
#[derive(Debug, Clone)]
pub struct EffectiveMatrices {
    pub f: usize,
    pub n: usize,
    pub perimeters: Vec<f64>,
    pub areas: Vec<f64>,
    pub gram: CMatrix,
    pub c0: CMatrix,
    pub k1: CMatrix,
    pub k2: CMatrix,
}

impl EffectiveMatrices {
    pub fn modes(&self) -> usize {
        2 * self.f + 1
    }

    pub fn dim(&self) -> usize {
        self.n * self.modes()
    }

    pub fn index(&self, j: usize, m: i64) -> usize {
        j * self.modes() + (m + self.f as i64) as usize
    }

    /// Indices of the constant modes `(j, 0)`.
    pub fn constant_indices(&self) -> Vec<usize> {
        (0..self.n).map(|j| self.index(j, 0)).collect()
    }
}

pub(crate) fn grids(system: &ResonatorSystem) -> Result<Vec<CurveGrid>> {
    system
        .curves()
        .iter()
        .map(|c| CurveGrid::new(c, system.quadrature()))
        .collect()
}

/// Assemble an `n × n` arrangement of `modes × modes` blocks in parallel.
pub(crate) fn assemble_blocks<B>(n: usize, modes: usize, block: B) -> Result<CMatrix>
where
    B: Fn(usize, usize) -> Result<CMatrix> + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let blocks: Vec<CMatrix> = pairs
        .par_iter()
        .map(|&(i, j)| block(i, j))
        .collect::<Result<_>>()?;
    let mut out = CMatrix::zeros(n * modes, n * modes);
    for (&(i, j), b) in pairs.iter().zip(&blocks) {
        out.view_mut((i * modes, j * modes), (modes, modes)).copy_from(b);
    }
    Ok(out)
}

/// Gram matrix `(1/|∂D|)∫ e^{i(n−m)θ} s(θ) dθ` of the normalized basis on one curve.
pub fn gram_block(grid: &CurveGrid, f: usize, perimeter: f64) -> CMatrix {
    let q = grid.len();
    let mut spectrum: Vec<Complex64> = grid.points.iter().map(|p| Complex64::new(p.speed, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(q).process(&mut spectrum);
    let modes = 2 * f + 1;
    let w = grid.grid.weight() / perimeter;
    CMatrix::from_fn(modes, modes, |m, n| spectrum[bin(m as i64 - n as i64, q)] * w)
}

/// Circle symbol of `C₀`: 0 for the constant mode, −½ otherwise.
pub fn circle_c0_symbol(m: i64) -> Complex64 {
    if m == 0 {
        ZERO
    } else {
        Complex64::new(-0.5, 0.0)
    }
}

/// Fourier coefficients of `1 − cos t`.
fn one_minus_cos(m: i64) -> f64 {
    match m.abs() {
        0 => 1.0,
        1 => -0.5,
        _ => 0.0,
    }
}

/// Fourier coefficients of `(1 − cos t) log|2 sin(t/2)|`.
fn one_minus_cos_log(m: i64) -> f64 {
    match m.abs() {
        0 => 0.5,
        1 => -0.375,
        k => {
            let k = k as f64;
            1.0 / (2.0 * k * (k * k - 1.0))
        }
    }
}

/// Circle symbol of `K₁`: `a²/2` at m = 0, `−a²/4` at |m| = 1, 0 otherwise.
pub fn circle_k1_symbol(a: f64, m: i64) -> Complex64 {
    Complex64::new(0.5 * a * a * one_minus_cos(m), 0.0)
}

/// Circle symbol of `K₂`; `a²/(4|m|(m²−1))` for |m| ≥ 2.
pub fn circle_k2_symbol(a: f64, m: i64) -> Complex64 {
    let c = one_minus_cos(m);
    0.5 * a * a * ((0.5 * a).ln() * c + one_minus_cos_log(m)) + 2.0 * PI * a * a * C_GAMMA * c
}

fn d0_kernel(x: &CurvePoint, y: &CurvePoint, diagonal: bool) -> Complex64 {
    Complex64::new(boundary::dnu_g0(x, y, diagonal), 0.0)
}

fn d1_kernel(x: &CurvePoint, y: &CurvePoint) -> Complex64 {
    Complex64::new(boundary::dnu_g1(x, y), 0.0)
}

fn d2_kernel(x: &CurvePoint, y: &CurvePoint) -> Complex64 {
    let (d, r) = boundary::geometry(x, y);
    d / (4.0 * PI) * (0.5 * r).ln() + C_GAMMA * d
}

/// `∂_ν G₂` split for the logarithmic diagonal rule.
pub fn d2_split(x: &CurvePoint, y: &CurvePoint, diagonal: bool) -> LogSplitSample {
    if diagonal {
        return LogSplitSample {
            log_factor: ZERO,
            value: ZERO,
        };
    }
    let (d, _) = boundary::geometry(x, y);
    LogSplitSample {
        log_factor: Complex64::new(d / (4.0 * PI), 0.0),
        value: d2_kernel(x, y),
    }
}

/// `∂_ν G₀` block on one curve (continuous kernel, trapezoidal rule).
pub fn d0_diagonal_block(grid: &CurveGrid, f: usize) -> Result<CMatrix> {
    // test and trial samples come from the same slice, so the diagonal is
    // exactly where both references point at the same sample
    smooth_block_galerkin(|x, y| d0_kernel(x, y, std::ptr::eq(x, y)), grid, grid, f)
}

/// `∂_ν G₂` block on one curve by Kussmaul–Martensen splitting.
pub fn d2_diagonal_block(grid: &CurveGrid, f: usize) -> Result<CMatrix> {
    km_log_diagonal(d2_split, grid, f)
}

pub fn assemble_effective(system: &ResonatorSystem, method: AssemblyMethod) -> Result<EffectiveMatrices> {
    let f = system.truncation();
    let n = system.len();
    let modes = system.modes();
    let grids = grids(system)?;
    let perimeters: Vec<f64> = (0..n).map(|j| system.perimeter(j)).collect();
    let areas: Vec<f64> = (0..n).map(|j| system.area(j)).collect();
    let circle = |j: usize| match method {
        AssemblyMethod::Auto => system.curves()[j].as_circle().map(|(_, a)| a),
        AssemblyMethod::Quadrature => None,
    };
    let norm = |i: usize, j: usize| Complex64::new(1.0 / (perimeters[i] * perimeters[j]).sqrt(), 0.0);
    let diag = |sym: &dyn Fn(i64) -> Complex64| {
        CMatrix::from_fn(modes, modes, |m, k| if m == k { sym(m as i64 - f as i64) } else { ZERO })
    };

    let gram = assemble_blocks(n, modes, |i, j| {
        Ok(if i != j {
            CMatrix::zeros(modes, modes)
        } else if circle(i).is_some() {
            CMatrix::identity(modes, modes)
        } else {
            gram_block(&grids[i], f, perimeters[i])
        })
    })?;

    let mut c0 = assemble_blocks(n, modes, |i, j| {
        if i == j {
            if circle(i).is_some() {
                return Ok(diag(&circle_c0_symbol));
            }
            let d0 = d0_diagonal_block(&grids[i], f)? * norm(i, i);
            let g = gram.view((i * modes, i * modes), (modes, modes)).into_owned();
            Ok(g * Complex64::new(-0.5, 0.0) - d0)
        } else {
            Ok(-smooth_block_galerkin(|x, y| d0_kernel(x, y, false), &grids[i], &grids[j], f)? * norm(i, j))
        }
    })?;
    // ⟨1, (½I + K₀')φ⟩ = 0 holds exactly for every φ
    for j in 0..n {
        c0.row_mut(j * modes + f).fill(ZERO);
    }

    let k1 = assemble_blocks(n, modes, |i, j| {
        if i == j {
            if let Some(a) = circle(i) {
                return Ok(diag(&|m| circle_k1_symbol(a, m)));
            }
        }
        Ok(smooth_block_galerkin(d1_kernel, &grids[i], &grids[j], f)? * norm(i, j))
    })?;

    let k2 = assemble_blocks(n, modes, |i, j| {
        if i == j {
            if let Some(a) = circle(i) {
                return Ok(diag(&|m| circle_k2_symbol(a, m)));
            }
            return Ok(d2_diagonal_block(&grids[i], f)? * norm(i, i));
        }
        Ok(smooth_block_galerkin(d2_kernel, &grids[i], &grids[j], f)? * norm(i, j))
    })?;

    Ok(EffectiveMatrices {
        f,
        n,
        perimeters,
        areas,
        gram,
        c0,
        k1,
        k2,
    })
}

/// `R_F(ω, δ) = (1−δ)C₀ − δG − ω² log ω K₁ − ω² K₂` (principal-branch log).
pub fn compose_rf(eff: &EffectiveMatrices, omega: Complex64, delta: f64) -> Result<CMatrix> {
    if omega.norm() == 0.0 {
        return Err(Error::Domain("R_F is undefined at ω = 0".into()));
    }
    let w2 = omega * omega;
    Ok(&eff.c0 * Complex64::new(1.0 - delta, 0.0)
        - &eff.gram * Complex64::new(delta, 0.0)
        - &eff.k1 * (w2 * omega.ln())
        - &eff.k2 * w2)
}

/// Constant-mode capacitance matrices `K₁⁰` (closed form) and `K₂⁰`
/// (double integral of `(x−y)·ν_x log(|x−y|/2)/(4π)` plus `(γ − ½ − iπ/2)K₁⁰`).
pub fn capacitance_f0(system: &ResonatorSystem) -> Result<(CMatrix, CMatrix)> {
    let n = system.len();
    let grids = grids(system)?;
    let k1 = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            system.area(i) / (2.0 * PI) * (system.perimeter(j) / system.perimeter(i)).sqrt(),
            0.0,
        )
    });
    let log_part = |x: &CurvePoint, y: &CurvePoint| {
        let (d, r) = boundary::geometry(x, y);
        Complex64::new(d / (4.0 * PI) * (0.5 * r).ln(), 0.0)
    };
    let integral = assemble_blocks(n, 1, |i, j| {
        let scale = Complex64::new(1.0 / (system.perimeter(i) * system.perimeter(j)).sqrt(), 0.0);
        let block = if i == j {
            km_log_diagonal(
                |x, y, diagonal| {
                    if diagonal {
                        LogSplitSample {
                            log_factor: ZERO,
                            value: ZERO,
                        }
                    } else {
                        let (d, _) = boundary::geometry(x, y);
                        LogSplitSample {
                            log_factor: Complex64::new(d / (4.0 * PI), 0.0),
                            value: log_part(x, y),
                        }
                    }
                },
                &grids[i],
                0,
            )?
        } else {
            smooth_block_galerkin(log_part, &grids[i], &grids[j], 0)?
        };
        Ok(block * scale)
    })?;
    let shift = Complex64::new(crate::specfun::EULER_GAMMA - 0.5, -0.5 * PI);
    let k2 = integral + &k1 * shift;
    Ok((k1, k2))
}

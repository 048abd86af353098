//! Galerkin double integrals
//! `entry(m, n) = ∫∫ e^{−imθ} k(θ, φ) e^{inφ} s(θ) s(φ) dθ dφ`
//! on equispaced periodic grids, read off from 2D FFTs.
//!
//! Rows are indexed by the test mode `m`, columns by the trial mode `n`, both
//! running over `−F..=F` (matrix index `m + F`). In an FFT of length Q, mode
//! `k < 0` lives in bin `Q + k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurve, CurvePoint};

pub use crate::linalg::CMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Q` equispaced nodes `θ_q = 2πq/Q` with weights `2π/Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    q: usize,
}

impl PeriodicGrid {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 || !q.is_multiple_of(2) {
            return Err(Error::Parameter(format!("grid size must be even and positive, got {q}")));
        }
        Ok(Self { q })
    }

    pub fn len(&self) -> usize {
        self.q
    }

    pub fn is_empty(&self) -> bool {
        self.q == 0
    }

    pub fn node(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.q as f64
    }

    pub fn weight(&self) -> f64 {
        2.0 * PI / self.q as f64
    }
}

/// A curve sampled on a periodic grid.
#[derive(Debug, Clone)]
pub struct CurveGrid {
    pub grid: PeriodicGrid,
    pub points: Vec<CurvePoint>,
}

impl CurveGrid {
    pub fn new(curve: &BoundaryCurve, q: usize) -> Result<Self> {
        let grid = PeriodicGrid::new(q)?;
        let points = (0..q).map(|k| curve.eval(grid.node(k))).collect();
        Ok(Self { grid, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// FFT bin holding signed mode `k`.
#[inline]
pub fn bin(k: i64, len: usize) -> usize {
    k.rem_euclid(len as i64) as usize
}

fn check_aliasing(f: usize, q: usize) -> Result<()> {
    if 4 * (f + 4) > q {
        return Err(Error::Parameter(format!(
            "truncation F = {f} exceeds Q/4 − 4 for Q = {q}"
        )));
    }
    Ok(())
}

/// Given per-row partial sums `rows[p][n + F] = Σ_φ (...) e^{inφ}` on a θ-grid
/// of size `q`, apply `w Σ_p e^{−imθ_p} (·)` for every test mode.
fn finish_rows(rows: &[Vec<Complex64>], f: usize, weight: f64) -> CMatrix {
    let q = rows.len();
    let modes = 2 * f + 1;
    let fft = FftPlanner::new().plan_fft_forward(q);
    let mut out = CMatrix::zeros(modes, modes);
    let mut column = vec![ZERO; q];
    for n in 0..modes {
        for (p, row) in rows.iter().enumerate() {
            column[p] = row[n];
        }
        fft.process(&mut column);
        for m in 0..modes {
            out[(m, n)] = column[bin(m as i64 - f as i64, q)] * weight;
        }
    }
    out
}

/// For one row of samples `v[q]`, return `w Σ_q v_q e^{inφ_q}` for `n ∈ −F..=F`.
fn trial_sums(fft: &dyn Fft<f64>, mut v: Vec<Complex64>, f: usize, weight: f64) -> Vec<Complex64> {
    let q = v.len();
    fft.process(&mut v);
    (-(f as i64)..=f as i64).map(|n| v[bin(n, q)] * weight).collect()
}

/// Galerkin block of a smooth biperiodic kernel between two (possibly equal)
/// curve grids. `kernel(x, y)` receives the test point first.
pub fn smooth_block_galerkin<K>(kernel: K, test: &CurveGrid, trial: &CurveGrid, f: usize) -> Result<CMatrix>
where
    K: Fn(&CurvePoint, &CurvePoint) -> Complex64 + Sync,
{
    check_aliasing(f, test.len())?;
    check_aliasing(f, trial.len())?;
    let inverse = FftPlanner::new().plan_fft_inverse(trial.len());
    let rows: Vec<Vec<Complex64>> = test
        .points
        .par_iter()
        .map(|x| {
            let v = trial
                .points
                .iter()
                .map(|y| kernel(x, y) * (x.speed * y.speed))
                .collect();
            trial_sums(inverse.as_ref(), v, f, trial.grid.weight())
        })
        .collect();
    Ok(finish_rows(&rows, f, test.grid.weight()))
}

/// Kernel value split as `log_factor · log|2 sin((φ−θ)/2)| + remainder`.
///
/// Off the diagonal, `value` is the full kernel; the routine subtracts the
/// log part itself. On the diagonal, `value` must be the limit of the
/// remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSplitSample {
    pub log_factor: Complex64,
    pub value: Complex64,
}

/// Fourier coefficient of `log|2 sin(t/2)|`: `−1/(2|k|)` for `k ≠ 0`, `0` at `k = 0`.
#[inline]
pub fn log_sine_coefficient(k: i64) -> f64 {
    if k == 0 {
        0.0
    } else {
        -0.5 / k.abs() as f64
    }
}

/// `log|2 sin(t/2)|`.
#[inline]
pub fn log_sine(t: f64) -> f64 {
    (2.0 * (0.5 * t).sin()).abs().ln()
}

/// Kussmaul–Martensen quadrature for a self-interaction block with a
/// logarithmic singularity on the diagonal.
///
/// The log part is integrated in φ exactly against the Fourier series of
/// `log|2 sin|`, after expanding `log_factor(θ_p, ·) s(·)` by FFT. The smooth
/// remainder uses the trapezoidal rule.
pub fn km_log_diagonal<K>(split: K, grid: &CurveGrid, f: usize) -> Result<CMatrix>
where
    K: Fn(&CurvePoint, &CurvePoint, bool) -> LogSplitSample + Sync,
{
    let q = grid.len();
    if q < 4 * f + 16 {
        return Err(Error::Parameter(format!(
            "Q = {q} is below 4F + 16 = {} for the logarithmic diagonal rule",
            4 * f + 16
        )));
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(q);
    let inverse = planner.plan_fft_inverse(q);
    let weight = grid.grid.weight();
    let half = (q / 2) as i64;
    let fi = f as i64;

    let rows: Vec<Vec<Complex64>> = (0..q)
        .into_par_iter()
        .map(|p| {
            let x = &grid.points[p];
            let theta = grid.grid.node(p);
            let mut factor = vec![ZERO; q];
            let mut remainder = vec![ZERO; q];
            for (k, y) in grid.points.iter().enumerate() {
                let diagonal = k == p;
                let s = split(x, y, diagonal);
                factor[k] = s.log_factor * y.speed;
                remainder[k] = if diagonal {
                    s.value * y.speed
                } else {
                    (s.value - s.log_factor * log_sine(grid.grid.node(k) - theta)) * y.speed
                };
            }
            let mut row = trial_sums(inverse.as_ref(), remainder, f, weight);

            forward.process(&mut factor);
            for c in factor.iter_mut() {
                *c /= q as f64;
            }
            for (n, out) in (-fi..=fi).zip(row.iter_mut()) {
                let mut acc = ZERO;
                for k in -half..=half {
                    let mut coeff = factor[bin(k, q)];
                    if k.abs() == half {
                        coeff *= 0.5;
                    }
                    let l = log_sine_coefficient(k + n);
                    if l != 0.0 {
                        acc += coeff * l * Complex64::from_polar(1.0, (k + n) as f64 * theta);
                    }
                }
                *out += 2.0 * PI * acc;
            }
            row
        })
        .collect();

    let rows: Vec<Vec<Complex64>> = rows
        .into_iter()
        .zip(&grid.points)
        .map(|(r, x)| r.into_iter().map(|v| v * x.speed).collect())
        .collect();
    Ok(finish_rows(&rows, f, weight))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * pn - p0) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tanh–sinh rule on [0, L] clustered at 0: offsets `u` from the left end
/// (computed without cancellation) and weights.
fn tanh_sinh_left(length: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / 32.0;
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for j in -160i32..=160 {
        let t = j as f64 * h;
        let s = 0.5 * PI * t.sinh();
        // 1 + tanh(s) = 2/(1 + e^{−2s})
        let u = length / (1.0 + (-2.0 * s).exp());
        let w = length * 0.5 * (0.5 * PI * t.cosh()) / s.cosh().powi(2) * h;
        if u > 0.0 && u < length && w > 0.0 {
            offsets.push(u);
            weights.push(w);
        }
    }
    (offsets, weights)
}

/// Quadrature nodes on (0, 2π) resolving endpoint singularities and
/// oscillations up to `modes` periods: tanh–sinh on the two end panels,
/// Gauss–Legendre inside.
fn singular_period_rule(modes: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (modes / 2).max(8);
    let len = 2.0 * PI / panels as f64;
    let (gx, gw) = gauss_legendre(20);
    let (tu, tw) = tanh_sinh_left(len);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (u, w) in tu.iter().zip(&tw) {
        nodes.push(*u);
        weights.push(*w);
    }
    for k in 1..panels - 1 {
        let mid = (k as f64 + 0.5) * len;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + 0.5 * len * x);
            weights.push(0.5 * len * w);
        }
    }
    for (u, w) in tu.iter().zip(&tw).rev() {
        nodes.push(2.0 * PI - u);
        weights.push(*w);
    }
    (nodes, weights)
}

/// Truncated Fourier filtering for a self-interaction block with kernel
/// `f(θ, φ) g(θ, φ)`, `f` smooth (and carrying the arclength Jacobians), `g`
/// singular on the diagonal but square integrable.
///
/// For each θ on a `q`-point grid, the modes `|k| ≤ F_n` of `g(θ, ·)` are
/// computed by a singularity-resolving quadrature, resummed on the grid, and
/// the product `f · g_{F_n}` is integrated with the trapezoidal rule.
pub fn tff_diagonal<Fs, Gs>(f: Fs, g: Gs, trunc: usize, f_n: usize, q: usize) -> Result<CMatrix>
where
    Fs: Fn(f64, f64) -> Complex64 + Sync,
    Gs: Fn(f64, f64) -> Complex64 + Sync,
{
    if f_n == 0 || q <= f_n {
        return Err(Error::Parameter(format!(
            "filtering needs q > F_n (oversampling b > 1), got q = {q}, F_n = {f_n}"
        )));
    }
    if q < 2 * trunc + 1 || !q.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "grid size q = {q} must be even and resolve modes up to F = {trunc}"
        )));
    }
    let grid = PeriodicGrid::new(q)?;
    let (offsets, weights) = singular_period_rule(f_n);
    let mut planner = FftPlanner::new();
    let inverse = planner.plan_fft_inverse(q);
    let weight = grid.weight();
    let fnn = f_n as i64;

    let rows: Vec<Vec<Complex64>> = (0..q)
        .into_par_iter()
        .map(|p| {
            let theta = grid.node(p);
            // coeffs[idx] = ĝ_k(θ), k = idx − F_n, over φ ∈ (θ, θ + 2π)
            let mut coeffs = vec![ZERO; 2 * f_n + 1];
            for (u, w) in offsets.iter().zip(&weights) {
                let phi = theta + u;
                let val = g(theta, phi);
                if !(val.re.is_finite() && val.im.is_finite()) {
                    continue;
                }
                let step = Complex64::from_polar(1.0, -phi);
                let mut phase = Complex64::from_polar(1.0, fnn as f64 * phi);
                let v = val * *w / (2.0 * PI);
                for c in coeffs.iter_mut() {
                    *c += v * phase;
                    phase *= step;
                }
            }
            // resum on the grid: g_{F_n}(θ, φ_l) = Σ_k ĝ_k e^{ikφ_l}
            let mut spectrum = vec![ZERO; q];
            for (idx, c) in coeffs.iter().enumerate() {
                let k = idx as i64 - fnn;
                spectrum[bin(k, q)] += *c;
            }
            inverse.process(&mut spectrum);
            let v: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(l, gv)| f(theta, grid.node(l)) * gv)
                .collect();
            trial_sums(inverse.as_ref(), v, trunc, weight)
        })
        .collect();
    Ok(finish_rows(&rows, trunc, weight))
}

/// Plain Q×Q trapezoidal evaluation without FFTs; used as an oracle.
pub fn brute_force_galerkin<K>(kernel: K, test: &CurveGrid, trial: &CurveGrid, f: usize) -> CMatrix
where
    K: Fn(&CurvePoint, &CurvePoint) -> Complex64,
{
    let modes = 2 * f + 1;
    let (wi, wj) = (test.grid.weight(), trial.grid.weight());
    let mut out = CMatrix::zeros(modes, modes);
    for (p, x) in test.points.iter().enumerate() {
        let theta = test.grid.node(p);
        for (k, y) in trial.points.iter().enumerate() {
            let phi = trial.grid.node(k);
            let val = kernel(x, y) * (x.speed * y.speed * wi * wj);
            for m in 0..modes {
                let mm = m as f64 - f as f64;
                for n in 0..modes {
                    let nn = n as f64 - f as f64;
                    out[(m, n)] += val * Complex64::from_polar(1.0, nn * phi - mm * theta);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(q: usize) -> CurveGrid {
        CurveGrid::new(&BoundaryCurve::circle([0.0, 0.0], 1.0).unwrap(), q).unwrap()
    }

    #[test]
    fn tff_mode_orientation() {
        // g = e^{2iφ}: only the entry (m, n) = (0, −2) survives, with value (2π)²
        let b = tff_diagonal(|_, _| Complex64::new(1.0, 0.0), |_, p| Complex64::from_polar(1.0, 2.0 * p), 3, 8, 16).unwrap();
        let expected = 4.0 * PI * PI;
        assert!((b[(3, 1)] - expected).norm() < 1e-12 * expected);
        assert!(b.norm() - expected < 1e-10);
    }

    #[test]
    fn constant_kernel_hits_zero_mode() {
        let g = unit(32);
        let a = smooth_block_galerkin(|_, _| Complex64::new(1.0, 0.0), &g, &g, 3).unwrap();
        for m in 0..7 {
            for n in 0..7 {
                let expected = if m == 3 && n == 3 { 4.0 * PI * PI } else { 0.0 };
                assert!((a[(m, n)].re - expected).abs() < 1e-12 && a[(m, n)].im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn plane_wave_kernel_mode() {
        // on the unit circle x = (cos θ, sin θ), so e^{iθ} = x₀ + i x₁
        let g = unit(32);
        let k = |x: &CurvePoint, y: &CurvePoint| {
            Complex64::new(x.x[0], x.x[1]) * Complex64::new(y.x[0], -y.x[1])
        };
        let a = smooth_block_galerkin(k, &g, &g, 3).unwrap();
        for m in 0..7 {
            for n in 0..7 {
                let expected = if m == 4 && n == 4 { 4.0 * PI * PI } else { 0.0 };
                assert!((a[(m, n)] - expected).norm() < 1e-12, "({m},{n}) {}", a[(m, n)]);
            }
        }
    }

    #[test]
    fn fft_matches_direct_sums() {
        let c = BoundaryCurve::ellipse([0.0, 0.0], [1.3, 0.7], 0.4).unwrap();
        let g = CurveGrid::new(&c, 24).unwrap();
        let k = |x: &CurvePoint, y: &CurvePoint| Complex64::new(x.x[0] * y.x[1], x.x[1] + y.speed);
        let a = smooth_block_galerkin(k, &g, &g, 2).unwrap();
        let b = brute_force_galerkin(k, &g, &g, 2);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn aliasing_guard() {
        let g = unit(30);
        assert!(smooth_block_galerkin(|_, _| ZERO, &g, &g, 4).is_err());
        assert!(smooth_block_galerkin(|_, _| ZERO, &g, &g, 3).is_ok());
        assert!(km_log_diagonal(|_, _, _| LogSplitSample { log_factor: ZERO, value: ZERO }, &g, 4).is_err());
    }

    #[test]
    fn zero_factor_gives_zero() {
        let g = unit(32);
        let a = km_log_diagonal(|_, _, _| LogSplitSample { log_factor: ZERO, value: ZERO }, &g, 4).unwrap();
        assert_eq!(a.norm(), 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(20);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
        let moment: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((moment - 2.0 / 39.0).abs() < 1e-14);
    }

    #[test]
    fn singular_rule_integrates_log() {
        // ∫₀^{2π} log|2 sin(t/2)| dt = 0 and ∫ log|2 sin(t/2)| cos(3t) dt = −π/3
        let (t, w) = singular_period_rule(16);
        let i0: f64 = t.iter().zip(&w).map(|(t, w)| w * log_sine(*t)).sum();
        let i3: f64 = t.iter().zip(&w).map(|(t, w)| w * log_sine(*t) * (3.0 * t).cos()).sum();
        assert!(i0.abs() < 1e-13, "{i0}");
        assert!((i3 + PI / 3.0).abs() < 1e-13, "{i3}");
    }

    #[test]
    fn log_diagonal_on_pure_log_kernel() {
        // kernel log|2 sin((φ−θ)/2)| on the unit circle: entry(m,m) = (2π)² · (−1/(2|m|))
        let g = unit(48);
        let a = km_log_diagonal(
            |x, y, diag| {
                let t = (y.x[1].atan2(y.x[0])) - (x.x[1].atan2(x.x[0]));
                LogSplitSample {
                    log_factor: Complex64::new(1.0, 0.0),
                    value: if diag { ZERO } else { Complex64::new(log_sine(t), 0.0) },
                }
            },
            &g,
            3,
        )
        .unwrap();
        for m in 0..7 {
            for n in 0..7 {
                let mm = m as i64 - 3;
                let expected = if m == n { 4.0 * PI * PI * log_sine_coefficient(mm) } else { 0.0 };
                assert!((a[(m, n)].re - expected).abs() < 1e-12 && a[(m, n)].im.abs() < 1e-12);
            }
        }
    }
}

//! Bessel and Hankel functions of integer order for complex arguments.
//!
//! Three evaluation regimes are used, selected by `|z|`:
//!
//! * `|z| <= SERIES_RADIUS`: ascending power series for `J_n`, `Y_0`, `Y_1`.
//! * `SERIES_RADIUS < |z| <= ASYMPTOTIC_RADIUS`: Miller backward recurrence for
//!   `J_n`, normalized against the generating-function sum `e^{±iz}`, and the
//!   Neumann series for `Y_0`, `Y_1` built from those `J_n`.
//! * `|z| > ASYMPTOTIC_RADIUS`: Hankel asymptotic expansions for `H_0`, `H_1`,
//!   with `J_n` still from Miller recurrence.
//!
//! `Y_n` for `n >= 2` always comes from forward recurrence, which is stable for
//! the second-kind functions. Negative orders use `C_{-n} = (-1)^n C_n`.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_RADIUS: f64 = 4.0;
const ASYMPTOTIC_RADIUS: f64 = 20.0;
const RESCALE_LIMIT: f64 = 1e150;

fn check_finite(z: Complex64) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("non-finite argument {z}")))
    }
}

fn check_nonzero(z: Complex64) -> Result<()> {
    check_finite(z)?;
    if z.norm() == 0.0 {
        Err(Error::Domain("Hankel and Y functions are singular at z = 0".into()))
    } else {
        Ok(())
    }
}

fn reflect(n: i32, value: Complex64) -> Complex64 {
    if n < 0 && n % 2 != 0 {
        -value
    } else {
        value
    }
}

/// Ascending series for `J_n(z)`, `n >= 0`.
fn j_series(n: usize, z: Complex64) -> Complex64 {
    let half = z * 0.5;
    let mut lead = Complex64::new(1.0, 0.0);
    for k in 1..=n {
        lead = lead * half / k as f64;
    }
    if lead.norm() == 0.0 {
        return lead;
    }
    let q = -half * half;
    let mut term = lead;
    let mut sum = lead;
    for k in 1..200 {
        term = term * q / ((k * (n + k)) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// Ascending series for `Y_0` and `Y_1 + 2/(πz)`.
fn y01_series(z: Complex64, j0: Complex64, j1: Complex64) -> (Complex64, Complex64) {
    let half = z * 0.5;
    let log_term = half.ln() + EULER_GAMMA;
    let q = half * half;

    // Y_0: (2/π)(log(z/2)+γ) J_0 + (2/π) Σ_{k≥1} (-1)^{k+1} H_k (z²/4)^k / (k!)²
    let mut term = Complex64::new(1.0, 0.0);
    let mut harmonic = 0.0;
    let mut tail0 = Complex64::new(0.0, 0.0);
    for k in 1..200 {
        term = -term * q / ((k * k) as f64);
        harmonic += 1.0 / k as f64;
        let contrib = -term * harmonic;
        tail0 += contrib;
        if contrib.norm() <= 1e-17 * tail0.norm().max(1e-300) {
            break;
        }
    }
    let y0 = FRAC_2_PI * (log_term * j0 + tail0);

    // Y_1 + 2/(πz) = (2/π) log(z/2) J_1 - (1/π)(z/2) Σ_k (ψ(k+1)+ψ(k+2)) (-z²/4)^k / (k!(k+1)!)
    let mut term = Complex64::new(1.0, 0.0);
    let mut psi_k1 = -EULER_GAMMA;
    let mut psi_k2 = 1.0 - EULER_GAMMA;
    let mut sum = term * (psi_k1 + psi_k2);
    for k in 1..200 {
        term = -term * q / ((k * (k + 1)) as f64);
        psi_k1 += 1.0 / k as f64;
        psi_k2 += 1.0 / (k + 1) as f64;
        let contrib = term * (psi_k1 + psi_k2);
        sum += contrib;
        if contrib.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    let y1_reg = FRAC_2_PI * half.ln() * j1 - half * sum / PI;
    (y0, y1_reg)
}

/// Miller backward recurrence: `J_0 ..= J_top` with `top >= nmax`.
fn j_miller(nmax: usize, z: Complex64) -> Vec<Complex64> {
    let r = z.norm();
    let base = (nmax as f64).max(r);
    let mut start = (base + 20.0 + (40.0 * base).sqrt()).ceil() as usize;
    start += start % 2;
    let mut vals = vec![Complex64::new(0.0, 0.0); start + 2];
    vals[start] = Complex64::new(1e-30, 0.0);
    for k in (1..=start).rev() {
        let next = vals[k] * (2.0 * k as f64) / z - vals[k + 1];
        vals[k - 1] = next;
        if next.norm() > RESCALE_LIMIT {
            for v in vals.iter_mut().skip(k - 1) {
                *v /= RESCALE_LIMIT;
            }
        }
    }
    // e^{±iz} = J_0 + 2 Σ_{k≥1} (±i)^k J_k, using the sign with |e^{±iz}| >= 1.
    let sign = if z.im <= 0.0 { 1.0 } else { -1.0 };
    let unit = Complex64::new(0.0, sign);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut total = vals[0];
    for v in vals.iter().take(start + 1).skip(1) {
        phase *= unit;
        total += 2.0 * phase * v;
    }
    let target = (Complex64::new(0.0, sign) * z).exp();
    // divide through the magnitude first so |total|^2 cannot overflow
    let size = total.norm();
    let scale = target / (total / size) / size;
    vals.truncate(nmax.max(1) + 1);
    for v in vals.iter_mut() {
        *v *= scale;
    }
    vals
}

/// Neumann series for `Y_0` and `Y_1` from a table of `J_k`.
fn y01_neumann(z: Complex64, j: &[Complex64]) -> (Complex64, Complex64) {
    let log_term = (z * 0.5).ln() + EULER_GAMMA;
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = Complex64::new(0.0, 0.0);
    let kmax = (j.len() - 2) / 2;
    for k in 1..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
    }
    let y0 = FRAC_2_PI * log_term * j[0] - 2.0 * FRAC_2_PI * s0;
    let y1 = -FRAC_2_PI * j[0] / z + FRAC_2_PI * log_term * j[1] + FRAC_2_PI * s1;
    (y0, y1)
}

/// Hankel asymptotic expansion of `H_ν^{(1)}(z)` for integer ν and large `|z|`.
fn hankel1_asymptotic(nu: usize, z: Complex64) -> Complex64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let i = Complex64::new(0.0, 1.0);
    let mut last = f64::INFINITY;
    for k in 1..100 {
        let odd = (2 * k - 1) as f64;
        term = term * i * (mu - odd * odd) / (k as f64 * 8.0 * z);
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        last = size;
        if size < 1e-17 * sum.norm() {
            break;
        }
    }
    let phase = z - (nu as f64) * FRAC_PI_2 - FRAC_PI_4;
    (Complex64::new(FRAC_2_PI, 0.0) / z).sqrt() * (i * phase).exp() * sum
}

/// `J_0..=J_nmax` and `Y_0`, `Y_1` together with `Y_1 + 2/(πz)`.
struct Base {
    j: Vec<Complex64>,
    y0: Complex64,
    y1: Complex64,
    y1_reg: Complex64,
}

fn base(nmax: usize, z: Complex64) -> Base {
    let r = z.norm();
    if r <= SERIES_RADIUS {
        let j: Vec<Complex64> = (0..=nmax.max(1)).map(|n| j_series(n, z)).collect();
        let (y0, y1_reg) = y01_series(z, j[0], j[1]);
        let y1 = y1_reg - FRAC_2_PI / z;
        Base { j, y0, y1, y1_reg }
    } else if r <= ASYMPTOTIC_RADIUS {
        let top = nmax.max((r + 40.0) as usize);
        let all = j_miller(top + 1, z);
        let (y0, y1) = y01_neumann(z, &all);
        let mut j = all;
        j.truncate(nmax.max(1) + 1);
        Base { j, y0, y1, y1_reg: y1 + FRAC_2_PI / z }
    } else {
        let j = j_miller(nmax.max(1), z);
        let i = Complex64::new(0.0, 1.0);
        let y0 = (hankel1_asymptotic(0, z) - j[0]) / i;
        let y1 = (hankel1_asymptotic(1, z) - j[1]) / i;
        Base { j, y0, y1, y1_reg: y1 + FRAC_2_PI / z }
    }
}

/// Cylinder functions `J_n`, `Y_n` for orders `0..=nmax` at one argument.
///
/// Accessors accept negative orders and apply the reflection identities.
#[derive(Debug, Clone)]
pub struct BesselTable {
    z: Complex64,
    j: Vec<Complex64>,
    y: Option<Vec<Complex64>>,
}

impl BesselTable {
    /// First-kind functions only; valid at `z = 0`.
    pub fn first_kind(nmax: usize, z: Complex64) -> Result<Self> {
        check_finite(z)?;
        if z.norm() == 0.0 {
            let mut j = vec![Complex64::new(0.0, 0.0); nmax + 2];
            j[0] = Complex64::new(1.0, 0.0);
            return Ok(Self { z, j, y: None });
        }
        let b = base(nmax + 1, z);
        Ok(Self { z, j: b.j, y: None })
    }

    /// Both kinds; `z` must be nonzero.
    pub fn new(nmax: usize, z: Complex64) -> Result<Self> {
        check_nonzero(z)?;
        let b = base(nmax + 1, z);
        let mut y = Vec::with_capacity(nmax + 2);
        y.push(b.y0);
        y.push(b.y1);
        for k in 1..=nmax {
            let next = y[k] * (2.0 * k as f64) / z - y[k - 1];
            y.push(next);
        }
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "Y_n overflow for n <= {} at z = {z}",
                nmax + 1
            )));
        }
        Ok(Self { z, j: b.j, y: Some(y) })
    }

    pub fn arg(&self) -> Complex64 {
        self.z
    }

    /// Highest order whose derivative is available.
    pub fn max_order(&self) -> usize {
        self.j.len() - 2
    }

    fn raw_j(&self, n: usize) -> Complex64 {
        self.j[n]
    }

    fn raw_y(&self, n: usize) -> Complex64 {
        self.y.as_ref().expect("second-kind table not computed")[n]
    }

    pub fn j(&self, n: i32) -> Complex64 {
        reflect(n, self.raw_j(n.unsigned_abs() as usize))
    }

    pub fn y(&self, n: i32) -> Complex64 {
        reflect(n, self.raw_y(n.unsigned_abs() as usize))
    }

    pub fn h1(&self, n: i32) -> Complex64 {
        self.j(n) + Complex64::new(0.0, 1.0) * self.y(n)
    }

    pub fn j_prime(&self, n: i32) -> Complex64 {
        0.5 * (self.j(n - 1) - self.j(n + 1))
    }

    pub fn h1_prime(&self, n: i32) -> Complex64 {
        0.5 * (self.h1(n - 1) - self.h1(n + 1))
    }
}

/// `J_n(z)`.
pub fn bessel_j(n: i32, z: Complex64) -> Result<Complex64> {
    Ok(BesselTable::first_kind(n.unsigned_abs() as usize, z)?.j(n))
}

/// `Y_n(z)`.
pub fn bessel_y(n: i32, z: Complex64) -> Result<Complex64> {
    Ok(BesselTable::new(n.unsigned_abs() as usize, z)?.y(n))
}

/// `H_n^{(1)}(z) = J_n(z) + i Y_n(z)`.
pub fn hankel1(n: i32, z: Complex64) -> Result<Complex64> {
    let v = BesselTable::new(n.unsigned_abs() as usize, z)?.h1(n);
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numerical(format!("H_{n}(z) overflow at z = {z}")))
    }
}

/// `d/dz H_n^{(1)}(z)` via `(H_{n-1} - H_{n+1})/2`.
pub fn hankel1_prime(n: i32, z: Complex64) -> Result<Complex64> {
    Ok(BesselTable::new(n.unsigned_abs() as usize + 1, z)?.h1_prime(n))
}

/// `d/dz J_n(z)`.
pub fn bessel_j_prime(n: i32, z: Complex64) -> Result<Complex64> {
    Ok(BesselTable::first_kind(n.unsigned_abs() as usize + 1, z)?.j_prime(n))
}

/// Orders 0 and 1 at once, the hot path for kernel tabulation.
#[derive(Debug, Clone, Copy)]
pub struct Cylinder01 {
    pub j0: Complex64,
    pub j1: Complex64,
    pub y0: Complex64,
    pub y1: Complex64,
    /// `Y_1(z) + 2/(πz)`, free of the pole so it can be used without cancellation.
    pub y1_regular: Complex64,
}

impl Cylinder01 {
    pub fn h0(&self) -> Complex64 {
        self.j0 + Complex64::new(0.0, 1.0) * self.y0
    }

    pub fn h1(&self) -> Complex64 {
        self.j1 + Complex64::new(0.0, 1.0) * self.y1
    }

    /// `H_1^{(1)}(z) + 2i/(πz)`.
    pub fn h1_regular(&self) -> Complex64 {
        self.j1 + Complex64::new(0.0, 1.0) * self.y1_regular
    }
}

pub fn cylinder01(z: Complex64) -> Result<Cylinder01> {
    check_nonzero(z)?;
    let b = base(1, z);
    Ok(Cylinder01 {
        j0: b.j[0],
        j1: b.j[1],
        y0: b.y0,
        y1: b.y1,
        y1_regular: b.y1_reg,
    })
}

/// `J_0(z)` and `J_1(z)`, finite at `z = 0`.
pub fn bessel_j01(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() == 0.0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let b = base(1, z);
    (b.j[0], b.j[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn reference_values_at_one() {
        let z = c(1.0, 0.0);
        assert!(rel(bessel_j(0, z).unwrap(), c(0.765_197_686_557_966_6, 0.0)) < 1e-14);
        let h = hankel1(0, z).unwrap();
        assert!(rel(h, c(0.765_197_686_557_966_6, 0.088_256_964_215_676_96)) < 1e-13);
        assert!(rel(bessel_j(1, z).unwrap(), c(0.440_050_585_744_933_5, 0.0)) < 1e-14);
        assert!(rel(bessel_y(1, z).unwrap(), c(-0.781_212_821_300_288_7, 0.0)) < 1e-13);
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_j(0, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        assert_eq!(bessel_j(1, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(matches!(hankel1(0, c(0.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(bessel_j(0, c(f64::NAN, 0.0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn regimes_agree_at_boundaries() {
        for &phase in &[0.0, -0.2, 0.15, 1.3] {
            let z = Complex64::from_polar(SERIES_RADIUS, phase);
            let miller = j_miller(6, z);
            for (n, m) in miller.iter().enumerate() {
                assert!(rel(j_series(n, z), *m) < 1e-13, "J_{n} at {z}");
            }
            let (y0s, y1s) = y01_series(z, miller[0], miller[1]);
            let (y0n, y1n) = y01_neumann(z, &j_miller(80, z));
            assert!(rel(y0s, y0n) < 1e-12, "Y_0 at {z}");
            assert!(rel(y1s - FRAC_2_PI / z, y1n) < 1e-12, "Y_1 at {z}");

            if phase.abs() > 0.5 {
                // J + iY cancels catastrophically far from the real axis
                continue;
            }
            let z = Complex64::from_polar(ASYMPTOTIC_RADIUS, phase);
            let j = j_miller(120, z);
            let (y0, y1) = y01_neumann(z, &j);
            let i = Complex64::new(0.0, 1.0);
            assert!(rel(j[0] + i * y0, hankel1_asymptotic(0, z)) < 1e-12, "H_0 at {z}");
            assert!(rel(j[1] + i * y1, hankel1_asymptotic(1, z)) < 1e-12, "H_1 at {z}");
        }
    }

    #[test]
    fn reflection_identities() {
        let z = c(2.3, -0.4);
        let t = BesselTable::new(6, z).unwrap();
        for n in 1..6 {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!(rel(t.h1(-n), s * t.h1(n)) < 1e-15);
            assert!(rel(t.h1_prime(-n), s * t.h1_prime(n)) < 1e-13);
        }
        assert!(rel(t.h1_prime(0), -t.h1(1)) < 1e-15);
    }

    #[test]
    fn small_argument_hankel_limit() {
        // H_0(z) - [1 + (2i/π)(log(z/2) + γ)] = O(z² log z)
        for &x in &[1e-3, 1e-5, 1e-7] {
            let z = c(x, -0.1 * x);
            let h = hankel1(0, z).unwrap();
            let lead = 1.0 + Complex64::new(0.0, FRAC_2_PI) * ((z * 0.5).ln() + EULER_GAMMA);
            assert!((h - lead).norm() < 10.0 * x * x * x.ln().abs());
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let z = c(1.0, 0.0);
        let h = 1e-6;
        let fd = (hankel1(1, z + h).unwrap() - hankel1(1, z - h).unwrap()) / (2.0 * h);
        assert!((hankel1_prime(1, z).unwrap() - fd).norm() < 1e-8);
    }

    #[test]
    fn regular_part_of_y1() {
        for &z in &[c(1e-4, 0.0), c(0.5, -0.01), c(7.0, 0.3), c(30.0, -1.0)] {
            let t = cylinder01(z).unwrap();
            let direct = t.y1 + FRAC_2_PI / z;
            assert!((t.y1_regular - direct).norm() < 1e-12 * (1.0 + FRAC_2_PI / z.norm()));
        }
    }
}

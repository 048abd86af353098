//! Dense complex linear algebra used by the assembly and solver stages.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Smallest singular value with its left and right singular vectors:
/// `A v = σ u`.
#[derive(Debug, Clone)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: CVector,
    pub v: CVector,
}

/// Minimal singular triplet from a full SVD.
pub fn smallest_singular(a: &CMatrix) -> Result<SingularTriplet> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let svd = a.clone().try_svd(true, true, 1e-15, 10_000).ok_or_else(|| {
        Error::Numerical(format!(
            "SVD did not converge for a {}x{} matrix with max entry {:.3e}",
            a.nrows(),
            a.ncols(),
            max_abs(a)
        ))
    })?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, s)| if *s < best.1 { (k, *s) } else { best });
    let mut u = svd.u.as_ref().expect("requested").column(k).into_owned();
    let v = svd.v_t.as_ref().expect("requested").row(k).adjoint();
    // deflation may round the smallest value to zero; the residual keeps its size
    let av = a * &v;
    let sigma = av.norm();
    if sigma > 0.0 {
        u = av / Complex64::new(sigma, 0.0);
    }
    Ok(SingularTriplet { sigma, u, v })
}

/// All singular values, descending.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Inverse Euclidean row norms (1 for zero rows).
pub fn row_scaling(a: &CMatrix) -> Vec<f64> {
    a.row_iter()
        .map(|r| {
            let n = r.norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect()
}

pub fn scale_rows(a: &mut CMatrix, d: &[f64]) {
    for (i, mut row) in a.row_iter_mut().enumerate() {
        row *= Complex64::new(d[i], 0.0);
    }
}

/// Householder reflector `H = I − 2 h hᴴ/‖h‖²` with `H e₁ ∥ w`. Its columns
/// 2..n are an orthonormal basis of `w^⊥` (with respect to `⟨a, b⟩ = aᴴb`).
pub fn householder_basis(w: &CVector) -> Result<CMatrix> {
    let n = w.len();
    let norm = w.norm();
    if n == 0 || norm == 0.0 {
        return Err(Error::InvalidArgument("cannot complete a zero vector".into()));
    }
    let x = w / Complex64::new(norm, 0.0);
    // reflect x onto e^{iθ} e₁ with the phase of x₀, choosing the sign that avoids cancellation
    let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
    let mut h = x.clone();
    h[0] += phase;
    let hn2 = h.norm_squared();
    let mut basis = CMatrix::identity(n, n);
    if hn2 > 0.0 {
        basis -= &h * h.adjoint() * Complex64::new(2.0 / hn2, 0.0);
    }
    Ok(basis)
}

/// Orthonormal basis of the orthogonal complement of `w` (n × (n−1)).
pub fn complement_basis(w: &CVector) -> Result<CMatrix> {
    let h = householder_basis(w)?;
    Ok(h.columns(1, w.len() - 1).into_owned())
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular matrix in linear solve".into()))
}

/// Eigenvalues and unit eigenvectors of a general complex matrix via the
/// Schur form `A = Q T Qᴴ` and back substitution on `T`.
pub fn eig(a: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols(),
        });
    }
    let schur = nalgebra::Schur::try_new(a.clone(), 1e-15, 100_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let lambda: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    let scale = max_abs(&t).max(f64::MIN_POSITIVE);
    let mut vectors = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut y = CVector::zeros(n);
        y[k] = ONE;
        for j in (0..k).rev() {
            let mut s = ZERO;
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[l];
            }
            let mut d = t[(j, j)] - lambda[k];
            if d.norm() < 1e-14 * scale {
                d = Complex64::new(1e-14 * scale, 0.0);
            }
            y[j] = -s / d;
        }
        let x = &q * y;
        let norm = x.norm();
        vectors.set_column(k, &(x / Complex64::new(norm, 0.0)));
    }
    Ok((lambda, vectors))
}

/// `|aᴴ b| / (‖a‖ ‖b‖)`.
pub fn overlap(a: &CVector, b: &CVector) -> f64 {
    let d = a.norm() * b.norm();
    if d == 0.0 {
        0.0
    } else {
        a.dotc(b).norm() / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| {
            c(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i + 2 * j) % 5) as f64 - 2.0)
        })
    }

    #[test]
    fn singular_triplet_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3.0, 0.0), c(0.0, -0.5), c(2.0, 0.0)]));
        let t = smallest_singular(&a).unwrap();
        assert!((t.sigma - 0.5).abs() < 1e-15);
        assert!((&a * &t.v - &t.u * c(t.sigma, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn singular_triplet_general() {
        let a = sample(9);
        let t = smallest_singular(&a).unwrap();
        assert!((&a * &t.v - &t.u * c(t.sigma, 0.0)).norm() < 1e-12);
        let s = singular_values(&a);
        assert!((s[s.len() - 1] - t.sigma).abs() < 1e-12);
    }

    #[test]
    fn householder_complement_is_orthonormal() {
        let w = CVector::from_vec(vec![c(1.0, 0.5), c(-0.3, 2.0), c(0.0, 0.0), c(4.0, -1.0)]);
        let y = complement_basis(&w).unwrap();
        assert!((y.adjoint() * &y - CMatrix::identity(3, 3)).norm() < 1e-14);
        assert!((w.adjoint() * &y).norm() < 1e-14);
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = sample(8);
        let (lambda, v) = eig(&a).unwrap();
        for (k, l) in lambda.iter().enumerate() {
            let x = v.column(k);
            let r = &a * x - x * *l;
            assert!(r.norm() < 1e-10 * l.norm().max(1.0), "k={k} r={}", r.norm());
        }
    }
}

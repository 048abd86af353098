//! Resonance pipeline: asymptotic seeds, the effective fixed-point
//! eigenvalue iteration, Newton refinement on the smallest singular value of
//! the full matrix, and spurious/duplicate filtering.

use log::{debug, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly_effective::{assemble_effective, capacitance_f0, AssemblyMethod, EffectiveMatrices};
use crate::assembly_full::FullAssembler;
use crate::asymptotics::{seeds, BranchSeeds};
use crate::error::{Error, Result};
use crate::geometry::ResonatorSystem;
use crate::linalg::{eig, max_abs, overlap, row_scaling, scale_rows, smallest_singular, CMatrix, CVector};

pub use crate::asymptotics::BranchClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative step tolerance of the fixed-point and Newton iterations.
    pub eps_rel: f64,
    /// Acceptance threshold on `σ_min(DA)/‖DA‖_max`, `D` the row equilibration.
    pub eps_sigma: f64,
    /// Duplicate threshold relative to `|ω|`.
    pub eps_dist: f64,
    pub max_newton: usize,
    pub max_fixed_point: usize,
    /// Relative finite-difference step for `A'(ω)`.
    pub fd_step: f64,
    /// Per-branch fixed point in complex `log ω` after the mean update.
    pub polish: bool,
    pub assembly: AssemblyMethod,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_rel: 1e-10,
            eps_sigma: 1e-8,
            eps_dist: 1e-6,
            max_newton: 30,
            max_fixed_point: 100,
            fd_step: 1e-6,
            polish: true,
            assembly: AssemblyMethod::Auto,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_rel", self.eps_rel),
            ("eps_sigma", self.eps_sigma),
            ("eps_dist", self.eps_dist),
            ("fd_step", self.fd_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_newton == 0 || self.max_fixed_point == 0 {
            return Err(Error::Config("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Seed,
    Effective,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceBranch {
    pub omega: Complex64,
    pub branch_class: BranchClass,
    pub stage: Stage,
    /// Unit coefficients over `(j, n)`; for refined branches the interior density.
    pub mode_coeffs: Vec<Complex64>,
    /// Relative residual `σ_min(DA)/‖DA‖_max` (refined stage only).
    pub sigma_min: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Asymptotic seed this branch started from.
    pub seed: Complex64,
    /// Effective-stage value, when that stage ran.
    pub effective: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub n: usize,
    pub f: usize,
    pub delta: f64,
    pub stage: Stage,
    pub settings: SolverSettings,
    pub omega_log_seed: Complex64,
    pub omega_reg_seeds: Vec<Complex64>,
    pub fixed_point_iterations: usize,
    pub effective_converged: bool,
    pub accepted: Vec<ResonanceBranch>,
    pub spurious: Vec<ResonanceBranch>,
    pub duplicate: Vec<ResonanceBranch>,
}

impl SolverReport {
    pub fn count(&self, class: BranchClass) -> usize {
        self.accepted.iter().filter(|b| b.branch_class == class).count()
    }
}

fn right_sqrt(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

fn unit(v: CVector) -> Vec<Complex64> {
    let n = v.norm();
    v.iter().map(|z| z / n).collect()
}

/// Branches straight from the asymptotic formulas.
pub fn seed_branches(seeds: &BranchSeeds, f: usize) -> Vec<ResonanceBranch> {
    seeds
        .branches()
        .into_iter()
        .zip(seeds.lifted(f))
        .map(|((omega, class, _), v)| ResonanceBranch {
            omega,
            branch_class: class,
            stage: Stage::Seed,
            mode_coeffs: unit(v),
            sigma_min: None,
            iterations: 0,
            converged: true,
            seed: omega,
            effective: None,
        })
        .collect()
}

/// Greedy maximal-overlap assignment of candidates to references. Two overlaps
/// within 10% of each other are decided by proximity in `|ω|`.
fn match_by_overlap(refs: &[(Complex64, CVector)], cands: &[(Complex64, CVector)]) -> Vec<usize> {
    let mut taken = vec![false; cands.len()];
    let mut out = Vec::with_capacity(refs.len());
    for (w_ref, v_ref) in refs {
        let mut scored: Vec<(usize, f64)> = (0..cands.len())
            .filter(|&k| !taken[k])
            .map(|k| (k, overlap(v_ref, &cands[k].1)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut pick = scored[0].0;
        if scored.len() > 1 && scored[1].1 >= 0.9 * scored[0].1 {
            let d = |k: usize| (cands[k].0.norm() - w_ref.norm()).abs();
            if d(scored[1].0) < d(pick) {
                pick = scored[1].0;
            }
        }
        taken[pick] = true;
        out.push(pick);
    }
    out
}

/// Rank-revealing factor `K₁ = Q (Qᴴ K₁)` from a sketch with `cols` probe
/// vectors. `None` if the sketch does not capture `K₁`.
fn low_rank_k1(k1: &CMatrix, cols: usize) -> Option<(CMatrix, CMatrix)> {
    let dim = k1.nrows();
    let cols = cols.min(dim);
    let probe = CMatrix::from_fn(dim, cols, |i, j| {
        let t = (i * 31 + j * 17 + 3) as f64;
        Complex64::new((0.7 * t).sin(), (1.3 * t + 0.2).cos())
    });
    let q = (k1 * probe).qr().q();
    let r = q.adjoint() * k1;
    let err = max_abs(&(k1 - &q * &r));
    if err > 1e-12 * max_abs(k1).max(f64::MIN_POSITIVE) {
        return None;
    }
    Some((q, r))
}

/// Eigenproblem `κ x = (A₀ + Δμ L R) x` around the eigendecomposition
/// `A₀ = W Λ W⁻¹`, with `L R = P⁻¹K₁` of small rank. Each eigenvalue of `A₀`
/// is continued in `Δμ` through a secular equation of the size of the rank.
struct SecularModel {
    lambda: Vec<Complex64>,
    w: CMatrix,
    // columns a_k = (R W) e_k, rows b_k = eₖᵀ W⁻¹ L
    a: CMatrix,
    b: CMatrix,
}

impl SecularModel {
    fn rank(&self) -> usize {
        self.a.nrows()
    }

    /// `M = I + Δμ Σ_{k≠j} a_k b_kᵀ / (λ_k − κ)` and its solve against `a_j`.
    fn reduced(&self, j: usize, kappa: Complex64, dmu: Complex64) -> Option<CVector> {
        let r = self.rank();
        let mut m = CMatrix::identity(r, r);
        for k in 0..self.lambda.len() {
            if k == j {
                continue;
            }
            let s = dmu / (self.lambda[k] - kappa);
            for p in 0..r {
                let ap = self.a[(p, k)] * s;
                for q in 0..r {
                    m[(p, q)] += ap * self.b[(k, q)];
                }
            }
        }
        m.lu().solve(&self.a.column(j).into_owned())
    }

    /// `κ − λ_j − Δμ b_jᵀ M⁻¹ a_j`; zero exactly on an eigenvalue of the continued branch.
    fn residual(&self, j: usize, kappa: Complex64, dmu: Complex64) -> Option<Complex64> {
        let s = self.reduced(j, kappa, dmu)?;
        let r = (0..self.rank()).map(|p| self.b[(j, p)] * s[p]).sum::<Complex64>();
        Some(kappa - self.lambda[j] - dmu * r)
    }

    /// Secant iteration on the residual. `dmu` may depend on `κ`.
    fn root(
        &self,
        j: usize,
        start: Complex64,
        dmu: impl Fn(Complex64) -> Complex64,
        tol: f64,
        max_iter: usize,
    ) -> Option<(Complex64, usize)> {
        let g = |k: Complex64| self.residual(j, k, dmu(k));
        let mut k0 = start;
        let mut g0 = g(k0)?;
        let mut k1 = k0 - g0;
        for it in 1..=max_iter {
            if (k1 - k0).norm() <= tol * k1.norm() {
                return Some((k1, it));
            }
            let g1 = g(k1)?;
            if g1 == g0 {
                return Some((k1, it));
            }
            let k2 = k1 - g1 * (k1 - k0) / (g1 - g0);
            k0 = k1;
            g0 = g1;
            k1 = k2;
            if !(k1.re.is_finite() && k1.im.is_finite()) {
                return None;
            }
        }
        None
    }

    fn vector(&self, j: usize, kappa: Complex64, dmu: Complex64) -> Option<CVector> {
        let s = self.reduced(j, kappa, dmu)?;
        let mut z = CVector::zeros(self.lambda.len());
        for k in 0..self.lambda.len() {
            z[k] = if k == j {
                Complex64::new(1.0, 0.0)
            } else {
                let bs = (0..self.rank()).map(|p| self.b[(k, p)] * s[p]).sum::<Complex64>();
                -dmu * bs / (self.lambda[k] - kappa)
            };
        }
        Some(&self.w * z)
    }
}

/// Outcome of the effective stage.
#[derive(Debug, Clone)]
pub struct EffectiveOutcome {
    pub branches: Vec<ResonanceBranch>,
    pub iterations: usize,
}

/// Fixed-point iteration on the effective matrix with `log ω` frozen at the
/// mean modulus `ω₀`, followed (if enabled) by a per-branch polish in which
/// each branch freezes `log ω` at its own complex value.
///
/// One eigendecomposition is done at the starting `ω₀`; since `K₁` has rank
/// at most three, later values of `log ω` move each eigenvalue along a small
/// secular equation.
pub fn effective_stage(
    eff: &EffectiveMatrices,
    seeds: &BranchSeeds,
    delta: f64,
    settings: &SolverSettings,
) -> Result<EffectiveOutcome> {
    let count = seeds.len();
    let p = &eff.c0 * Complex64::new(1.0 - delta, 0.0) - &eff.gram * Complex64::new(delta, 0.0);
    let p_lu = p.lu();
    let p_solve = |b: &CMatrix| {
        p_lu.solve(b)
            .ok_or_else(|| Error::Numerical("singular matrix in linear solve".into()))
    };
    let seeds_ref: Vec<(Complex64, CVector)> = seeds
        .branches()
        .into_iter()
        .zip(seeds.lifted(eff.f))
        .map(|((w, _, _), v)| (w, v))
        .collect();
    let mean = |w: &[Complex64]| w.iter().map(|w| w.norm()).sum::<f64>() / w.len() as f64;
    let omega_start = mean(&seeds_ref.iter().map(|r| r.0).collect::<Vec<_>>());
    let mu0 = omega_start.ln();

    let a0 = p_solve(&(&eff.k1 * Complex64::new(mu0, 0.0) + &eff.k2))?;
    let (lambda, w) = eig(&a0)?;
    let mut order: Vec<usize> = (0..lambda.len()).filter(|&k| lambda[k].norm() > 0.0).collect();
    order.sort_by(|&x, &y| lambda[y].norm().total_cmp(&lambda[x].norm()));
    order.truncate(count);
    if order.len() < count {
        return Err(Error::Numerical("effective problem has too few finite eigenvalues".into()));
    }
    let cands: Vec<(Complex64, CVector)> = order
        .iter()
        .map(|&k| (right_sqrt(1.0 / lambda[k]), w.column(k).into_owned()))
        .collect();
    let poles: Vec<usize> = match_by_overlap(&seeds_ref, &cands).into_iter().map(|i| order[i]).collect();

    let (q, r) = low_rank_k1(&eff.k1, 6)
        .ok_or_else(|| Error::Numerical("K1 is not of low rank".into()))?;
    let l = p_solve(&q)?;
    let b = w
        .clone()
        .lu()
        .solve(&l)
        .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;
    let model = SecularModel {
        a: r * &w,
        b,
        lambda,
        w,
    };
    let tol = 1e-3 * settings.eps_rel;
    let lost = |j: usize| Error::NonConvergence(format!("effective branch {j} could not be continued"));

    let mut kappa: Vec<Complex64> = poles.iter().map(|&k| model.lambda[k]).collect();
    let mut omega0 = omega_start;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < settings.max_fixed_point {
        iterations += 1;
        let dmu = Complex64::new(omega0.ln() - mu0, 0.0);
        for (j, &pole) in poles.iter().enumerate() {
            kappa[j] = model
                .root(pole, kappa[j], |_| dmu, tol, settings.max_fixed_point)
                .ok_or_else(|| lost(j))?
                .0;
        }
        let omegas: Vec<Complex64> = kappa.iter().map(|k| right_sqrt(1.0 / k)).collect();
        let next = mean(&omegas);
        let step = (next - omega0).abs();
        omega0 = next;
        if step < settings.eps_rel * omega0 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "effective fixed point did not settle in {} iterations (ω₀ = {omega0:.3e})",
            settings.max_fixed_point
        )));
    }
    debug!("effective fixed point: ω₀ = {omega0:.6e} after {iterations} iterations");

    let mut counts = vec![iterations; count];
    let mut dmus = vec![Complex64::new(omega0.ln() - mu0, 0.0); count];
    if settings.polish {
        let own = |k: Complex64| right_sqrt(1.0 / k).ln() - mu0;
        for (j, &pole) in poles.iter().enumerate() {
            let (k, it) = model
                .root(pole, kappa[j], own, tol, settings.max_fixed_point)
                .ok_or_else(|| Error::NonConvergence(format!("effective polish of branch {j} did not settle")))?;
            kappa[j] = k;
            dmus[j] = own(k);
            counts[j] += it;
        }
    }
    let mut branches = Vec::with_capacity(count);
    for (j, (seed, class, _)) in seeds.branches().into_iter().enumerate() {
        let omega = right_sqrt(1.0 / kappa[j]);
        let v = model.vector(poles[j], kappa[j], dmus[j]).ok_or_else(|| lost(j))?;
        branches.push(ResonanceBranch {
            omega,
            branch_class: class,
            stage: Stage::Effective,
            mode_coeffs: unit(v),
            sigma_min: None,
            iterations: counts[j],
            converged: true,
            seed,
            effective: Some(omega),
        });
    }
    Ok(EffectiveOutcome { branches, iterations })
}

/// Newton step limited to `½|ω|`.
pub fn capped_step(step: Complex64, omega: Complex64) -> Complex64 {
    let cap = 0.5 * omega.norm();
    if step.norm() > cap {
        step * (cap / step.norm())
    } else {
        step
    }
}

/// Row-equilibrated `A(ω)` with its scaling.
fn equilibrated(assembler: &FullAssembler, omega: Complex64) -> Result<(CMatrix, Vec<f64>)> {
    let mut a = assembler.assemble(omega)?.matrix;
    let d = row_scaling(&a);
    scale_rows(&mut a, &d);
    Ok((a, d))
}

/// `σ_min(DA)/‖DA‖_max` at `ω` with its singular triplet.
pub fn relative_sigma(assembler: &FullAssembler, omega: Complex64) -> Result<(f64, CVector)> {
    let (a, _) = equilibrated(assembler, omega)?;
    let t = smallest_singular(&a)?;
    Ok((t.sigma / max_abs(&a), t.v))
}

/// Newton iteration on `g(ω) = uᴴ D A(ω) v` with `(u, v)` the smallest singular
/// pair of `D A(ω)` refreshed every step.
pub fn newton_refine(
    assembler: &FullAssembler,
    omega_start: Complex64,
    class: BranchClass,
    settings: &SolverSettings,
) -> Result<ResonanceBranch> {
    if omega_start.norm() == 0.0 {
        return Err(Error::Domain("Newton start must be nonzero".into()));
    }
    let mut omega = omega_start;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_newton {
        let (a, d) = equilibrated(assembler, omega)?;
        let t = smallest_singular(&a)?;
        let h = settings.fd_step * omega.norm();
        let hc = Complex64::new(h, 0.0);
        let mut plus = assembler.assemble(omega + hc)?.matrix;
        let mut minus = assembler.assemble(omega - hc)?.matrix;
        scale_rows(&mut plus, &d);
        scale_rows(&mut minus, &d);
        let derivative = (plus - minus) / Complex64::new(2.0 * h, 0.0);
        let g = t.u.dotc(&(&a * &t.v));
        let gp = t.u.dotc(&(derivative * &t.v));
        if gp.norm() <= f64::EPSILON * g.norm() || gp.norm() == 0.0 {
            return Err(Error::NonConvergence(format!("Newton stagnated at ω = {omega:.6e}: g' ≈ 0")));
        }
        let step = capped_step(g / gp, omega);
        omega -= step;
        iterations += 1;
        if step.norm() < settings.eps_rel * omega.norm() {
            converged = true;
            break;
        }
    }
    // physical representative of the pair (ω, −ω̄)
    if omega.re < 0.0 {
        omega = -omega.conj();
    }
    let (sigma, v) = relative_sigma(assembler, omega)?;
    let half = v.len() / 2;
    let phi = v.rows(0, half).into_owned();
    let coeffs = if phi.norm() > 0.0 { unit(phi) } else { unit(v) };
    if !converged {
        warn!("Newton hit the iteration cap at ω = {omega:.6e} (σ = {sigma:.2e})");
    }
    Ok(ResonanceBranch {
        omega,
        branch_class: class,
        stage: Stage::Refined,
        mode_coeffs: coeffs,
        sigma_min: Some(sigma),
        iterations,
        converged,
        seed: omega_start,
        effective: None,
    })
}

/// Accepted, spurious and duplicate lists, processed in order of `|ω|` (ties
/// by argument) so the outcome does not depend on candidate order.
pub fn accept_filter(
    mut candidates: Vec<ResonanceBranch>,
    settings: &SolverSettings,
) -> (Vec<ResonanceBranch>, Vec<ResonanceBranch>, Vec<ResonanceBranch>) {
    candidates.sort_by(|a, b| {
        a.omega
            .norm()
            .total_cmp(&b.omega.norm())
            .then(a.omega.arg().total_cmp(&b.omega.arg()))
    });
    let (mut accepted, mut spurious, mut duplicate) = (Vec::new(), Vec::new(), Vec::new());
    for c in candidates {
        let residual_ok = c.converged && c.sigma_min.is_some_and(|s| s < settings.eps_sigma);
        if !residual_ok {
            spurious.push(c);
            continue;
        }
        let dist = accepted
            .iter()
            .map(|a: &ResonanceBranch| (a.omega - c.omega).norm())
            .fold(f64::INFINITY, f64::min);
        if dist > settings.eps_dist * c.omega.norm() {
            accepted.push(c);
        } else {
            duplicate.push(c);
        }
    }
    (accepted, spurious, duplicate)
}

/// Run the pipeline up to `stage`.
pub fn run_pipeline(system: &ResonatorSystem, settings: &SolverSettings, stage: Stage) -> Result<SolverReport> {
    settings.validate()?;
    let delta = system.delta();
    let (k1, k2) = capacitance_f0(system)?;
    let seeds = seeds(&k1, &k2, delta)?;
    let mut report = SolverReport {
        n: system.len(),
        f: system.truncation(),
        delta,
        stage,
        settings: *settings,
        omega_log_seed: seeds.omega_log,
        omega_reg_seeds: seeds.omega_reg.clone(),
        fixed_point_iterations: 0,
        effective_converged: false,
        accepted: Vec::new(),
        spurious: Vec::new(),
        duplicate: Vec::new(),
    };
    let seed_list = seed_branches(&seeds, system.truncation());
    if stage == Stage::Seed {
        report.accepted = seed_list;
        return Ok(report);
    }
    let eff = assemble_effective(system, settings.assembly)?;
    let starts = match effective_stage(&eff, &seeds, delta, settings) {
        Ok(out) => {
            report.fixed_point_iterations = out.iterations;
            report.effective_converged = true;
            out.branches
        }
        Err(e) => {
            warn!("effective stage failed ({e}); falling back to seeds");
            seed_list
        }
    };
    if stage == Stage::Effective {
        report.accepted = starts;
        return Ok(report);
    }
    let assembler = FullAssembler::with_statics(system, settings.assembly, eff)?;
    let refined: Vec<ResonanceBranch> = starts
        .par_iter()
        .map(|b| match newton_refine(&assembler, b.omega, b.branch_class, settings) {
            Ok(r) => ResonanceBranch {
                seed: b.seed,
                effective: b.effective,
                ..r
            },
            Err(e) => {
                warn!("refinement from ω = {:.6e} failed: {e}", b.omega);
                ResonanceBranch {
                    converged: false,
                    stage: Stage::Refined,
                    ..b.clone()
                }
            }
        })
        .collect();
    let (accepted, spurious, duplicate) = accept_filter(refined, settings);
    report.accepted = accepted;
    report.spurious = spurious;
    report.duplicate = duplicate;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{auto_quadrature, BoundaryCurve};

    fn circles(centers: &[([f64; 2], f64)], delta: f64, f: usize) -> ResonatorSystem {
        let curves = centers.iter().map(|&(c, r)| BoundaryCurve::circle(c, r).unwrap()).collect();
        ResonatorSystem::new(curves, delta, f, auto_quadrature(f)).unwrap()
    }

    fn branch(omega: Complex64, sigma: f64) -> ResonanceBranch {
        ResonanceBranch {
            omega,
            branch_class: BranchClass::Regular,
            stage: Stage::Refined,
            mode_coeffs: vec![],
            sigma_min: Some(sigma),
            iterations: 1,
            converged: true,
            seed: omega,
            effective: None,
        }
    }

    #[test]
    fn step_cap() {
        let w = Complex64::new(1e-3, -1e-5);
        let s = capped_step(Complex64::new(0.0, 1.0), w);
        assert!((s.norm() - 0.5 * w.norm()).abs() < 1e-18);
        let small = Complex64::new(1e-5, 0.0);
        assert_eq!(capped_step(small, w), small);
    }

    #[test]
    fn filter_cases() {
        let s = SolverSettings::default();
        let w = Complex64::new(1e-3, -1e-4);
        let (acc, sp, dup) = accept_filter(
            vec![branch(w, 1e-12), branch(w * (1.0 + 1e-9), 1e-12), branch(w * 2.0, 1.0)],
            &s,
        );
        assert_eq!((acc.len(), sp.len(), dup.len()), (1, 1, 1));
    }

    #[test]
    fn single_circle_effective_matches_scalar_equation() {
        let delta = 1e-6;
        let sys = circles(&[([0.0, 0.0], 1.0)], delta, 0);
        let (k1, k2) = capacitance_f0(&sys).unwrap();
        let sd = seeds(&k1, &k2, delta).unwrap();
        let eff = assemble_effective(&sys, AssemblyMethod::Auto).unwrap();
        let out = effective_stage(&eff, &sd, delta, &SolverSettings::default()).unwrap();
        let w = out.branches[0].omega;
        // δ + ω²(μ₁ log ω + α) = 0
        let r = delta + w * w * (0.5 * w.ln() + k2[(0, 0)]);
        assert!(r.norm() < 1e-9 * delta, "{r}");
        let rel = (w - sd.omega_log).norm() / w.norm();
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn continued_branches_solve_their_own_eigenproblem() {
        let delta = 1e-5;
        let sys = circles(&[([0.0, 0.0], 1.0), ([2.7, 0.4], 0.8), ([0.5, 2.9], 1.1)], delta, 2);
        let (k1, k2) = capacitance_f0(&sys).unwrap();
        let sd = seeds(&k1, &k2, delta).unwrap();
        let eff = assemble_effective(&sys, AssemblyMethod::Auto).unwrap();
        let out = effective_stage(&eff, &sd, delta, &SolverSettings::default()).unwrap();
        let p = &eff.c0 * Complex64::new(1.0 - delta, 0.0) - &eff.gram * Complex64::new(delta, 0.0);
        for b in &out.branches {
            let a = p.clone().lu().solve(&(&eff.k1 * b.omega.ln() + &eff.k2)).unwrap();
            let kappa = 1.0 / (b.omega * b.omega);
            let x = CVector::from_vec(b.mode_coeffs.clone());
            assert!((&a * &x - &x * kappa).norm() < 1e-9 * kappa.norm(), "ω = {}", b.omega);
            let (lambda, _) = eig(&a).unwrap();
            let gap = lambda.iter().map(|l| (l - kappa).norm()).fold(f64::INFINITY, f64::min);
            assert!(gap < 1e-9 * kappa.norm());
        }
    }

    #[test]
    fn converged_start_is_a_fixed_point() {
        let delta = 1e-6;
        let sys = circles(&[([0.0, 0.0], 1.0)], delta, 0);
        let (k1, k2) = capacitance_f0(&sys).unwrap();
        let sd = seeds(&k1, &k2, delta).unwrap();
        let eff = assemble_effective(&sys, AssemblyMethod::Auto).unwrap();
        let settings = SolverSettings {
            polish: false,
            ..Default::default()
        };
        let first = effective_stage(&eff, &sd, delta, &settings).unwrap();
        let again = BranchSeeds {
            omega_log: first.branches[0].omega,
            ..sd
        };
        let second = effective_stage(&eff, &again, delta, &settings).unwrap();
        assert_eq!(second.iterations, 1);
        assert!((second.branches[0].omega - first.branches[0].omega).norm() < 1e-10 * first.branches[0].omega.norm());
    }

    #[test]
    fn two_circle_refinement_is_sharp() {
        let sys = circles(&[([0.0, 0.0], 1.0), ([2.7, 0.4], 0.8)], 1e-5, 3);
        let settings = SolverSettings::default();
        let report = run_pipeline(&sys, &settings, Stage::Refined).unwrap();
        assert_eq!(report.accepted.len(), 2);
        assert_eq!(report.count(BranchClass::Logarithmic), 1);
        let assembler = FullAssembler::new(&sys, AssemblyMethod::Auto).unwrap();
        for b in &report.accepted {
            assert!(b.sigma_min.unwrap() < 1e-10, "{:?}", b.sigma_min);
            let (off, _) = relative_sigma(&assembler, b.omega * (1.0 + 1e-3)).unwrap();
            assert!(off > 1e3 * b.sigma_min.unwrap());
            let again = newton_refine(&assembler, b.omega, b.branch_class, &settings).unwrap();
            assert!((again.omega - b.omega).norm() < 1e-9 * b.omega.norm());
            assert!(again.iterations <= 2);
        }
    }
}

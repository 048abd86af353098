//! Run configuration, output files and the drivers behind the CLI subcommands.
//!
//! Configuration is TOML:
//!
//! ```toml
//! delta = 1e-6            # or { start = 1e-4, stop = 1e-9, points = 6, log = true }
//! f = 3
//! q = "auto"              # or an even integer ≥ 4(f+4)
//! assembly = "auto"       # or "quadrature"
//!
//! [[resonators]]
//! kind = "circle"
//! center = [0.0, 0.0]
//! radius = 1.0
//!
//! [solver]                # any SolverSettings field
//! eps_rel = 1e-10
//!
//! [outputs]
//! resonances = true
//! modes = { n_x = 121, n_y = 121, pad = 0.5 }
//! convergence = { f_ref = 6 }
//! bench = { sizes = [2, 4, 8, 16], f = 2 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly_effective::{assemble_effective, capacitance_f0, AssemblyMethod};
use crate::assembly_full::FullAssembler;
use crate::asymptotics::seeds;
use crate::error::{Error, Result};
use crate::fields::{near_field, FieldGrid, GridSpec};
use crate::geometry::{auto_quadrature, BoundaryCurve, CurveKind, ResonatorSystem};
use crate::solver::{effective_stage, newton_refine, run_pipeline, BranchClass, ResonanceBranch, SolverReport, SolverSettings, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Value(f64),
    Sweep {
        start: f64,
        stop: f64,
        points: usize,
        #[serde(default = "yes")]
        log: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuadratureSpec {
    Fixed(usize),
    Named(AutoTag),
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::Named(AutoTag::Auto)
    }
}

impl QuadratureSpec {
    pub fn resolve(&self, f: usize) -> usize {
        match self {
            QuadratureSpec::Fixed(q) => *q,
            QuadratureSpec::Named(AutoTag::Auto) => auto_quadrature(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeOutput {
    /// Indices into the accepted branches; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<usize>>,
    #[serde(default = "default_cells")]
    pub n_x: usize,
    #[serde(default = "default_cells")]
    pub n_y: usize,
    /// Margin around the resonators in diameters.
    #[serde(default = "default_pad")]
    pub pad: f64,
}

fn default_cells() -> usize {
    101
}

fn default_pad() -> f64 {
    0.5
}

impl Default for ModeOutput {
    fn default() -> Self {
        Self {
            branches: None,
            n_x: default_cells(),
            n_y: default_cells(),
            pad: default_pad(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceOutput {
    #[serde(default = "default_f_ref")]
    pub f_ref: usize,
}

fn default_f_ref() -> usize {
    6
}

impl Default for ConvergenceOutput {
    fn default() -> Self {
        Self { f_ref: default_f_ref() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchOutput {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_bench_f")]
    pub f: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_sizes() -> Vec<usize> {
    vec![2, 4, 8, 16]
}

fn default_bench_f() -> usize {
    2
}

fn default_repeats() -> usize {
    1
}

impl Default for BenchOutput {
    fn default() -> Self {
        Self {
            sizes: default_sizes(),
            f: default_bench_f(),
            repeats: default_repeats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub resonances: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModeOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchOutput>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            resonances: true,
            modes: None,
            convergence: None,
            bench: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub delta: DeltaSpec,
    pub f: usize,
    #[serde(default)]
    pub q: QuadratureSpec,
    #[serde(default)]
    pub assembly: AssemblyMethod,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub outputs: Outputs,
    pub resonators: Vec<CurveKind>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.resonators.is_empty() {
            return Err(Error::Config("at least one resonator is required".into()));
        }
        self.solver.validate()?;
        let deltas = self.deltas()?;
        if let DeltaSpec::Sweep { log: true, .. } = self.delta {
            if deltas.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("log-spaced δ sweeps must be strictly decreasing".into()));
            }
        }
        // builds and checks every curve and the pairwise separation
        self.system(deltas[0]).map(|_| ())
    }

    pub fn deltas(&self) -> Result<Vec<f64>> {
        let values = match self.delta {
            DeltaSpec::Value(d) => vec![d],
            DeltaSpec::Sweep { start, stop, points, log } => {
                if points == 0 {
                    return Err(Error::Config("δ sweep needs at least one point".into()));
                }
                if points == 1 {
                    vec![start]
                } else if log {
                    if start <= 0.0 || stop <= 0.0 {
                        return Err(Error::Config("log-spaced δ sweep needs positive end points".into()));
                    }
                    let (a, b) = (start.log10(), stop.log10());
                    (0..points)
                        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64))
                        .collect()
                } else {
                    (0..points)
                        .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
                        .collect()
                }
            }
        };
        if let Some(bad) = values.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("δ must be positive, got {bad}")));
        }
        Ok(values)
    }

    pub fn curves(&self) -> Result<Vec<BoundaryCurve>> {
        self.resonators
            .iter()
            .enumerate()
            .map(|(k, kind)| {
                BoundaryCurve::new(*kind).map_err(|e| Error::Config(format!("resonators[{k}]: {e}")))
            })
            .collect()
    }

    pub fn system(&self, delta: f64) -> Result<ResonatorSystem> {
        ResonatorSystem::new(self.curves()?, delta, self.f, self.q.resolve(self.f)).map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }

    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            assembly: self.assembly,
            ..self.solver
        }
    }
}

/// Write `value` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Greedy nearest assignment of `values` to `targets`.
fn match_nearest(targets: &[Complex64], values: &[Complex64]) -> Vec<Option<usize>> {
    let mut taken = vec![false; values.len()];
    targets
        .iter()
        .map(|t| {
            let k = (0..values.len())
                .filter(|&k| !taken[k])
                .min_by(|&a, &b| (values[a] - t).norm().total_cmp(&(values[b] - t).norm()))?;
            taken[k] = true;
            Some(k)
        })
        .collect()
}

/// Errors `|ω_F − ω_ref|` of refined resonances against the reference truncation.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceInF {
    pub f_ref: usize,
    pub reference: Vec<Complex64>,
    pub classes: Vec<BranchClass>,
    /// `(F, errors per reference branch)`.
    pub rows: Vec<(usize, Vec<f64>)>,
    /// Fitted `log₁₀` error decrease per unit `F` of the largest error.
    pub slope: f64,
}

pub fn converge_in_f(
    system: &ResonatorSystem,
    f_values: &[usize],
    f_ref: usize,
    settings: &SolverSettings,
) -> Result<ConvergenceInF> {
    let reference = run_pipeline(&system.with_truncation(f_ref, None)?, settings, Stage::Refined)?;
    let targets: Vec<Complex64> = reference.accepted.iter().map(|b| b.omega).collect();
    let mut rows = Vec::new();
    for &f in f_values {
        let report = run_pipeline(&system.with_truncation(f, None)?, settings, Stage::Refined)?;
        let values: Vec<Complex64> = report.accepted.iter().map(|b| b.omega).collect();
        let errors: Vec<f64> = match_nearest(&targets, &values)
            .into_iter()
            .zip(&targets)
            .map(|(k, t)| k.map_or(f64::NAN, |k| (values[k] - t).norm()))
            .collect();
        rows.push((f, errors));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|(f, e)| {
            let worst = e.iter().cloned().fold(0.0, f64::max);
            (worst > 0.0 && worst.is_finite()).then(|| (*f as f64, worst.log10()))
        })
        .unzip();
    let slope = if xs.len() >= 2 { fit_slope(&xs, &ys) } else { f64::NAN };
    Ok(ConvergenceInF {
        f_ref,
        reference: targets,
        classes: reference.accepted.iter().map(|b| b.branch_class).collect(),
        rows,
        slope,
    })
}

/// One δ of a contrast sweep: each refined branch with its seed and effective values.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaRow {
    pub delta: f64,
    pub branches: Vec<ResonanceBranch>,
}

impl DeltaRow {
    fn errors(&self, class: BranchClass, pick: impl Fn(&ResonanceBranch) -> Option<Complex64>) -> Vec<f64> {
        self.branches
            .iter()
            .filter(|b| b.branch_class == class)
            .filter_map(|b| pick(b).map(|w| (w - b.omega).norm()))
            .collect()
    }

    pub fn seed_error(&self, class: BranchClass) -> f64 {
        mean(&self.errors(class, |b| Some(b.seed)))
    }

    pub fn effective_error(&self, class: BranchClass) -> f64 {
        mean(&self.errors(class, |b| b.effective))
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Slopes of the contrast sweep after dividing out the logarithmic factors
/// of the error laws:
///
/// | error | law |
/// |---|---|
/// | log seed | `√δ / |log δ|` |
/// | regular seed (mean) | `√(δ/|log δ|)` |
/// | log effective | `(δ/|log δ|)^{3/2}` |
/// | regular effective | `δ^{3/2} |log δ|²` |
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DeltaSlopes {
    pub seed_log: f64,
    pub seed_regular: f64,
    pub effective_log: f64,
    pub effective_regular: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceInDelta {
    pub rows: Vec<DeltaRow>,
    pub slopes: DeltaSlopes,
}

fn slope_with_factor(rows: &[DeltaRow], err: impl Fn(&DeltaRow) -> f64, log_power: f64) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| {
            let e = err(r);
            (e > 0.0 && e.is_finite()).then(|| (r.delta.ln(), (e * r.delta.ln().abs().powf(-log_power)).ln()))
        })
        .unzip();
    if xs.len() < 2 {
        f64::NAN
    } else {
        fit_slope(&xs, &ys)
    }
}

pub fn converge_in_delta(system: &ResonatorSystem, deltas: &[f64], settings: &SolverSettings) -> Result<ConvergenceInDelta> {
    let mut rows = Vec::new();
    for &d in deltas {
        let report = run_pipeline(&system.with_delta(d)?, settings, Stage::Refined)?;
        rows.push(DeltaRow {
            delta: d,
            branches: report.accepted,
        });
    }
    let slopes = DeltaSlopes {
        seed_log: slope_with_factor(&rows, |r| r.seed_error(BranchClass::Logarithmic), -1.0),
        seed_regular: slope_with_factor(&rows, |r| r.seed_error(BranchClass::Regular), -0.5),
        effective_log: slope_with_factor(&rows, |r| r.effective_error(BranchClass::Logarithmic), -1.5),
        effective_regular: slope_with_factor(&rows, |r| r.effective_error(BranchClass::Regular), 2.0),
    };
    Ok(ConvergenceInDelta { rows, slopes })
}

fn csv_complex(w: Complex64) -> String {
    format!("{:.17e},{:.17e}", w.re, w.im)
}

pub fn write_convergence_f(path: &Path, table: &ConvergenceInF) -> Result<()> {
    let header = serde_json::json!({ "mode": "in_f", "f_ref": table.f_ref, "slope_log10_per_f": table.slope });
    let mut out = format!("# {header}\nf,branch,class,ref_re,ref_im,error\n");
    for (f, errors) in &table.rows {
        for (k, e) in errors.iter().enumerate() {
            out += &format!(
                "{f},{k},{},{},{e:.6e}\n",
                class_name(table.classes[k]),
                csv_complex(table.reference[k])
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_convergence_delta(path: &Path, table: &ConvergenceInDelta) -> Result<()> {
    let header = serde_json::json!({ "mode": "in_delta", "slopes": table.slopes });
    let mut out = format!("# {header}\ndelta,branch,class,omega_re,omega_im,seed_error,effective_error\n");
    for row in &table.rows {
        for (k, b) in row.branches.iter().enumerate() {
            let eff = b.effective.map_or(f64::NAN, |w| (w - b.omega).norm());
            out += &format!(
                "{:.6e},{k},{},{},{:.6e},{eff:.6e}\n",
                row.delta,
                class_name(b.branch_class),
                csv_complex(b.omega),
                (b.seed - b.omega).norm()
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn class_name(c: BranchClass) -> &'static str {
    match c {
        BranchClass::Logarithmic => "logarithmic",
        BranchClass::Regular => "regular",
    }
}

/// Field grid as CSV with a JSON header line.
pub fn write_field(path: &Path, grid: &FieldGrid, branch: usize) -> Result<()> {
    let s = &grid.spec;
    let header = serde_json::json!({
        "bbox": [s.x_min, s.x_max, s.y_min, s.y_max],
        "resolution": [s.n_x, s.n_y],
        "omega": [grid.omega.re, grid.omega.im],
        "branch": branch,
    });
    let mut out = format!("# {header}\nx,y,re,im,cell\n");
    for iy in 0..s.n_y {
        for ix in 0..s.n_x {
            let p = s.point(ix, iy);
            let v = grid.value(ix, iy);
            let kind = serde_json::to_value(grid.kind(ix, iy)).expect("unit enum");
            out += &format!(
                "{:.10e},{:.10e},{:.10e},{:.10e},{}\n",
                p[0],
                p[1],
                v.re,
                v.im,
                kind.as_str().expect("string")
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeManifestEntry {
    pub branch: usize,
    pub omega: Complex64,
    pub branch_class: BranchClass,
    pub file: String,
}

/// Field files for the selected accepted branches, plus `manifest.json`.
pub fn export_modes(
    report: &SolverReport,
    system: &ResonatorSystem,
    selection: &ModeOutput,
    out: &Path,
) -> Result<Vec<ModeManifestEntry>> {
    let available = report.accepted.len();
    let chosen: Vec<usize> = selection.branches.clone().unwrap_or_else(|| (0..available).collect());
    if let Some(bad) = chosen.iter().find(|&&k| k >= available) {
        return Err(Error::InvalidArgument(format!(
            "unknown branch {bad}; available branches: {}",
            (0..available)
                .map(|k| format!("{k} (ω = {:.6e})", report.accepted[k].omega))
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let spec = GridSpec::around(system, selection.pad, selection.n_x, selection.n_y);
    let mut manifest = Vec::new();
    for k in chosen {
        let b = &report.accepted[k];
        let grid = near_field(b, system, &spec)?;
        let file = format!("mode_{k}.csv");
        write_field(&out.join(&file), &grid, k)?;
        manifest.push(ModeManifestEntry {
            branch: k,
            omega: b.omega,
            branch_class: b.branch_class,
            file,
        });
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Circles on a ring with deterministic jitter in angle and radius, so that
/// no two regular branches are degenerate.
pub fn jittered_ring(n: usize, delta: f64, f: usize) -> Result<ResonatorSystem> {
    let ring = (3.0 * n as f64 / (2.0 * std::f64::consts::PI)).max(1.5);
    let curves = (0..n)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.12 * (1.7 * j as f64 + 0.3).sin()) / n as f64;
            let r = 0.9 + 0.12 * (2.3 * j as f64 + 0.7).sin();
            BoundaryCurve::circle([ring * t.cos(), ring * t.sin()], r)
        })
        .collect::<Result<Vec<_>>>()?;
    ResonatorSystem::new(curves, delta, f, auto_quadrature(f))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenchRow {
    pub n: usize,
    /// Seeds plus the effective fixed point (seconds).
    pub effective: f64,
    /// Seeds plus Newton refinement of every branch on the full matrix (seconds).
    pub full: f64,
    pub refined: usize,
}

/// Timing of the effective `N×N`-type path against full refinement on
/// jittered rings.
pub fn bench_assembly(bench: &BenchOutput, delta: f64, settings: &SolverSettings) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in &bench.sizes {
        let system = jittered_ring(n, delta, bench.f)?;
        let (mut t_eff, mut t_full, mut refined) = (f64::INFINITY, f64::INFINITY, 0);
        for _ in 0..bench.repeats.max(1) {
            let start = Instant::now();
            let (k1, k2) = capacitance_f0(&system)?;
            let sd = seeds(&k1, &k2, delta)?;
            let eff = assemble_effective(&system, settings.assembly)?;
            effective_stage(&eff, &sd, delta, settings)?;
            t_eff = t_eff.min(start.elapsed().as_secs_f64());

            let start = Instant::now();
            let (k1, k2) = capacitance_f0(&system)?;
            let sd = seeds(&k1, &k2, delta)?;
            let assembler = FullAssembler::new(&system, settings.assembly)?;
            refined = sd
                .branches()
                .iter()
                .filter(|(w, c, _)| newton_refine(&assembler, *w, *c, settings).is_ok_and(|b| b.converged))
                .count();
            t_full = t_full.min(start.elapsed().as_secs_f64());
        }
        rows.push(BenchRow {
            n,
            effective: t_eff,
            full: t_full,
            refined,
        });
    }
    Ok(rows)
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut out = String::from("n,effective_seconds,full_seconds,refined\n");
    for r in rows {
        out += &format!("{},{:.6e},{:.6e},{}\n", r.n, r.effective, r.full, r.refined);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Output directory, created when missing.
pub fn prepare_out(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = r#"
delta = 1e-5
f = 2

[[resonators]]
kind = "circle"
center = [0.0, 0.0]
radius = 1.0

[[resonators]]
kind = "ellipse"
center = [3.0, 0.0]
semi_axes = [1.0, 0.6]
"#;

    #[test]
    fn parses_defaults() {
        let c = RunConfig::from_toml(TWO).unwrap();
        assert_eq!(c.q.resolve(c.f), 24);
        assert_eq!(c.deltas().unwrap(), vec![1e-5]);
        assert!(c.outputs.resonances);
        assert_eq!(c.system(1e-5).unwrap().len(), 2);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let c = RunConfig::from_toml(TWO).unwrap();
        let once = c.to_toml().unwrap();
        let again = RunConfig::from_toml(&once).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml().unwrap(), once);
    }

    #[test]
    fn sweeps() {
        let text = TWO.replace("delta = 1e-5", "delta = { start = 1e-4, stop = 1e-9, points = 6 }");
        let c = RunConfig::from_toml(&text).unwrap();
        let d = c.deltas().unwrap();
        assert_eq!(d.len(), 6);
        assert!((d[5] / 1e-9 - 1.0).abs() < 1e-12);
        let bad = TWO.replace("delta = 1e-5", "delta = { start = 1e-9, stop = 1e-4, points = 3 }");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn reports_bad_fields_and_overlaps() {
        let typo = TWO.replace("radius = 1.0", "radius = 1.0\nradus = 2.0");
        let e = RunConfig::from_toml(&typo).unwrap_err().to_string();
        assert!(e.contains("radus"), "{e}");
        let overlap = TWO.replace("center = [3.0, 0.0]", "center = [1.5, 0.0]");
        let e = RunConfig::from_toml(&overlap).unwrap_err().to_string();
        assert!(e.contains("resonators 1 and 2"), "{e}");
        let q = TWO.replace("f = 2", "f = 2\nq = 7");
        assert!(RunConfig::from_toml(&q).is_err());
    }

    #[test]
    fn slope_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
        assert!((fit_slope(&x, &y) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn jittered_ring_is_valid() {
        let s = jittered_ring(8, 1e-6, 1).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.min_separation().unwrap() > 0.5);
    }
}

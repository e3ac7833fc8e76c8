//! Named end-to-end pipelines and their reports.
//!
//! Every suite writes under `<out>/<suite>/<config hash>/`: `fields/` dumps,
//! `csv/` tables, `svg/` plots, `report.json` with one entry per check and
//! `timing.json` with wall-clock times (kept apart so that the report is a
//! pure function of the configuration).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{DataKind, QSource, SolverConfig};
use crate::corpus::onephase_problem;
use crate::error::{LabError, Result, StageExt};
use crate::frequency::{
    analyze, calibrate_c_mono, rellich_residual, BoundaryCurve, FrequencyConfig, FrequencyInput, FrequencyReport,
};
use crate::grid::{assemble_stiffness, CoefficientField, DomainGeometry, GridSpec, NodeKind, Point, Region, ScalarField, Shape};
use crate::io::{polyline_csv, polylines_csv, Artifacts};
use crate::linalg::{solve_dirichlet, PcgOptions};
use crate::onephase::{
    check_fb_conditions, solve, FbConditionReport, FreeBoundarySet, OnePhaseProblem, OnePhaseSolution, PENALTY_SCHEDULE,
};
use crate::oracle::{example_fb, example_fb_polyline, example_grad, example_q, polar, signorini_profile_at};
use crate::plot::{emit_plot, PlotKind, Series};
use crate::regularity::{
    fb_exponent_fit, flatness_decay_fit, flatness_profile, harnack_dichotomy_check, measure_trap, nondegeneracy_check,
    nontangential_direction, Dichotomy, FlatnessRecord, Frame, HarnackReport, NondegeneracyReport, RegularityFit,
};
use crate::signorini::{complementarity_report, solve_signorini, ComplementarityReport, SignoriniProblem, SignoriniSolution};

pub const SUITES: [&str; 5] = ["onephase-example", "signorini-canonical", "frequency-audit", "regularity-fits", "full"];

/// Grid spacings of the full battery.
pub const FULL_COARSE_H: f64 = 1.0 / 256.0;
pub const FULL_FINE_H: f64 = 1.0 / 512.0;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub criterion: Option<u8>,
    pub measured: f64,
    pub bound: String,
    pub pass: bool,
    pub details: BTreeMap<String, f64>,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, format!("<= {bound}"), measured <= bound)
    }

    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, format!(">= {bound}"), measured >= bound)
    }

    pub fn within(name: &str, measured: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, measured, format!("in [{lo}, {hi}]"), measured >= lo && measured <= hi)
    }

    fn new(name: &str, measured: f64, bound: String, pass: bool) -> Self {
        Check {
            name: name.to_string(),
            criterion: None,
            measured,
            bound,
            pass: pass && !measured.is_nan(),
            details: BTreeMap::new(),
        }
    }

    pub fn criterion(mut self, k: u8) -> Self {
        self.criterion = Some(k);
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    /// Folds a further condition into the verdict.
    pub fn and(mut self, key: &str, value: f64, ok: bool) -> Self {
        self.pass &= ok;
        self.detail(key, value)
    }

    /// One-line summary `PASS name: measured (bound)`.
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let prefix = self.criterion.map_or(String::new(), |k| format!("[{k:>2}] "));
        format!("{tag} {prefix}{}: {:.6e} ({})", self.name, self.measured, self.bound)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub suite: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub directory: Option<PathBuf>,
    /// Wall-clock seconds per timed step, in execution order.
    pub timing: Vec<(String, f64)>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.report.pass
    }
}

/// Runs a suite against `cfg`. With `out = Some(root)` the artifacts are
/// written below `root/<suite>/<hash>/`.
pub fn run_suite(name: &str, cfg: &SolverConfig, out: Option<&Path>) -> Result<RunOutcome> {
    if !SUITES.contains(&name) {
        return Err(LabError::Argument(format!("unknown suite `{name}`; valid suites: {}", SUITES.join(", "))));
    }
    cfg.validate()?;
    let dir = out.map(|root| root.join(name).join(cfg.hash()));
    let mut art = match &dir {
        Some(d) => Some(Artifacts::create(d)?),
        None => None,
    };
    let mut timer = Timer::default();
    let checks = match name {
        "onephase-example" => onephase_suite(cfg, art.as_mut(), &mut timer)?,
        "signorini-canonical" => signorini_suite(cfg, art.as_mut(), &mut timer)?,
        "frequency-audit" => frequency_suite(cfg, art.as_mut(), &mut timer)?,
        "regularity-fits" => regularity_suite(cfg, art.as_mut(), &mut timer)?,
        _ => {
            let battery = Battery::build(cfg, &mut timer)?;
            if let Some(a) = art.as_mut() {
                battery.write_artifacts(a)?;
            }
            battery.criteria()?
        }
    };
    let mut report = RunReport {
        suite: name.to_string(),
        config_hash: cfg.hash(),
        config: cfg.entries(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        artifacts: Vec::new(),
    };
    if let Some(mut a) = art {
        report.artifacts = a.written().to_vec();
        report.artifacts.push("report.json".into());
        a.json("report", &report)?;
        let timing: BTreeMap<&str, f64> = timer.steps.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        a.json("timing", &timing)?;
    }
    Ok(RunOutcome {
        report,
        directory: dir,
        timing: timer.steps,
    })
}

#[derive(Default)]
pub struct Timer {
    steps: Vec<(String, f64)>,
}

impl Timer {
    pub fn time<T>(&mut self, step: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let v = f();
        self.steps.push((step.to_string(), t.elapsed().as_secs_f64()));
        v
    }

    pub fn seconds(&self, step: &str) -> Option<f64> {
        self.steps.iter().find(|(k, _)| k == step).map(|s| s.1)
    }

    pub fn steps(&self) -> &[(String, f64)] {
        &self.steps
    }
}

/// Dyadic scales `r_max, r_max/2, ...` down to `r_min`.
fn dyadic(r_max: f64, r_min: f64) -> Vec<f64> {
    (0..).map(|k| r_max * 0.5f64.powi(k)).take_while(|&r| r >= r_min * (1.0 - 1e-12)).collect()
}

fn distance_to_polyline(p: Point, line: &[Point]) -> f64 {
    if line.len() == 1 {
        return (p[0] - line[0][0]).hypot(p[1] - line[0][1]);
    }
    line.windows(2)
        .map(|s| {
            let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = if len2 > 0.0 { (((p[0] - s[0][0]) * d[0] + (p[1] - s[0][1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            (p[0] - s[0][0] - t * d[0]).hypot(p[1] - s[0][1] - t * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Two-sided Hausdorff distance between the vertex sets of `a` and `b`
/// (measured to the other side's segments) inside `B_{r_cut}`.
pub fn hausdorff_within(a: &[Vec<Point>], b: &[Vec<Point>], r_cut: f64) -> f64 {
    let one_sided = |from: &[Vec<Point>], to: &[Vec<Point>]| -> f64 {
        from.iter()
            .flatten()
            .filter(|p| p[0].hypot(p[1]) < r_cut)
            .map(|&p| to.iter().map(|l| distance_to_polyline(p, l)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// The one-phase example solved on `B_R⁺` with the configuration's solver
/// settings.
pub struct ExampleRun {
    pub problem: OnePhaseProblem,
    pub solution: OnePhaseSolution,
    pub w: ScalarField,
    pub curves: Vec<BoundaryCurve>,
}

impl ExampleRun {
    pub fn solve(cfg: &SolverConfig) -> Result<Self> {
        let cfg = SolverConfig {
            data_kind: DataKind::Example,
            q: QSource::Example,
            ..cfg.clone()
        };
        let problem = onephase_problem(&cfg).stage("onephase_solver", "setup")?;
        let solution = solve(&problem, &cfg).stage("onephase_solver", format!("solve h = {}", cfg.h).as_str())?;
        let w = solution.u.map(|p, v| p[1] - v)?;
        let curves = BoundaryCurve::from_free_boundary(&solution.free_boundary, &solution.u);
        Ok(ExampleRun { problem, solution, w, curves })
    }

    pub fn h(&self) -> f64 {
        self.solution.u.spec().spacing
    }

    pub fn radius(&self) -> f64 {
        self.solution.u.spec().half_width
    }

    pub fn u(&self) -> &ScalarField {
        &self.solution.u
    }

    pub fn fb(&self) -> &FreeBoundarySet {
        &self.solution.free_boundary
    }

    /// Final penalty width, the smoothing layer along `F̄`.
    pub fn layer(&self) -> f64 {
        PENALTY_SCHEDULE[PENALTY_SCHEDULE.len() - 1] * self.h()
    }

    pub fn input(&self) -> FrequencyInput<'_> {
        FrequencyInput {
            w: &self.w,
            region: Region::Positive {
                field: &self.solution.u,
                threshold: self.solution.fb_level,
            },
            boundary: &self.curves,
            layer: self.layer(),
        }
    }

    pub fn frequency(&self, cfg: &SolverConfig) -> Result<FrequencyReport> {
        let fcfg = FrequencyConfig::from_solver(cfg, self.u().spec())?;
        analyze(self.input(), &fcfg).stage("frequency_analyzer", "example")
    }

    pub fn rellich(&self, r: f64) -> Result<f64> {
        rellich_residual(self.input(), r).stage("frequency_analyzer", "example rellich")
    }

    pub fn fb_conditions(&self, tol: f64) -> FbConditionReport {
        check_fb_conditions(self.u(), self.fb(), &self.problem.coeff, &self.problem.geometry, tol)
    }

    /// Detected point of `∂′Λ` closest to the origin.
    pub fn detachment(&self) -> Result<Point> {
        self.fb()
            .nearest_thin_boundary([0.0, 0.0])
            .ok_or_else(|| LabError::Geometry("no thin boundary point detected".into()).in_stage("onephase_solver", "free boundary"))
    }

    /// Hausdorff distance of `F̄` to the analytic free boundary in `B_{0.8R}`.
    pub fn hausdorff(&self) -> Result<f64> {
        let r_cut = 0.8 * self.radius();
        let exact = example_fb_polyline(r_cut.min(1.0), 20_000)?;
        Ok(hausdorff_within(&self.fb().polylines, &[exact], r_cut))
    }

    pub fn exponent_fit(&self) -> Result<RegularityFit> {
        fb_exponent_fit(self.fb(), self.detachment()?, 0.25 * self.radius()).stage("regularity_metrics", "exponent fit")
    }

    /// Dyadic scales from `R/2` down to `8h`.
    pub fn scales(&self) -> Vec<f64> {
        dyadic(0.5 * self.radius(), 8.0 * self.h())
    }

    pub fn flatness(&self, beta_min: f64) -> Result<(Vec<FlatnessRecord>, RegularityFit)> {
        let recs = flatness_profile(self.u(), self.fb(), self.detachment()?, &self.scales()).stage("regularity_metrics", "flatness")?;
        let fit = flatness_decay_fit(&recs, beta_min).stage("regularity_metrics", "flatness fit")?;
        Ok((recs, fit))
    }

    /// Harnack dichotomy at `R/2, R/4, R/8` with the measured trap
    /// `a`, `b := max(a, b)`.
    pub fn harnack(&self, cfg: &SolverConfig) -> Result<Vec<HarnackReport>> {
        let d = self.detachment()?;
        dyadic(0.5 * self.radius(), 0.125 * self.radius())
            .into_iter()
            .map(|r| {
                let e = nontangential_direction(self.u(), d, r)?;
                let frame = Frame::on_thin_boundary(self.fb(), d, e)?;
                let (a, b) = measure_trap(self.u(), &frame, r);
                harnack_dichotomy_check(self.u(), &frame, a, a.max(b), r, cfg.theta, cfg.epsilon0)
            })
            .collect::<Result<Vec<_>>>()
            .stage("regularity_metrics", "harnack")
    }
}

/// Thin obstacle problem with the profile `r^{3/2}cos(3θ/2)` on the arc.
pub struct SignoriniRun {
    pub problem: SignoriniProblem,
    pub solution: SignoriniSolution,
    pub exact: ScalarField,
    pub diameter: Vec<BoundaryCurve>,
}

impl SignoriniRun {
    pub fn solve(cfg: &SolverConfig, radius: f64) -> Result<Self> {
        let spec = GridSpec::new(radius, cfg.h, Shape::HalfDisk)?;
        let problem = SignoriniProblem::new(spec, signorini_profile_at).stage("signorini_solver", "setup")?;
        let solution = solve_signorini(&problem, cfg).stage("signorini_solver", format!("solve h = {}", cfg.h).as_str())?;
        let exact = problem.geometry.field_from_fn(signorini_profile_at)?;
        let h = cfg.h;
        Ok(SignoriniRun {
            problem,
            solution,
            exact,
            diameter: vec![BoundaryCurve::diameter(radius - 2.0 * h, h)],
        })
    }

    pub fn h(&self) -> f64 {
        self.solution.w.spec().spacing
    }

    pub fn relative_l2(&self) -> Result<f64> {
        let num: f64 = self.solution.w.zip_map(&self.exact, |a, b| (a - b) * (a - b))?.masked_values().sum();
        let den: f64 = self.exact.masked_values().map(|v| v * v).sum();
        Ok((num / den).sqrt())
    }

    pub fn complementarity(&self) -> ComplementarityReport {
        complementarity_report(&self.solution, 5e-3)
    }

    /// Largest distance between the discrete contact set and `{θ = π}` on
    /// the diameter: contact nodes with `x > 0` and free nodes with `x < 0`.
    pub fn contact_offset(&self) -> f64 {
        self.solution
            .thin
            .iter()
            .map(|t| if t.contact { t.x.max(0.0) } else { (-t.x).max(0.0) })
            .fold(0.0, f64::max)
    }

    pub fn frequency(&self, cfg: &SolverConfig) -> Result<FrequencyReport> {
        let fcfg = FrequencyConfig::from_solver(cfg, self.solution.w.spec())?;
        let input = FrequencyInput {
            w: &self.solution.w,
            region: Region::Domain,
            boundary: &self.diameter,
            layer: 0.0,
        };
        analyze(input, &fcfg).stage("frequency_analyzer", "signorini")
    }
}

/// Exactly sampled fields with known `F̄`, used for calibration and as
/// reference inputs.
pub struct AnalyticCase {
    pub name: &'static str,
    pub w: ScalarField,
    /// Field whose positivity set is `Ω⁺`, or `None` for the whole domain.
    pub region_field: Option<ScalarField>,
    pub curves: Vec<BoundaryCurve>,
}

impl AnalyticCase {
    /// `w*` on `B_1⁺` with `F̄` the diameter.
    pub fn signorini_profile(h: f64) -> Result<Self> {
        let geo = DomainGeometry::half_disk(1.0, h)?;
        Ok(AnalyticCase {
            name: "signorini_profile",
            w: geo.field_from_fn(signorini_profile_at)?,
            region_field: None,
            curves: vec![BoundaryCurve::diameter(1.0 - 2.0 * h, h)],
        })
    }

    /// `w = x₂ - u` of the example on `B_{1/2}⁺`, `Ω⁺` cut out by the signed
    /// function `r sinθ - r^{3/2}cos(3θ/2)` and `F̄` by the analytic curve.
    pub fn example(h: f64) -> Result<Self> {
        let geo = DomainGeometry::half_disk(0.5, h)?;
        let signed = geo.field_from_fn(|p| {
            let (r, t) = polar(p);
            r * t.sin() - r.powf(1.5) * (1.5 * t).cos()
        })?;
        let w = geo.field_from_fn(crate::oracle::example_w_at)?;
        let line = example_fb_polyline(0.49, 4000)?;
        let fb = FreeBoundarySet::from_polylines(vec![line], h, signed.spec().len());
        let curves = BoundaryCurve::from_free_boundary(&fb, &signed);
        Ok(AnalyticCase {
            name: "example",
            w,
            region_field: Some(signed),
            curves,
        })
    }

    pub fn h(&self) -> f64 {
        self.w.spec().spacing
    }

    pub fn input(&self) -> FrequencyInput<'_> {
        FrequencyInput {
            w: &self.w,
            region: match &self.region_field {
                Some(f) => Region::Positive { field: f, threshold: 0.0 },
                None => Region::Domain,
            },
            boundary: &self.curves,
            layer: 0.0,
        }
    }

    /// Radii `r_max ρ^k` down to `8h` with `r_max` half the domain radius.
    pub fn frequency(&self, cfg: &SolverConfig) -> Result<FrequencyReport> {
        let spec = self.w.spec();
        let fcfg = FrequencyConfig::geometric(0.5 * spec.half_width, cfg.rho, 8.0 * spec.spacing, cfg.sigma, cfg.c_mono, cfg.mono_tol)?;
        analyze(self.input(), &fcfg).stage("frequency_analyzer", self.name)
    }

    pub fn rellich(&self, r: f64) -> Result<f64> {
        rellich_residual(self.input(), r).stage("frequency_analyzer", self.name)
    }
}

/// Smallest `C_mono` of the candidate list clearing the audit on the
/// analytic corpus at spacing `h`.
pub fn calibrate_on_corpus(cfg: &SolverConfig, h: f64) -> Result<Option<f64>> {
    let cases = [AnalyticCase::signorini_profile(h)?, AnalyticCase::example(0.5 * h)?];
    let mut corpus = Vec::new();
    for c in &cases {
        let rep = c.frequency(cfg)?;
        corpus.push(rep.rows.iter().filter_map(|r| r.n_tilde.map(|n| (r.r, n))).collect::<Vec<_>>());
    }
    Ok(calibrate_c_mono(&corpus, cfg.sigma, cfg.mono_tol))
}

/// Range of `Ñ` over rows with `r ∈ [lo, hi]`.
pub fn ntilde_range(rep: &FrequencyReport, lo: f64, hi: f64) -> (f64, f64) {
    rep.rows
        .iter()
        .filter(|r| r.r >= lo * (1.0 - 1e-9) && r.r <= hi * (1.0 + 1e-9))
        .filter_map(|r| r.n_tilde)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), n| (a.min(n), b.max(n)))
}

/// `max |H̃ - H| / r^{3+σ/2}` over all rows.
pub fn bookkeeping_constant(rep: &FrequencyReport) -> f64 {
    let p = 3.0 + rep.sigma / 2.0;
    rep.rows.iter().map(|r| (r.h_tilde - r.h).abs() / r.r.powf(p)).fold(0.0, f64::max)
}

/// Largest relative gap between the two forms of `H̃'` over rows with
/// `r >= r_min`.
pub fn derivative_gap(rep: &FrequencyReport, r_min: f64) -> f64 {
    rep.rows
        .iter()
        .filter(|r| r.r >= r_min * (1.0 - 1e-9))
        .filter_map(|r| r.h_tilde_prime_fd.map(|fd| (fd - r.h_tilde_prime_identity).abs() / r.h_tilde_prime_identity.abs()))
        .fold(0.0, f64::max)
}

/// `u = (1+η)·(discrete harmonic extension of x₂)` on `B_1⁺` and the
/// nondegeneracy check with `ε = h`, plus the check on `(x₂ - 0.1)₊` with
/// `η = 0.1`, which must be rejected as a hypothesis failure.
pub struct NondegeneracyCases {
    pub supersolution: NondegeneracyReport,
    pub cut_plane: Result<NondegeneracyReport>,
}

impl NondegeneracyCases {
    pub fn run(cfg: &SolverConfig) -> Result<Self> {
        let h = cfg.h;
        let geo = DomainGeometry::half_disk(1.0, h)?;
        let spec = *geo.spec();
        let coeff = CoefficientField::identity(spec, geo.mask(), |_| 1.0)?;
        let a = assemble_stiffness(&coeff, geo.mask());
        let free: Vec<bool> = (0..spec.len()).map(|k| geo.kind(k) == NodeKind::Interior).collect();
        let mut vals: Vec<f64> = (0..spec.len()).map(|k| if free[k] { 0.0 } else { spec.point(k)[1].max(0.0) }).collect();
        let stats = solve_dirichlet(&a, &free, &mut vals, PcgOptions { rel_tol: 1e-12, max_iter: 20_000, omega: 1.6 });
        if !stats.converged {
            return Err(LabError::Degenerate("harmonic extension of x2 did not converge".into()).in_stage("regularity_metrics", "nondegeneracy"));
        }
        let eta = cfg.eta;
        let u = ScalarField::new(spec, vals.iter().map(|v| (1.0 + eta) * v).collect(), geo.mask().to_vec())?;
        let supersolution = nondegeneracy_check(&u, 1.0, eta, h).stage("regularity_metrics", "nondegeneracy")?;
        let cut = geo.field_from_fn(|p| (p[1] - 0.1).max(0.0))?;
        let cut_plane = nondegeneracy_check(&cut, 1.0, 0.1, 0.1);
        Ok(NondegeneracyCases { supersolution, cut_plane })
    }

    pub fn pass(&self) -> bool {
        self.supersolution.holds && self.supersolution.slope > 1.0 && matches!(self.cut_plane, Err(LabError::Hypothesis(_)))
    }
}

/// `max |Q - |Du||` on `F` at 100 radii in `(0, 1/2]`.
pub fn oracle_consistency() -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 1..=100 {
        let r = 0.5 * k as f64 / 100.0;
        let t = example_fb(r)?;
        let g = example_grad(r, t);
        worst = worst.max((example_q(r, t)? - g[0].hypot(g[1])).abs());
    }
    Ok(worst)
}

fn harnack_check(name: &str, reports: &[HarnackReport]) -> Check {
    let violations = reports.iter().filter(|r| r.outcome == Dichotomy::Violation).count();
    let worst = reports.iter().map(|r| r.largest_theta()).fold(f64::INFINITY, f64::min);
    let mut c = Check::at_most(name, violations as f64, 0.0).detail("min_largest_theta", worst);
    for r in reports {
        c = c.detail(&format!("theta_upper_r{}", r.r), r.theta_upper).detail(&format!("theta_lower_r{}", r.r), r.theta_lower);
    }
    c
}

fn frequency_plots(art: &mut Artifacts, tag: &str, rep: &FrequencyReport) -> Result<()> {
    art.csv(&format!("frequency_{tag}"), &rep.csv())?;
    let h: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.r, r.h)).collect();
    let ht: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.r, r.h_tilde)).collect();
    art.svg(
        &format!("h_{tag}"),
        &emit_plot(&format!("H(r), {tag}"), &[Series::new("H", h), Series::new("H tilde", ht)], PlotKind::LogLog)?,
    )?;
    let n: Vec<(f64, f64)> = rep.rows.iter().filter_map(|r| r.n_tilde.map(|v| (r.r, v))).collect();
    if !n.is_empty() {
        art.svg(&format!("ntilde_{tag}"), &emit_plot(&format!("N tilde(r), {tag}"), &[Series::new("N tilde", n)], PlotKind::LogLog)?)?;
    }
    Ok(())
}

fn example_artifacts(art: &mut Artifacts, tag: &str, run: &ExampleRun) -> Result<()> {
    art.field(&format!("u_{tag}"), run.u())?;
    art.csv(&format!("free_boundary_{tag}"), &polyline_csv(run.fb()))?;
    let r_cut = 0.8 * run.radius();
    let exact = example_fb_polyline(r_cut, 2000)?;
    art.csv(&format!("free_boundary_exact_{tag}"), &polylines_csv(std::slice::from_ref(&exact)))?;
    let fb = Series::from_polylines("F computed", &run.fb().polylines);
    art.svg(&format!("u_{tag}"), &emit_plot("u with its free boundary", &[fb.clone()], PlotKind::FieldHeatmap(run.u()))?)?;
    let window = run.fb().polylines.iter().map(|l| l.iter().copied().filter(|p| p[0].hypot(p[1]) < r_cut).collect::<Vec<_>>()).collect::<Vec<_>>();
    art.svg(
        &format!("free_boundary_{tag}"),
        &emit_plot(
            "free boundary: computed and analytic",
            &[Series::from_polylines("computed", &window), Series::from_polylines("analytic", &[exact])],
            PlotKind::Polyline,
        )?,
    )?;
    Ok(())
}

fn onephase_suite(cfg: &SolverConfig, art: Option<&mut Artifacts>, timer: &mut Timer) -> Result<Vec<Check>> {
    let run = timer.time("onephase_solve", || ExampleRun::solve(cfg))?;
    let h = run.h();
    let d = run.detachment()?;
    let fit = run.exponent_fit()?;
    let fbc = run.fb_conditions(cfg.fb_tol);
    let harnack = run.harnack(cfg)?;
    let checks = vec![
        Check::at_most("pde_residual", run.solution.pde_residual, cfg.pde_tol),
        Check::at_most("contact_slope_violations", fbc.contact_violations as f64, 0.0)
            .detail("contact_min", fbc.contact_min)
            .detail("free_mean", fbc.free_mean)
            .detail("free_rms", fbc.free_rms),
        Check::at_most("hausdorff_over_h", run.hausdorff()? / h, 2.0).criterion(4),
        Check::at_most("detachment_offset_over_h", d[0].hypot(d[1]) / h, 2.0),
        Check::within("detachment_exponent", fit.exponent, 1.4, 1.6).criterion(4).detail("residual", fit.residual),
        harnack_check("harnack_violations", &harnack).criterion(8),
    ];
    if let Some(a) = art {
        example_artifacts(a, "example", &run)?;
        a.json("fb_conditions", &fbc)?;
        a.json("harnack", &harnack)?;
        a.json("exponent_fit", &fit)?;
    }
    Ok(checks)
}

fn signorini_suite(cfg: &SolverConfig, art: Option<&mut Artifacts>, timer: &mut Timer) -> Result<Vec<Check>> {
    let run = timer.time("signorini_solve", || SignoriniRun::solve(cfg, cfg.radius))?;
    let h = run.h();
    let comp = run.complementarity();
    let rep = run.frequency(cfg)?;
    let (lo, hi) = ntilde_range(&rep, 16.0 * h, 0.5 * cfg.radius);
    let degree = rep.degree.unwrap_or(f64::NAN);
    let checks = vec![
        Check::at_most("relative_l2_error", run.relative_l2()?, 0.02).criterion(1),
        Check::at_most("complementarity_max", comp.max(), 5e-3)
            .detail("infeasibility", comp.infeasibility)
            .detail("negative_multiplier", comp.negative_multiplier)
            .detail("product", comp.product),
        Check::at_most("contact_offset_over_h", run.contact_offset() / h, 2.0),
        Check::within("homogeneity_degree", degree, 1.45, 1.55),
        Check::within("ntilde_min", lo, 1.45, 1.55).detail("ntilde_max", hi).and("ntilde_max", hi, hi <= 1.55),
    ];
    if let Some(a) = art {
        a.field("w", &run.solution.w)?;
        a.csv("contact", &run.solution.contact_csv())?;
        a.json("complementarity", &comp)?;
        frequency_plots(a, "signorini", &rep)?;
    }
    Ok(checks)
}

fn frequency_suite(cfg: &SolverConfig, art: Option<&mut Artifacts>, timer: &mut Timer) -> Result<Vec<Check>> {
    let h = cfg.h;
    let star = AnalyticCase::signorini_profile(h)?;
    let star_coarse = AnalyticCase::signorini_profile(2.0 * h)?;
    let star_rep = star.frequency(cfg)?;
    let (lo, hi) = ntilde_range(&star_rep, 16.0 * h, 0.25);
    let calibrated = calibrate_on_corpus(cfg, h)?;
    let fine = timer.time("onephase_solve", || ExampleRun::solve(cfg))?;
    let coarse = timer.time("onephase_solve_coarse", || ExampleRun::solve(&cfg.with_h(2.0 * h)))?;
    let ex_rep = fine.frequency(cfg)?;
    let (rs_c, rs_f) = (star_coarse.rellich(0.25)?, star.rellich(0.25)?);
    let (re_c, re_f) = (coarse.rellich(0.25)?, fine.rellich(0.25)?);
    let checks = vec![
        Check::within("signorini_ntilde_min", lo, 1.45, 1.55)
            .and("ntilde_max", hi, hi <= 1.55)
            .and("violations", star_rep.violations.len() as f64, star_rep.violations.is_empty())
            .criterion(2),
        Check::at_most("calibrated_c_mono", calibrated.unwrap_or(f64::INFINITY), cfg.c_mono),
        Check::at_least("example_growth_slope", ex_rep.growth_slope.unwrap_or(f64::NAN), 2.85).criterion(3),
        Check::at_most("rellich_signorini", rs_f, 0.05).and("coarse", rs_c, rs_f < rs_c),
        Check::at_most("rellich_example", re_f, 0.05).and("coarse", re_c, re_f < re_c),
        Check::at_most("bookkeeping_constant", bookkeeping_constant(&ex_rep), cfg.c_tilde)
            .and("derivative_gap", derivative_gap(&ex_rep, 16.0 * h), derivative_gap(&ex_rep, 16.0 * h) <= 0.05),
        Check::at_most("example_violations", ex_rep.violations.len() as f64, 0.0),
    ];
    if let Some(a) = art {
        frequency_plots(a, "signorini_profile", &star_rep)?;
        frequency_plots(a, "example", &ex_rep)?;
        a.json("frequency_example", &ex_rep)?;
    }
    Ok(checks)
}

fn regularity_suite(cfg: &SolverConfig, art: Option<&mut Artifacts>, timer: &mut Timer) -> Result<Vec<Check>> {
    let run = timer.time("onephase_solve", || ExampleRun::solve(cfg))?;
    let fit = run.exponent_fit()?;
    let (recs, beta) = run.flatness(cfg.beta_min)?;
    let harnack = run.harnack(cfg)?;
    let nd = timer.time("nondegeneracy", || NondegeneracyCases::run(cfg))?;
    let checks = vec![
        Check::within("detachment_exponent", fit.exponent, 1.4, 1.6).criterion(4),
        Check::within("flatness_decay", beta.exponent, 0.4, 0.6).detail("residual", beta.residual).criterion(7),
        harnack_check("harnack_violations", &harnack).criterion(8),
        nondegeneracy_check_entry(&nd),
    ];
    if let Some(a) = art {
        a.json("flatness", &recs)?;
        a.json("harnack", &harnack)?;
        a.json("nondegeneracy", &nd.supersolution)?;
        let eps: Vec<(f64, f64)> = recs.iter().map(|r| (r.r, r.epsilon)).collect();
        a.svg("flatness", &emit_plot("flatness epsilon(r)", &[Series::new("epsilon", eps)], PlotKind::LogLog)?)?;
        let heights: Vec<(f64, f64)> = fit.points.iter().map(|p| (p.0.exp(), p.1.exp())).collect();
        a.svg("detachment", &emit_plot("height of F above Z", &[Series::new("height", heights)], PlotKind::LogLog)?)?;
    }
    Ok(checks)
}

fn nondegeneracy_check_entry(nd: &NondegeneracyCases) -> Check {
    let rejected = matches!(nd.cut_plane, Err(LabError::Hypothesis(_)));
    Check::at_least("nondegeneracy_slope", nd.supersolution.slope, 1.0)
        .and("holds", f64::from(u8::from(nd.supersolution.holds)), nd.supersolution.holds)
        .and("cut_plane_rejected", f64::from(u8::from(rejected)), rejected)
        .criterion(9)
}

/// Everything the ten acceptance criteria are evaluated on.
pub struct Battery {
    pub cfg: SolverConfig,
    pub signorini: SignoriniRun,
    pub star: AnalyticCase,
    pub star_coarse: AnalyticCase,
    pub example: ExampleRun,
    pub example_coarse: ExampleRun,
    pub calibrated_c_mono: Option<f64>,
    pub nondegeneracy: NondegeneracyCases,
    pub oracle_gap: f64,
}

impl Battery {
    /// Solves at the pinned spacings ([`FULL_COARSE_H`], [`FULL_FINE_H`]);
    /// the other settings come from `cfg`.
    pub fn build(cfg: &SolverConfig, timer: &mut Timer) -> Result<Self> {
        let coarse_cfg = cfg.with_h(FULL_COARSE_H);
        let fine_cfg = cfg.with_h(FULL_FINE_H);
        let signorini = timer.time("signorini_solve", || SignoriniRun::solve(&coarse_cfg, 1.0))?;
        let example = timer.time("onephase_solve", || ExampleRun::solve(&SolverConfig { radius: 0.5, ..fine_cfg.clone() }))?;
        let example_coarse =
            timer.time("onephase_solve_coarse", || ExampleRun::solve(&SolverConfig { radius: 0.5, ..coarse_cfg.clone() }))?;
        Ok(Battery {
            star: AnalyticCase::signorini_profile(FULL_COARSE_H)?,
            star_coarse: AnalyticCase::signorini_profile(2.0 * FULL_COARSE_H)?,
            calibrated_c_mono: calibrate_on_corpus(cfg, FULL_COARSE_H)?,
            nondegeneracy: timer.time("nondegeneracy", || NondegeneracyCases::run(cfg))?,
            oracle_gap: oracle_consistency()?,
            cfg: cfg.clone(),
            signorini,
            example,
            example_coarse,
        })
    }

    /// One entry per acceptance criterion, in order.
    pub fn criteria(&self) -> Result<Vec<Check>> {
        let cfg = &self.cfg;
        let mut out = Vec::with_capacity(10);

        let s = &self.signorini;
        let comp = s.complementarity();
        let offset = s.contact_offset() / s.h();
        out.push(
            Check::at_most("signorini_relative_l2", s.relative_l2()?, 0.02)
                .and("complementarity_max", comp.max(), comp.max() <= 5e-3)
                .and("contact_offset_over_h", offset, offset <= 2.0)
                .criterion(1),
        );

        let star_rep = self.star.frequency(cfg)?;
        let (lo, hi) = ntilde_range(&star_rep, 16.0 * self.star.h(), 0.25);
        let dev = (lo - 1.5).abs().max((hi - 1.5).abs());
        out.push(
            Check::at_most("signorini_ntilde_deviation", dev, 0.05)
                .detail("ntilde_min", lo)
                .detail("ntilde_max", hi)
                .and("violations", star_rep.violations.len() as f64, star_rep.violations.is_empty())
                .and("calibrated_c_mono", self.calibrated_c_mono.unwrap_or(f64::NAN), self.calibrated_c_mono.is_some_and(|c| c <= cfg.c_mono))
                .criterion(2),
        );

        let ex_rep = self.example.frequency(cfg)?;
        out.push(Check::at_least("example_growth_slope", ex_rep.growth_slope.unwrap_or(f64::NAN), 2.85).criterion(3));

        let fit = self.example.exponent_fit()?;
        let haus = self.example.hausdorff()? / self.example.h();
        out.push(
            Check::within("detachment_exponent", fit.exponent, 1.4, 1.6)
                .and("hausdorff_over_h", haus, haus <= 2.0)
                .criterion(4),
        );

        let (rs_c, rs_f) = (self.star_coarse.rellich(0.25)?, self.star.rellich(0.25)?);
        let (re_c, re_f) = (self.example_coarse.rellich(0.25)?, self.example.rellich(0.25)?);
        out.push(
            Check::at_most("rellich_residual", rs_f.max(re_f), 0.05)
                .and("signorini_coarse", rs_c, rs_f < rs_c)
                .and("signorini_fine", rs_f, true)
                .and("example_coarse", re_c, re_f < re_c)
                .and("example_fine", re_f, true)
                .criterion(5),
        );

        let gap = derivative_gap(&ex_rep, 16.0 * self.example.h());
        out.push(
            Check::at_most("bookkeeping_constant", bookkeeping_constant(&ex_rep), cfg.c_tilde)
                .and("derivative_gap", gap, gap <= 0.05)
                .criterion(6),
        );

        let (_, beta) = self.example.flatness(cfg.beta_min)?;
        out.push(Check::within("flatness_decay", beta.exponent, 0.4, 0.6).detail("residual", beta.residual).criterion(7));

        let mut harnack = self.example.harnack(cfg)?;
        harnack.extend(self.example_coarse.harnack(cfg)?);
        out.push(harnack_check("harnack_violations", &harnack).criterion(8));

        out.push(nondegeneracy_check_entry(&self.nondegeneracy));

        out.push(Check::at_most("oracle_q_gap", self.oracle_gap, 1e-8).criterion(10));
        Ok(out)
    }

    pub fn write_artifacts(&self, art: &mut Artifacts) -> Result<()> {
        example_artifacts(art, "example", &self.example)?;
        frequency_plots(art, "example", &self.example.frequency(&self.cfg)?)?;
        frequency_plots(art, "signorini_profile", &self.star.frequency(&self.cfg)?)?;
        art.field("signorini_w", &self.signorini.solution.w)?;
        art.csv("signorini_contact", &self.signorini.solution.contact_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_lists_the_valid_ones() {
        let err = run_suite("nope", &SolverConfig::default(), None).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, LabError::Argument(_)));
        for s in SUITES {
            assert!(msg.contains(s));
        }
    }

    #[test]
    fn check_verdicts() {
        assert!(Check::at_most("a", 1.0, 2.0).pass);
        assert!(!Check::at_most("a", 3.0, 2.0).pass);
        assert!(!Check::at_most("a", f64::NAN, 2.0).pass);
        assert!(Check::within("b", 1.5, 1.4, 1.6).pass);
        assert!(!Check::within("b", 1.5, 1.4, 1.6).and("x", 0.0, false).pass);
        assert!(Check::at_least("c", 3.0, 2.85).line().starts_with("PASS"));
    }

    #[test]
    fn hausdorff_of_offset_segments() {
        let a = vec![vec![[-0.2, 0.0], [0.2, 0.0]]];
        let b = vec![vec![[-0.2, 0.01], [0.2, 0.01]]];
        assert!((hausdorff_within(&a, &b, 1.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn oracle_q_matches_the_gradient_on_f() {
        assert!(oracle_consistency().unwrap() < 1e-8);
    }

    #[test]
    fn dyadic_scales() {
        assert_eq!(dyadic(0.25, 0.06), vec![0.25, 0.125, 0.0625]);
    }
}

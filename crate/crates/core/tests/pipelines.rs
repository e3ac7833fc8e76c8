//! End-to-end checks of the solvers and diagnostics against independent
//! references.

use fb_lab::config::SolverConfig;
use fb_lab::frequency::compute_corrections;
use fb_lab::grid::{DomainGeometry, GridSpec, Shape};
use fb_lab::onephase::energy;
use fb_lab::oracle::{example_energy_polar, example_fb_polyline, example_q, example_u_at, polar, signorini_profile_at};
use fb_lab::regularity::{measure_trap, nontangential_direction, parabola_barrier, Frame};
use fb_lab::signorini::{complementarity_report, solve_signorini, SignoriniProblem};
use fb_lab::suite::{run_suite, AnalyticCase, ExampleRun};

fn example(h: f64) -> ExampleRun {
    ExampleRun::solve(&SolverConfig::default().with_h(h)).unwrap()
}

#[test]
fn example_energy_matches_the_exact_solution() {
    let run = example(1.0 / 128.0);
    let geo = &run.problem.geometry;
    let exact = geo.field_from_fn(example_u_at).unwrap();
    let j_exact = energy(&exact, &run.problem.coeff);
    let rel = (run.solution.energy - j_exact).abs() / j_exact;
    assert!(rel < 0.01, "J = {} vs {j_exact}", run.solution.energy);
    assert!(run.solution.energy < run.solution.initial_energy);
    // the lattice domain misses an O(h) band along the arc
    let polar = example_energy_polar(0.5, 512).unwrap();
    assert!(j_exact < polar && (polar - j_exact) / polar < 4.0 * 128.0f64.recip() / 0.5);
}

#[test]
fn detachment_is_found_within_two_cells_on_coarse_grids() {
    for h in [1.0 / 64.0, 1.0 / 128.0] {
        let run = example(h);
        let d = run.detachment().unwrap();
        assert!(d[0].hypot(d[1]) <= 2.0 * h + 1e-12, "h = {h}: {d:?}");
        assert_eq!(run.fb().thin_boundary.len(), 1);
    }
}

/// `E₂(r) = 2∫_{F ∩ B_r} w ∂_ν w` with `w = x₂` and `∂_ν w = ν₂ + |Du|` on
/// `F`, by the midpoint rule on a dense sampling of the analytic curve.
fn e2_oracle(r: f64) -> f64 {
    let line = example_fb_polyline(r, 200_000).unwrap();
    let mut sum = 0.0;
    for s in line.windows(2) {
        let m = [0.5 * (s[0][0] + s[1][0]), 0.5 * (s[0][1] + s[1][1])];
        if m[1] <= 0.0 || m[0].hypot(m[1]) >= r {
            continue;
        }
        let t = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
        let len = t[0].hypot(t[1]);
        let (rr, th) = polar(m);
        let mut nu = [t[1] / len, -t[0] / len];
        // outward from Ω⁺, which lies at larger angles
        if nu[0] * -th.sin() + nu[1] * th.cos() > 0.0 {
            nu = [-nu[0], -nu[1]];
        }
        sum += m[1] * (nu[1] + example_q(rr, th).unwrap()) * len;
    }
    2.0 * sum
}

#[test]
fn e2_matches_the_curve_quadrature() {
    let oracle = e2_oracle(0.25);
    assert!(oracle > 0.0);
    let exact = AnalyticCase::example(1.0 / 512.0).unwrap();
    let (_, e2) = compute_corrections(exact.input(), 0.25).unwrap();
    assert!((e2 - oracle).abs() <= 0.05 * oracle, "analytic traces: {e2} vs {oracle}");
    let run = example(1.0 / 256.0);
    let (_, e2) = compute_corrections(run.input(), 0.25).unwrap();
    assert!((e2 - oracle).abs() <= 0.05 * oracle, "solver output: {e2} vs {oracle}");
}

#[test]
fn measured_trap_encloses_the_solution() {
    let run = example(1.0 / 128.0);
    let u = run.u();
    let d = run.detachment().unwrap();
    for r in [0.25, 0.125] {
        let e = nontangential_direction(u, d, r).unwrap();
        let frame = Frame::new(d, e).unwrap();
        let (a, b) = measure_trap(u, &frame, r);
        assert!(a > 0.0 && b > 0.0);
        let spec = u.spec();
        for k in 0..spec.len() {
            let p = spec.point(k);
            let x = [p[0] - d[0], p[1] - d[1]];
            if !u.is_masked(k) || x[0].hypot(x[1]) > r {
                continue;
            }
            let t = x[0] * frame.direction[0] + x[1] * frame.direction[1];
            let v = u.at(k);
            assert!(v <= (t + a).max(0.0) + 1e-12, "upper trap at {p:?}");
            if v > 0.0 {
                assert!(v >= (t - b).max(0.0) - 1e-12, "lower trap at {p:?}");
            }
        }
    }
}

#[test]
fn signorini_invariants_at_two_resolutions() {
    let mut errs = Vec::new();
    for h in [1.0 / 64.0, 1.0 / 128.0] {
        let p = SignoriniProblem::new(GridSpec::new(1.0, h, Shape::HalfDisk).unwrap(), signorini_profile_at).unwrap();
        let sol = solve_signorini(&p, &SolverConfig::default()).unwrap();
        let rep = complementarity_report(&sol, 5e-3);
        assert!(rep.pass, "{rep:?}");
        assert!(sol.thin.iter().all(|t| t.w >= t.obstacle - 1e-12));
        let exact = p.geometry.field_from_fn(signorini_profile_at).unwrap();
        errs.push(sol.w.zip_map(&exact, |a, b| (a - b).abs()).unwrap().max());
    }
    assert!(errs[1] < errs[0], "{errs:?}");
}

#[test]
fn barrier_is_stable_under_refinement() {
    let eps = 1.0 / 16.0;
    let coarse_geo = DomainGeometry::half_disk(1.0, 1.0 / 64.0).unwrap();
    let fine_geo = DomainGeometry::half_disk(1.0, 1.0 / 128.0).unwrap();
    let (pc, fc) = parabola_barrier(&coarse_geo.zeros().unwrap(), eps).unwrap();
    let (pf, _) = parabola_barrier(&fine_geo.zeros().unwrap(), eps).unwrap();
    let cs = coarse_geo.spec();
    let fs = fine_geo.spec();
    let mut worst = 0.0f64;
    for k in 0..cs.len() {
        if !fc[k] {
            continue;
        }
        let (i, j) = cs.ij(k);
        let kf = fs.index(2 * i, 2 * j).unwrap();
        worst = worst.max((pc[k] - pf[kf]).abs());
    }
    assert!(worst < 2e-3, "coarse/fine barrier gap {worst}");
}

#[test]
fn suite_reports_are_reproducible() {
    let cfg = SolverConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let a = run_suite("onephase-example", &cfg, Some(&dir.path().join("a"))).unwrap();
    let b = run_suite("onephase-example", &cfg, Some(&dir.path().join("b"))).unwrap();
    let read = |o: &fb_lab::suite::RunOutcome, f: &str| std::fs::read(o.directory.as_ref().unwrap().join(f)).unwrap();
    for f in ["report.json", "svg/u_example.svg", "csv/free_boundary_example.csv", "fields/u_example.dump"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs");
    }
    assert!(a.report.checks.iter().all(|c| !c.name.is_empty()));
    let names: Vec<&str> = a.report.artifacts.iter().map(String::as_str).collect();
    assert!(names.contains(&"report.json"));
}

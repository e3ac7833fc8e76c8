use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fb_lab::config::SolverConfig;
use fb_lab::corpus::onephase_problem;
use fb_lab::frequency::{analyze, BoundaryCurve, FrequencyConfig, FrequencyInput};
use fb_lab::grid::{DomainGeometry, GridSpec, Region, Shape};
use fb_lab::io::{polyline_csv, polylines_csv, read_field, read_polyline_file, to_json, Artifacts};
use fb_lab::onephase::{check_fb_conditions, layer_level, solve, FreeBoundarySet};
use fb_lab::oracle::{example_fb_polyline, example_q_at, example_u_at, signorini_profile_at};
use fb_lab::plot::{emit_plot, PlotKind, Series};
use fb_lab::regularity::fb_exponent_fit;
use fb_lab::signorini::{complementarity_report, solve_signorini, SignoriniProblem};
use fb_lab::suite::{run_suite, RunOutcome};
use fb_lab::{LabError, Result};

#[derive(Parser)]
#[command(name = "fb-lab", version, about = "One-phase free boundaries, thin obstacles and frequency diagnostics")]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root of the output tree.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the one-phase problem described by the configuration.
    Onephase,
    /// Solve the thin obstacle problem with `r^{3/2}cos(3θ/2)` on the arc.
    Signorini,
    /// Frequency analysis of a field dump.
    Frequency {
        #[arg(long)]
        field: PathBuf,
        /// Free boundary polyline CSV; the field is then a one-phase `u` and
        /// the analysis runs on `x2 - u`. Without it the field is a thin
        /// obstacle solution with `F̄` the diameter.
        #[arg(long)]
        fb: Option<PathBuf>,
        /// Level of `u` bounding `Ω⁺` (default: the solver's interface level).
        #[arg(long)]
        level: Option<f64>,
    },
    /// Run a suite and print its pass/fail JSON without writing artifacts.
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Detachment exponent of a free boundary polyline at a point of Z.
    FitExponent {
        #[arg(long)]
        fb: PathBuf,
        /// `x,y` of the detachment point.
        #[arg(long, value_parser = parse_point)]
        point: [f64; 2],
        /// Upper end of the fit window (default `R/4`).
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Sample the explicit solutions on a grid.
    Oracle {
        #[arg(long, value_enum)]
        what: OracleWhat,
        /// Grid as `R=<radius>,h=<spacing>` (default: from the configuration).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Run a suite and write its artifacts below `<out>/<suite>/<hash>/`.
    RunSuite { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleWhat {
    U,
    Fb,
    #[value(name = "Q", alias = "q")]
    Q,
    Signorini,
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected x,y")?;
    let x = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok([x, y])
}

fn load_config(cli: &Cli) -> Result<SolverConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SolverConfig::from_file(p)?,
        None => SolverConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_grid(s: &str, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let mut tmp = cfg.clone();
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| LabError::Argument(format!("grid entries are key=value, got `{part}`")))?;
        match k.trim() {
            "R" => tmp.set("grid.R", v.trim())?,
            "h" => tmp.set("grid.h", v.trim())?,
            other => return Err(LabError::Argument(format!("unknown grid key `{other}` (expected R, h)"))),
        }
    }
    Ok((tmp.radius, tmp.h))
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

fn run_dir(cli: &Cli, verb: &str, cfg: &SolverConfig) -> Result<Artifacts> {
    Artifacts::create(cli.out.join(verb).join(cfg.hash()))
}

fn report_suite(cli: &Cli, outcome: &RunOutcome) {
    for c in &outcome.report.checks {
        say(cli, c.line());
    }
    if let Some(d) = &outcome.directory {
        say(cli, format!("artifacts in {}", d.display()));
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Onephase => {
            let problem = onephase_problem(&cfg)?;
            let sol = solve(&problem, &cfg)?;
            let fbc = check_fb_conditions(&sol.u, &sol.free_boundary, &problem.coeff, &problem.geometry, cfg.fb_tol);
            let mut art = run_dir(cli, "onephase", &cfg)?;
            art.field("u", &sol.u)?;
            art.csv("free_boundary", &polyline_csv(&sol.free_boundary))?;
            art.json("fb_conditions", &fbc)?;
            let fb = Series::from_polylines("F", &sol.free_boundary.polylines);
            art.svg("u", &emit_plot("u", &[fb], PlotKind::FieldHeatmap(&sol.u))?)?;
            say(
                cli,
                format!(
                    "energy {:.8e}, pde residual {:.2e}, contact nodes {}, thin boundary {:?}",
                    sol.energy,
                    sol.pde_residual,
                    sol.free_boundary.contact_count(),
                    sol.free_boundary.thin_boundary_points()
                ),
            );
            say(cli, format!("free |s - Q| mean {:.3e} rms {:.3e}; contact min s - Q {:.3e}", fbc.free_mean, fbc.free_rms, fbc.contact_min));
            say(cli, format!("written to {}", art.root().display()));
            Ok(fbc.contact_ok())
        }
        Command::Signorini => {
            let spec = GridSpec::new(cfg.radius, cfg.h, Shape::HalfDisk)?;
            let problem = SignoriniProblem::new(spec, signorini_profile_at)?;
            let sol = solve_signorini(&problem, &cfg)?;
            let rep = complementarity_report(&sol, 5e-3);
            let mut art = run_dir(cli, "signorini", &cfg)?;
            art.field("w", &sol.w)?;
            art.csv("contact", &sol.contact_csv())?;
            art.json("complementarity", &rep)?;
            say(cli, format!("sweeps {}, contact nodes {}, complementarity max {:.3e}", sol.iterations, rep.contact_count, rep.max()));
            say(cli, format!("written to {}", art.root().display()));
            Ok(rep.pass)
        }
        Command::Frequency { field, fb, level } => frequency(cli, &cfg, field, fb.as_deref(), *level),
        Command::Verify { suite } => {
            let outcome = run_suite(suite, &cfg, None)?;
            println!("{}", to_json(&outcome.report)?.trim_end());
            Ok(outcome.pass())
        }
        Command::FitExponent { fb, point, r_max } => {
            let lines = read_polyline_file(fb)?;
            let set = FreeBoundarySet::from_polylines(lines, cfg.h, 0);
            let fit = fb_exponent_fit(&set, *point, r_max.unwrap_or(0.25 * cfg.radius))?;
            println!("{}", to_json(&fit)?.trim_end());
            Ok(fit.pass)
        }
        Command::Oracle { what, grid } => {
            let (r, h) = match grid {
                Some(g) => parse_grid(g, &cfg)?,
                None => (cfg.radius, cfg.h),
            };
            let geo = DomainGeometry::half_disk(r, h)?;
            let tag = SolverConfig { radius: r, h, ..cfg.clone() };
            let mut art = run_dir(cli, "oracle", &tag)?;
            match what {
                OracleWhat::U => art.field("u", &geo.field_from_fn(example_u_at)?)?,
                OracleWhat::Q => art.field("Q", &geo.field_from_fn(|p| example_q_at(p).unwrap_or(f64::NAN))?)?,
                OracleWhat::Signorini => art.field("w", &geo.field_from_fn(signorini_profile_at)?)?,
                OracleWhat::Fb => {
                    let line = example_fb_polyline(r.min(1.0), (r / h).ceil() as usize * 16)?;
                    art.csv("free_boundary", &polylines_csv(&[line]))?;
                }
            }
            say(cli, format!("written to {}", art.root().display()));
            Ok(true)
        }
        Command::RunSuite { name } => {
            let outcome = run_suite(name, &cfg, Some(&cli.out))?;
            report_suite(cli, &outcome);
            Ok(outcome.pass())
        }
    }
}

fn frequency(cli: &Cli, cfg: &SolverConfig, field: &Path, fb: Option<&Path>, level: Option<f64>) -> Result<bool> {
    let (_, f) = read_field(field)?;
    let spec = *f.spec();
    let h = spec.spacing;
    let fcfg = FrequencyConfig::from_solver(cfg, &spec)?;
    let rep = match fb {
        Some(path) => {
            let lines = read_polyline_file(path)?;
            let set = FreeBoundarySet::from_polylines(lines, h, spec.len());
            let curves = BoundaryCurve::from_free_boundary(&set, &f);
            let w = f.map(|p, v| p[1] - v)?;
            let input = FrequencyInput {
                w: &w,
                region: Region::Positive {
                    field: &f,
                    threshold: level.unwrap_or(layer_level() * h),
                },
                boundary: &curves,
                layer: h,
            };
            analyze(input, &fcfg)?
        }
        None => {
            let curves = [BoundaryCurve::diameter(spec.half_width - 2.0 * h, h)];
            let input = FrequencyInput { w: &f, region: Region::Domain, boundary: &curves, layer: 0.0 };
            analyze(input, &fcfg)?
        }
    };
    let stem = field.file_stem().map_or("field".into(), |s| s.to_string_lossy().into_owned());
    let mut art = run_dir(cli, &format!("frequency/{stem}"), cfg)?;
    art.json("frequency", &rep)?;
    art.csv("frequency", &rep.csv())?;
    let hs: Vec<(f64, f64)> = rep.rows.iter().map(|r| (r.r, r.h)).collect();
    art.svg("h", &emit_plot("H(r)", &[Series::new("H", hs)], PlotKind::LogLog)?)?;
    let ns: Vec<(f64, f64)> = rep.rows.iter().filter_map(|r| r.n_tilde.map(|n| (r.r, n))).collect();
    if !ns.is_empty() {
        art.svg("ntilde", &emit_plot("N tilde(r)", &[Series::new("N tilde", ns)], PlotKind::LogLog)?)?;
    }
    say(
        cli,
        format!(
            "radii {}, violations {}, degree {:?}, growth slope {:?}",
            rep.rows.len(),
            rep.violations.len(),
            rep.degree,
            rep.growth_slope
        ),
    );
    say(cli, format!("written to {}", art.root().display()));
    Ok(rep.monotone())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

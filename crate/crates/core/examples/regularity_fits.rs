//! Flatness decay and Harnack steps at the detachment point.

use fb_lab::config::SolverConfig;
use fb_lab::suite::ExampleRun;

fn main() -> fb_lab::Result<()> {
    let cfg = SolverConfig::default().with_h(1.0 / 256.0);
    let run = ExampleRun::solve(&cfg)?;
    let (records, fit) = run.flatness(cfg.beta_min)?;
    for f in &records {
        println!("r {:.4}  eps {:.4e}  upper {:.3e}  lower {:.3e}", f.r, f.epsilon, f.upper, f.lower);
    }
    println!("flatness exponent {:.3} (pass {})", fit.exponent, fit.pass);
    for h in run.harnack(&cfg)? {
        println!("Harnack r {:.4}: a {:.3e} b {:.3e} -> {:?}", h.r, h.a, h.b, h.outcome);
    }
    Ok(())
}

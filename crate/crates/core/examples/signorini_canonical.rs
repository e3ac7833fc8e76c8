//! Thin obstacle problem with the homogeneous 3/2 solution as boundary data.

use fb_lab::config::SolverConfig;
use fb_lab::suite::{ntilde_range, SignoriniRun};

fn main() -> fb_lab::Result<()> {
    let cfg = SolverConfig::default().with_h(1.0 / 256.0);
    let run = SignoriniRun::solve(&cfg, 1.0)?;
    let comp = run.complementarity();
    println!("relative L2 error {:.3e}", run.relative_l2()?);
    println!("complementarity max {:.3e} over {} contact nodes", comp.max(), comp.contact_count);
    println!("contact end offset {:.2} h", run.contact_offset() / run.h());
    let rep = run.frequency(&cfg)?;
    let (lo, hi) = ntilde_range(&rep, 16.0 * run.h(), 0.5);
    println!("N tilde in [{lo:.4}, {hi:.4}], degree {:?}", rep.degree);
    Ok(())
}

//! Solve the explicit one-phase example and compare with the closed form.
//!
//! cargo run --release --example onephase_example -- [h]

use fb_lab::config::SolverConfig;
use fb_lab::suite::ExampleRun;

fn main() -> fb_lab::Result<()> {
    let h = std::env::args().nth(1).map_or(Ok(1.0 / 128.0), |s| s.parse()).expect("h");
    let run = ExampleRun::solve(&SolverConfig::default().with_h(h))?;
    let d = run.detachment()?;
    let fit = run.exponent_fit()?;
    let fbc = run.fb_conditions(0.1);
    println!("h = {h}, energy {:.6}, pde residual {:.2e}", run.solution.energy, run.solution.pde_residual);
    println!("detachment point ({:.4}, {:.4}), Hausdorff/h {:.2}", d[0], d[1], run.hausdorff()? / h);
    println!("detachment exponent {:.3} over {:?}", fit.exponent, fit.window);
    println!("|Du| - Q on F: mean {:.3e}, rms {:.3e}; contact violations {}", fbc.free_mean, fbc.free_rms, fbc.contact_violations);
    Ok(())
}

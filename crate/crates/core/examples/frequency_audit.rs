//! Frequency, growth and Rellich residuals on the analytic corpus.

use fb_lab::config::SolverConfig;
use fb_lab::suite::{bookkeeping_constant, calibrate_on_corpus, AnalyticCase};

fn main() -> fb_lab::Result<()> {
    let cfg = SolverConfig::default();
    for (name, case) in [
        ("w*", AnalyticCase::signorini_profile(1.0 / 256.0)?),
        ("example", AnalyticCase::example(1.0 / 512.0)?),
    ] {
        let rep = case.frequency(&cfg)?;
        println!("{name}: h = {}, growth slope {:?}, violations {}", case.h(), rep.growth_slope, rep.violations.len());
        println!("  Rellich residual at 1/4: {:.3e}", case.rellich(0.25)?);
        println!("  bookkeeping constant {:.3}", bookkeeping_constant(&rep));
        for row in rep.rows.iter().step_by(4) {
            println!("  r {:.4}  H {:.4e}  N~ {:?}", row.r, row.h, row.n_tilde);
        }
    }
    println!("calibrated C_mono {:?}", calibrate_on_corpus(&cfg, 1.0 / 256.0)?);
    Ok(())
}

//! Sliding parabola barrier on a supersolution and on a cut plane.

use fb_lab::config::SolverConfig;
use fb_lab::suite::NondegeneracyCases;

fn main() -> fb_lab::Result<()> {
    let cases = NondegeneracyCases::run(&SolverConfig::default())?;
    let s = &cases.supersolution;
    println!("supersolution: holds {}, slope at 0 {:.3}", s.holds, s.slope);
    match &cases.cut_plane {
        Ok(r) => println!("cut plane unexpectedly accepted: {r:?}"),
        Err(e) => println!("cut plane rejected: {e}"),
    }
    Ok(())
}

//! Print the closed-form free boundary and its datum along a few radii.

use fb_lab::oracle::{example_fb, example_q, q_squared_on_fb};
use fb_lab::suite::oracle_consistency;

fn main() -> fb_lab::Result<()> {
    println!("r,theta_F,Q");
    for k in 1..=10 {
        let r = 0.05 * k as f64;
        let t = example_fb(r)?;
        println!("{r:.2},{t:.10},{:.10}", example_q(r, t)?);
        debug_assert!(q_squared_on_fb(r)? > 0.0);
    }
    println!("max |Q - |Du|| on F: {:.3e}", oracle_consistency()?);
    Ok(())
}

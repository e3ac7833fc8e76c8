//! Closed-form reference solutions.
//!
//! * the one-phase example `u = (r sinθ - r^{3/2} cos(3θ/2))_+` on the upper
//!   half plane, whose free boundary `F = {sinθ = r^{1/2} cos(3θ/2)}` detaches
//!   from `{x2 = 0}` at the origin like `x2 ≈ x1^{3/2}`;
//! * the 3/2-homogeneous Signorini profile `w* = r^{3/2} cos(3θ/2)`.
//!
//! Angles are measured from the positive `x1` axis, `θ ∈ [0, π]`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::Point;

/// Polar coordinates of a point of the closed upper half plane.
pub fn polar(p: Point) -> (f64, f64) {
    let r = p[0].hypot(p[1]);
    let th = p[1].max(0.0).atan2(p[0]);
    (r, th)
}

/// Smooth extension `x2 - w*` of the example: equals the example on `Ω⁺`.
fn v(r: f64, th: f64) -> f64 {
    r * th.sin() - r.powf(1.5) * (1.5 * th).cos()
}

pub fn example_u(r: f64, th: f64) -> f64 {
    v(r, th).max(0.0)
}

pub fn example_u_at(p: Point) -> f64 {
    let (r, th) = polar(p);
    example_u(r, th)
}

/// `Du` of the example on `Ω⁺` in Cartesian components.
pub fn example_grad(r: f64, th: f64) -> [f64; 2] {
    let s = r.sqrt();
    [-1.5 * s * (0.5 * th).cos(), 1.0 + 1.5 * s * (0.5 * th).sin()]
}

/// `w = x2 - u` for the example: `w*` on `Ω⁺`, `x2` below the free boundary.
pub fn example_w_at(p: Point) -> f64 {
    p[1].max(0.0) - example_u_at(p)
}

/// Angle of the free boundary at radius `r`: root of
/// `sinθ - r^{1/2} cos(3θ/2)` in `(0, π/3)` by Newton's method from `r^{1/2}`.
pub fn example_fb(r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(LabError::Argument(format!("example_fb needs r in (0, 1], got {r}")));
    }
    let s = r.sqrt();
    let f = |t: f64| t.sin() - s * (1.5 * t).cos();
    let df = |t: f64| t.cos() + 1.5 * s * (1.5 * t).sin();
    let mut t = s.min(1.0);
    for _ in 0..50 {
        let step = f(t) / df(t);
        t -= step;
        if f(t).abs() < 1e-12 && step.abs() < 1e-10 {
            if t > 0.0 && t < PI / 3.0 {
                return Ok(t);
            }
            break;
        }
    }
    Err(LabError::Root { r })
}

/// Point of `F` at radius `r`.
pub fn example_fb_point(r: f64) -> Result<Point> {
    let t = example_fb(r)?;
    Ok([r * t.cos(), r * t.sin()])
}

/// `|Du|^2` on `F` from the closed form `1 + 9r/4 + 3 sinθ sin(θ/2)/cos(3θ/2)`
/// evaluated at the free boundary angle.
pub fn q_squared_on_fb(r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(1.0);
    }
    let t = example_fb(r)?;
    Ok(1.0 + 2.25 * r + 3.0 * t.sin() * (0.5 * t).sin() / (1.5 * t).cos())
}

/// Free boundary datum of the example, extended radially off `F`:
/// `Q(x) = Q_F(|x|)`, with `Q_F(r)` the value of `|Du|` at the point of `F` of
/// radius `r`. For `|x| > 1` the value at `r = 1` is kept.
pub fn example_q(r: f64, _th: f64) -> Result<f64> {
    let q2 = q_squared_on_fb(r.min(1.0))?;
    if !(q2 > 0.0) {
        return Err(LabError::Formula(format!("negative radicand {q2} at r = {r}")));
    }
    Ok(q2.sqrt())
}

pub fn example_q_at(p: Point) -> Result<f64> {
    let (r, th) = polar(p);
    example_q(r, th)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExampleEval {
    pub r: f64,
    pub theta: f64,
    pub u: f64,
    pub in_positive_set: bool,
    pub q: Option<f64>,
}

pub fn example_eval(r: f64, th: f64) -> ExampleEval {
    let val = v(r, th);
    ExampleEval {
        r,
        theta: th,
        u: val.max(0.0),
        in_positive_set: val > 0.0,
        q: example_q(r, th).ok(),
    }
}

pub fn signorini_profile(r: f64, th: f64) -> f64 {
    r.powf(1.5) * (1.5 * th).cos()
}

pub fn signorini_profile_at(p: Point) -> f64 {
    let (r, th) = polar(p);
    signorini_profile(r, th)
}

/// `Dw*` in Cartesian components.
pub fn signorini_grad(r: f64, th: f64) -> [f64; 2] {
    let s = r.sqrt();
    [1.5 * s * (0.5 * th).cos(), -1.5 * s * (0.5 * th).sin()]
}

/// Which part of the Signorini system a point of the closed half disk sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignoriniFacet {
    Interior,
    /// `θ = π`: `w* = 0`, `∂_2 w* = -(3/2) r^{1/2}`.
    Contact,
    /// `θ = 0`: `w* > 0`, `∂_2 w* = 0`.
    Free,
}

pub fn signorini_facet(r: f64, th: f64) -> SignoriniFacet {
    if r > 0.0 && (th - PI).abs() < 1e-14 {
        SignoriniFacet::Contact
    } else if r > 0.0 && th.abs() < 1e-14 {
        SignoriniFacet::Free
    } else if r == 0.0 {
        SignoriniFacet::Contact
    } else {
        SignoriniFacet::Interior
    }
}

/// Densely sampled analytic `F̄ ∩ B_rmax`: the contact segment `[-rmax, 0]`
/// on `{x2 = 0}` followed by the detached arc, ordered by `x1`.
pub fn example_fb_polyline(rmax: f64, samples: usize) -> Result<Vec<Point>> {
    let mut pts = Vec::with_capacity(2 * samples + 1);
    for k in 0..samples {
        pts.push([-rmax + rmax * k as f64 / samples as f64, 0.0]);
    }
    pts.push([0.0, 0.0]);
    // quadratic clustering towards the origin
    for k in 1..=samples {
        let s = k as f64 / samples as f64;
        pts.push(example_fb_point(rmax * s * s)?);
    }
    Ok(pts)
}

/// Polar Gauss–Legendre quadrature of the example energy
/// `∫_{B_R⁺} |Du|^2 + Q^2 χ_{u>0}` using `r = s^2` to absorb the `r^{1/2}`
/// terms. Panels are split at the free boundary angle.
pub fn example_energy_polar(radius: f64, panels: usize) -> Result<f64> {
    let (xg, wg) = gauss_legendre_8();
    let mut total = 0.0;
    let smax = radius.sqrt();
    for pr in 0..panels {
        let (s0, s1) = (smax * pr as f64 / panels as f64, smax * (pr + 1) as f64 / panels as f64);
        for (xs, ws) in xg.iter().zip(&wg) {
            let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * xs;
            let jac_s = 0.5 * (s1 - s0) * ws;
            let r = s * s;
            let tf = example_fb(r)?;
            let q2 = q_squared_on_fb(r)?;
            let mut ang = 0.0;
            for pt in 0..panels {
                let (t0, t1) = (tf + (PI - tf) * pt as f64 / panels as f64, tf + (PI - tf) * (pt + 1) as f64 / panels as f64);
                for (xt, wt) in xg.iter().zip(&wg) {
                    let t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * xt;
                    let g = example_grad(r, t);
                    ang += 0.5 * (t1 - t0) * wt * (g[0] * g[0] + g[1] * g[1] + q2);
                }
            }
            // dA = r dr dθ = 2 s^3 ds dθ
            total += jac_s * 2.0 * s * s * s * ang;
        }
    }
    Ok(total)
}

pub(crate) fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let x = [
        -0.960_289_856_497_536_2,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    let w = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_47,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_47,
        0.101_228_536_290_376_26,
    ];
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_value_at_quarter_radius() {
        let u = example_u(0.25, PI / 2.0);
        assert!((u - (0.25 + 0.125 * 2f64.sqrt() / 2.0)).abs() < 1e-15);
        assert!((u - 0.338_388_347_648_318_4).abs() < 1e-12);
        assert_eq!(example_u(0.3, 0.0), 0.0);
    }

    #[test]
    fn fb_small_radius_asymptotics() {
        let t = example_fb(1e-4).unwrap();
        assert!((0.0099..=0.0101).contains(&t), "{t}");
    }

    #[test]
    fn fb_matches_bisection() {
        let r: f64 = 0.25;
        let f = |t: f64| t.sin() - r.sqrt() * (1.5 * t).cos();
        let (mut a, mut b) = (1e-9, PI / 3.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        assert!((example_fb(r).unwrap() - 0.5 * (a + b)).abs() < 1e-12);
    }

    #[test]
    fn u_vanishes_on_fb() {
        for r in [1e-3, 0.05, 0.25, 0.5] {
            let t = example_fb(r).unwrap();
            assert!(v(r, t).abs() < 1e-12);
        }
    }

    #[test]
    fn q_at_origin_is_one() {
        assert!((example_q(0.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((example_q(1e-10, 0.0).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gradient_matches_polar_derivatives() {
        for (r, t) in [(0.1, 0.4), (0.3, 2.0), (0.02, 3.0)] {
            let g = example_grad(r, t);
            // ∂_r v and r^{-1} ∂_θ v from differentiating the polar formula
            let dr = t.sin() - 1.5 * r.sqrt() * (1.5 * t).cos();
            let dt = t.cos() + 1.5 * r.sqrt() * (1.5 * t).sin();
            let (c, s) = (t.cos(), t.sin());
            assert!((g[0] - (dr * c - dt * s)).abs() < 1e-13);
            assert!((g[1] - (dr * s + dt * c)).abs() < 1e-13);
        }
    }

    #[test]
    fn signorini_normal_derivatives() {
        for r in [0.01, 0.2, 0.7] {
            let g = signorini_grad(r, PI);
            assert!((g[1] + 1.5 * r.sqrt()).abs() < 1e-14);
            assert!(signorini_profile(r, PI).abs() < 1e-15);
            assert!(signorini_grad(r, 0.0)[1].abs() < 1e-15);
            assert!((signorini_profile(r, 0.0) - r.powf(1.5)).abs() < 1e-15);
        }
        assert_eq!(signorini_facet(0.3, PI), SignoriniFacet::Contact);
        assert_eq!(signorini_facet(0.3, 0.0), SignoriniFacet::Free);
        assert_eq!(signorini_facet(0.3, 1.0), SignoriniFacet::Interior);
    }

    #[test]
    fn gauss_legendre_integrates_degree_15() {
        let (x, w) = gauss_legendre_8();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }
}

//! Flatness, detachment exponents and the comparison checks of the
//! improvement-of-flatness machinery.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::frequency::least_squares;
use crate::grid::{assemble_stiffness, gradient, CoefficientField, Point, ScalarField};
use crate::linalg::{solve_dirichlet, PcgOptions};
use crate::onephase::FreeBoundarySet;

/// Centre and unit normal direction `e` of the comparison planes `x·e`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Frame {
    pub center: Point,
    pub direction: Point,
}

impl Frame {
    /// A frame at `center` for fields whose thin boundary is known by
    /// construction (synthetic planes and profiles).
    pub fn new(center: Point, direction: Point) -> Result<Self> {
        let n = direction[0].hypot(direction[1]);
        if !(n > 0.0 && n.is_finite()) {
            return Err(LabError::Frame(format!("direction {direction:?} has no length")));
        }
        Ok(Frame {
            center,
            direction: [direction[0] / n, direction[1] / n],
        })
    }

    /// A frame whose centre must lie within `2h` of a point of `∂′Λ`.
    pub fn on_thin_boundary(fb: &FreeBoundarySet, center: Point, direction: Point) -> Result<Self> {
        let h = fb.spacing();
        match fb.nearest_thin_boundary(center) {
            Some(p) if (p[0] - center[0]).hypot(p[1] - center[1]) <= 2.0 * h + 1e-12 => Frame::new(center, direction),
            Some(p) => Err(LabError::Frame(format!(
                "centre ({}, {}) is {:.3}h from the nearest thin boundary point ({}, {})",
                center[0],
                center[1],
                (p[0] - center[0]).hypot(p[1] - center[1]) / h,
                p[0],
                p[1]
            ))),
            None => Err(LabError::Frame("the solution has no thin boundary point".into())),
        }
    }

    fn height(&self, p: Point) -> f64 {
        (p[0] - self.center[0]) * self.direction[0] + (p[1] - self.center[1]) * self.direction[1]
    }

    fn distance(&self, p: Point) -> f64 {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1])
    }
}

/// Normalized mean of `Du` over the positive nodes of `B_r(center)` inside
/// the cone `x_2 - c_2 >= |x_1 - c_1|`.
pub fn nontangential_direction(u: &ScalarField, center: Point, r: f64) -> Result<Point> {
    let (gx, gy) = gradient(u)?;
    let spec = u.spec();
    let mut g = [0.0, 0.0];
    let mut count = 0;
    for k in 0..spec.len() {
        if !u.is_masked(k) || u.at(k) <= 0.0 {
            continue;
        }
        let p = spec.point(k);
        let d = [p[0] - center[0], p[1] - center[1]];
        if d[0].hypot(d[1]) <= r && d[1] >= d[0].abs() {
            g[0] += gx.at(k);
            g[1] += gy.at(k);
            count += 1;
        }
    }
    if count == 0 {
        return Err(LabError::Frame(format!("no positive nodes in the cone of radius {r}")));
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FlatnessRecord {
    pub r: f64,
    /// `max(upper, lower) / r`.
    pub epsilon: f64,
    /// `max (u - x·e)₊` over `B_r⁺`.
    pub upper: f64,
    /// `max (x·e - u)₊` over the closure of `{u > 0}` in `B_r⁺`.
    pub lower: f64,
    pub direction: Point,
}

/// Scale-normalized flatness of `u` on `B_r⁺(center)`.
pub fn measure_flatness(u: &ScalarField, frame: &Frame, r: f64) -> Result<FlatnessRecord> {
    let spec = u.spec();
    let h = spec.spacing;
    if r < 8.0 * h - 1e-12 {
        return Err(LabError::Radius {
            r,
            min: 8.0 * h,
            max: spec.half_width,
        });
    }
    let positive_closure = |k: usize| {
        let (i, j) = spec.ij(k);
        [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .any(|&(di, dj)| spec.index(i + di, j + dj).is_some_and(|q| u.is_masked(q) && u.at(q) > 0.0))
    };
    let (mut upper, mut lower) = (0.0f64, 0.0f64);
    for k in 0..spec.len() {
        if !u.is_masked(k) {
            continue;
        }
        let p = spec.point(k);
        if frame.distance(p) > r {
            continue;
        }
        let plane = frame.height(p);
        upper = upper.max(u.at(k) - plane);
        if positive_closure(k) {
            lower = lower.max(plane - u.at(k));
        }
    }
    Ok(FlatnessRecord {
        r,
        epsilon: upper.max(lower) / r,
        upper,
        lower,
        direction: frame.direction,
    })
}

/// Flatness at each scale with the frame direction recomputed from the
/// nontangential gradient at that scale. The centre is checked against
/// `∂′Λ`.
pub fn flatness_profile(u: &ScalarField, fb: &FreeBoundarySet, center: Point, scales: &[f64]) -> Result<Vec<FlatnessRecord>> {
    scales
        .iter()
        .map(|&r| {
            let e = nontangential_direction(u, center, r)?;
            measure_flatness(u, &Frame::on_thin_boundary(fb, center, e)?, r)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityFit {
    /// `(ln scale, ln deviation)`.
    pub points: Vec<(f64, f64)>,
    pub exponent: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub threshold: f64,
    pub pass: bool,
}

fn fit(points: Vec<(f64, f64)>, threshold: f64) -> RegularityFit {
    let (slope, _, residual) = least_squares(&points);
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).exp();
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).exp();
    RegularityFit {
        points,
        exponent: slope,
        residual,
        window: (lo, hi),
        threshold,
        pass: slope >= threshold,
    }
}

/// Slope `β̂` of `ln ε` against `ln r`; passes when `β̂ >= beta_min`.
pub fn flatness_decay_fit(records: &[FlatnessRecord], beta_min: f64) -> Result<RegularityFit> {
    let pts: Vec<(f64, f64)> = records.iter().filter(|r| r.epsilon > 0.0).map(|r| (r.r.ln(), r.epsilon.ln())).collect();
    if pts.len() < 4 {
        return Err(LabError::Arity {
            what: "flatness decay fit",
            need: 4,
            got: pts.len(),
        });
    }
    Ok(fit(pts, beta_min))
}

/// Exponent below which a detachment is flagged as rougher than `C^{1,1/2}`.
pub const DETACHMENT_THRESHOLD: f64 = 1.4;

/// Fit of `ln(height of F above Z)` against `ln |x₁ - d₁|` over free
/// boundary vertices on the detached side of `detachment` with
/// `|x₁ - d₁| ∈ [8h, r_max]`. `Z` is the axis `{x₂ = 0}`.
pub fn fb_exponent_fit(fb: &FreeBoundarySet, detachment: Point, r_max: f64) -> Result<RegularityFit> {
    let h = fb.spacing();
    let lo = 8.0 * h;
    let side = |sign: f64| -> Vec<(f64, f64)> {
        fb.polylines
            .iter()
            .flatten()
            .filter_map(|p| {
                let s = sign * (p[0] - detachment[0]);
                (s >= lo && s <= r_max && p[1] > 0.0).then(|| (s.ln(), p[1].ln()))
            })
            .collect()
    };
    // the detached side rises above Z; the contact side stays at the level offset
    let (right, left) = (side(1.0), side(-1.0));
    let mean_height = |v: &[(f64, f64)]| v.iter().map(|p| p.1.exp()).sum::<f64>() / v.len().max(1) as f64;
    let pts = if mean_height(&right) >= mean_height(&left) { right } else { left };
    if pts.is_empty() {
        return Err(LabError::Geometry("no free boundary vertices on the detached side".into()));
    }
    if pts.len() < 6 {
        return Err(LabError::Arity {
            what: "detachment exponent fit",
            need: 6,
            got: pts.len(),
        });
    }
    Ok(fit(pts, DETACHMENT_THRESHOLD))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dichotomy {
    UpperImproved,
    LowerImproved,
    Violation,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HarnackReport {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub outcome: Dichotomy,
    /// Largest `θ` for which the upper alternative holds on `B_{r/2}⁺`.
    pub theta_upper: f64,
    pub theta_lower: f64,
}

impl HarnackReport {
    pub fn largest_theta(&self) -> f64 {
        self.theta_upper.max(self.theta_lower).clamp(0.0, 1.0)
    }
}

/// Smallest `(a, b)` with `(x·e + a)₊ >= u >= (x·e - b)₊` on `B_r⁺`.
pub fn measure_trap(u: &ScalarField, frame: &Frame, r: f64) -> (f64, f64) {
    let spec = u.spec();
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for k in (0..spec.len()).filter(|&k| u.is_masked(k)) {
        let p = spec.point(k);
        if frame.distance(p) > r {
            continue;
        }
        let x = frame.height(p);
        if u.at(k) > 0.0 {
            a = a.max(u.at(k) - x);
        }
        b = b.max(x - u.at(k));
    }
    (a, b)
}

/// One step of the Harnack dichotomy: given the trap on `B_r⁺`, test
/// `(x·e + a - θc)₊ >= u` and then `u >= (x·e - b + θc)₊` on `B_{r/2}⁺`,
/// `c = (a + b)/2`.
pub fn harnack_dichotomy_check(u: &ScalarField, frame: &Frame, a: f64, b: f64, r: f64, theta: f64, epsilon0: f64) -> Result<HarnackReport> {
    if !(a > 0.0 && a <= b && b < epsilon0 * r) {
        return Err(LabError::Hypothesis(format!(
            "need 0 < a <= b < ε₀ r, got a = {a}, b = {b}, ε₀ r = {}",
            epsilon0 * r
        )));
    }
    let spec = u.spec();
    let slack = 1e-12 * (1.0 + u.max_abs());
    let nodes = |radius: f64| {
        (0..spec.len()).filter(move |&k| u.is_masked(k) && frame.distance(spec.point(k)) <= radius)
    };
    for k in nodes(r) {
        let x = frame.height(spec.point(k));
        let v = u.at(k);
        if v > (x + a).max(0.0) + slack || v < (x - b).max(0.0) - slack {
            let p = spec.point(k);
            return Err(LabError::Hypothesis(format!(
                "trap (x·e + {a})₊ >= u >= (x·e - {b})₊ fails at ({}, {})",
                p[0], p[1]
            )));
        }
    }
    let c = 0.5 * (a + b);
    let (mut up, mut low) = (f64::INFINITY, f64::INFINITY);
    for k in nodes(0.5 * r) {
        let x = frame.height(spec.point(k));
        let v = u.at(k);
        if v > 0.0 {
            up = up.min((x + a - v) / c);
        }
        low = low.min((v - x + b) / c);
    }
    let outcome = if theta <= up + 1e-12 {
        Dichotomy::UpperImproved
    } else if theta <= low + 1e-12 {
        Dichotomy::LowerImproved
    } else {
        Dichotomy::Violation
    };
    Ok(HarnackReport {
        r,
        a,
        b,
        theta,
        outcome,
        theta_upper: up,
        theta_lower: low,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    pub holds: bool,
    /// First node where `u < ψ_t` during the slide, with its `t`.
    pub touching: Option<(Point, f64)>,
    /// One-sided slope of `u` along `e₂` at the origin.
    pub slope: f64,
    pub q0: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub slide_steps: usize,
}

/// Barrier `φ₀` on `Ω₀ = {1/2 > x₂ > 8ε x₁²} ∩ {|x₁| < 1/2}`: discrete
/// harmonic inside with `φ₀ = x₂ - 8ε x₁²` on the remaining nodes. Returns
/// the values and the mask of interior nodes.
pub fn parabola_barrier(spec_field: &ScalarField, epsilon: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    let spec = *spec_field.spec();
    let mask = spec_field.mask();
    let formula = |p: Point| p[1] - 8.0 * epsilon * p[0] * p[0];
    let free: Vec<bool> = (0..spec.len())
        .map(|k| {
            if !mask[k] {
                return false;
            }
            let p = spec.point(k);
            let (i, j) = spec.ij(k);
            let inside = p[1] < 0.5 && p[1] > 8.0 * epsilon * p[0] * p[0] && p[0].abs() < 0.5;
            inside && [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().all(|&(di, dj)| spec.index(i + di, j + dj).is_some_and(|q| mask[q]))
        })
        .collect();
    let coeff = CoefficientField::identity(spec, mask, |_| 1.0)?;
    let k = assemble_stiffness(&coeff, mask);
    let mut phi: Vec<f64> = (0..spec.len()).map(|k| if mask[k] { formula(spec.point(k)) } else { 0.0 }).collect();
    let stats = solve_dirichlet(
        &k,
        &free,
        &mut phi,
        PcgOptions {
            rel_tol: 1e-12,
            max_iter: 20_000,
            omega: 1.6,
        },
    );
    if !stats.converged {
        return Err(LabError::Degenerate(format!(
            "barrier solve stopped at relative residual {:e} after {} iterations",
            stats.rel_residual, stats.iterations
        )));
    }
    Ok((phi, free))
}

/// Barrier argument for nondegeneracy: with `u > (Q(0) + η)(x₂ - ε)₊` on
/// `B₁⁺`, slide `ψ_t = (1 + η/2) φ₀(· - t e₂)` from `t = ε` to `0` in steps of
/// `h` below `u`, then compare the slope of `u` at the origin with `Q(0)`.
pub fn nondegeneracy_check(u: &ScalarField, q0: f64, eta: f64, epsilon: f64) -> Result<NondegeneracyReport> {
    let spec = *u.spec();
    let h = spec.spacing;
    if spec.half_width < 1.0 - 1e-12 {
        return Err(LabError::Argument(format!("the grid must contain B₁⁺, R = {}", spec.half_width)));
    }
    if !(eta > 0.0 && epsilon >= 0.0) {
        return Err(LabError::Argument(format!("need η > 0 and ε >= 0, got {eta}, {epsilon}")));
    }
    let slack = 1e-12 * (1.0 + u.max_abs());
    for k in (0..spec.len()).filter(|&k| u.is_masked(k)) {
        let p = spec.point(k);
        if p[0].hypot(p[1]) > 1.0 + 1e-12 {
            continue;
        }
        let cone = (q0 + eta) * (p[1] - epsilon).max(0.0);
        let ok = if cone > 0.0 { u.at(k) > cone + slack } else { u.at(k) >= -slack };
        if !ok {
            return Err(LabError::Hypothesis(format!(
                "u > (Q(0) + η)(x₂ - ε)₊ fails at ({}, {}): u = {}, bound = {cone}",
                p[0],
                p[1],
                u.at(k)
            )));
        }
    }
    let (phi, free) = parabola_barrier(u, epsilon)?;
    // nodes of the closed barrier domain: interior nodes and their neighbours
    let closure: Vec<usize> = (0..spec.len())
        .filter(|&k| {
            let (i, j) = spec.ij(k);
            [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| spec.index(i + di, j + dj).is_some_and(|q| free[q]))
        })
        .collect();
    let steps = (epsilon / h).round() as i64;
    let scale = 1.0 + 0.5 * eta;
    let mut touching = None;
    'slide: for s in (0..=steps).rev() {
        for &k in &closure {
            let (i, j) = spec.ij(k);
            let Some(target) = spec.index(i, j + s) else { continue };
            if !u.is_masked(target) {
                continue;
            }
            let psi = scale * phi[k];
            if u.at(target) < psi - slack {
                touching = Some((spec.point(target), s as f64 * h));
                break 'slide;
            }
        }
    }
    let at = |j: i64| spec.index(0, j).filter(|&k| u.is_masked(k)).map(|k| u.at(k));
    let slope = match (at(0), at(1), at(2)) {
        (Some(u0), Some(u1), Some(u2)) => (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h),
        _ => return Err(LabError::Geometry("the origin column is not on the grid".into())),
    };
    Ok(NondegeneracyReport {
        holds: touching.is_none() && slope > q0,
        touching,
        slope,
        q0,
        eta,
        epsilon,
        slide_steps: steps as usize + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;

    fn geo(h: f64) -> DomainGeometry {
        DomainGeometry::half_disk(1.0, h).unwrap()
    }

    #[test]
    fn flatness_of_planes() {
        let g = geo(1.0 / 64.0);
        let frame = Frame::new([0.0, 0.0], [0.0, 2.0]).unwrap();
        let plane = g.field_from_fn(|p| p[1]).unwrap();
        for r in [0.125, 0.5, 1.0] {
            assert_eq!(measure_flatness(&plane, &frame, r).unwrap().epsilon, 0.0);
        }
        let d = 0.1;
        let shifted = g.field_from_fn(|p| (p[1] - d).max(0.0)).unwrap();
        let rec = measure_flatness(&shifted, &frame, 1.0).unwrap();
        assert!((rec.epsilon - d).abs() < 1e-12 && rec.upper == 0.0);
        assert!(measure_flatness(&plane, &frame, 0.05).is_err());
        assert!(Frame::new([0.0, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn decay_fit_controls() {
        let rec = |r: f64, e: f64| FlatnessRecord {
            r,
            epsilon: e,
            upper: e * r,
            lower: 0.0,
            direction: [0.0, 1.0],
        };
        let scales = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let sqrt: Vec<_> = scales.iter().map(|&r| rec(r, r.sqrt())).collect();
        let f = flatness_decay_fit(&sqrt, 0.3).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12 && f.pass);
        let flat: Vec<_> = scales.iter().map(|&r| rec(r, 0.2)).collect();
        let f = flatness_decay_fit(&flat, 0.3).unwrap();
        assert!(f.exponent.abs() < 1e-12 && !f.pass);
        assert!(matches!(flatness_decay_fit(&sqrt[..3], 0.3), Err(LabError::Arity { .. })));
    }

    fn synthetic(h: f64, shape: impl Fn(f64) -> f64) -> FreeBoundarySet {
        let mut line: Vec<Point> = (0..=64).map(|k| [-0.5 + 0.5 * k as f64 / 64.0, 0.0]).collect();
        line.extend((1..=200).map(|k| {
            let x = 0.25 * k as f64 / 200.0;
            [x, shape(x)]
        }));
        FreeBoundarySet::from_polylines(vec![line], h, 0)
    }

    #[test]
    fn exponent_fit_on_synthetic_boundaries() {
        let h = 1.0 / 256.0;
        let f = fb_exponent_fit(&synthetic(h, |x| x.powf(1.5)), [0.0, 0.0], 0.125).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-6 && f.residual < 1e-9 && f.pass);
        let f = fb_exponent_fit(&synthetic(h, |x| x), [0.0, 0.0], 0.125).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-9 && !f.pass);
        let flat = FreeBoundarySet::from_polylines(vec![vec![[-0.5, 0.0], [0.5, 0.0]]], h, 0);
        assert!(matches!(fb_exponent_fit(&flat, [0.0, 0.0], 0.125), Err(LabError::Geometry(_))));
    }

    #[test]
    fn harnack_tie_break_and_extremal_case() {
        let g = geo(1.0 / 64.0);
        let frame = Frame::new([0.0, 0.0], [0.0, 1.0]).unwrap();
        let d = 0.05;
        let plane = g.field_from_fn(|p| p[1]).unwrap();
        let rep = harnack_dichotomy_check(&plane, &frame, d, d, 0.5, 0.01, 0.75).unwrap();
        assert_eq!(rep.outcome, Dichotomy::UpperImproved);
        assert!(rep.theta_lower >= 0.01);
        let low = g.field_from_fn(|p| (p[1] - d).max(0.0)).unwrap();
        let rep = harnack_dichotomy_check(&low, &frame, d, d, 0.5, 0.01, 0.75).unwrap();
        assert_eq!(rep.outcome, Dichotomy::UpperImproved);
        assert!(rep.theta_lower.abs() < 1e-12);
        // precondition failures are hypothesis errors
        assert!(matches!(
            harnack_dichotomy_check(&low, &frame, 0.5 * d, 0.25 * d, 0.5, 0.01, 0.75),
            Err(LabError::Hypothesis(_))
        ));
        assert!(matches!(
            harnack_dichotomy_check(&plane, &frame, d, 0.5, 0.5, 0.01, 0.75),
            Err(LabError::Hypothesis(_))
        ));
    }

    #[test]
    fn nondegeneracy_on_a_steep_plane() {
        let h = 1.0 / 64.0;
        let g = geo(h);
        let eta = 0.2;
        let u = g.field_from_fn(|p| (1.0 + eta) * p[1]).unwrap();
        let rep = nondegeneracy_check(&u, 1.0, eta, h).unwrap();
        assert!(rep.holds && rep.touching.is_none());
        assert!((rep.slope - 1.0 - eta).abs() < 1e-12);
        let cut = g.field_from_fn(|p| (p[1] - h).max(0.0)).unwrap();
        assert!(matches!(nondegeneracy_check(&cut, 1.0, 0.1, h), Err(LabError::Hypothesis(_))));
    }

    #[test]
    fn barrier_is_below_the_plane() {
        let h = 1.0 / 64.0;
        let g = geo(h);
        let f = g.zeros().unwrap();
        let (phi, free) = parabola_barrier(&f, 2.0 * h).unwrap();
        let spec = g.spec();
        for k in (0..spec.len()).filter(|&k| free[k]) {
            let p = spec.point(k);
            assert!(phi[k] <= p[1] + 1e-12 && phi[k] >= -1e-12);
        }
    }
}

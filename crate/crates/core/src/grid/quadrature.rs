use std::f64::consts::PI;

use super::{Point, ScalarField};
use crate::error::{LabError, Result};

/// Integration region used by the quadratures.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    /// Closure of the domain carried by the integrand's mask.
    Domain,
    /// `{u > threshold}` inside the domain of the integrand.
    Positive { field: &'a ScalarField, threshold: f64 },
}

impl<'a> Region<'a> {
    /// Positivity set of `u` with the tie-breaking threshold `1e-12 ‖u‖_∞`.
    pub fn positive(u: &'a ScalarField) -> Self {
        Region::Positive {
            field: u,
            threshold: 1e-12 * u.max_abs(),
        }
    }

    pub fn contains_point(&self, f: &ScalarField, p: Point) -> bool {
        if !f.covers(p) {
            return false;
        }
        match self {
            Region::Domain => true,
            Region::Positive { field, threshold } => {
                field.covers(p) && field.interpolate(p).is_some_and(|v| v > *threshold)
            }
        }
    }

    pub fn contains_node(&self, f: &ScalarField, k: usize) -> bool {
        if !f.is_masked(k) {
            return false;
        }
        match self {
            Region::Domain => true,
            Region::Positive { field, threshold } => field.is_masked(k) && field.at(k) > *threshold,
        }
    }
}

/// Number of circle samples used at radius `r`: `max(64, ⌈2πr/h⌉)`.
pub fn circle_sample_count(r: f64, h: f64) -> usize {
    ((2.0 * PI * r / h).ceil() as usize).max(64)
}

fn check_radius(f: &ScalarField, r: f64) -> Result<()> {
    let h = f.spec().spacing;
    let (min, max) = (2.0 * h, f.spec().half_width - 2.0 * h);
    if !(r >= min - 1e-12 && r <= max + 1e-12) {
        return Err(LabError::Radius { r, min, max });
    }
    Ok(())
}

/// Arc-length trapezoid quadrature of `f` over `∂B_r ∩ region` (centred at
/// the origin). Arcs are located on `M` equispaced samples and their end
/// points refined by bisection before integrating.
pub fn circle_integral(f: &ScalarField, r: f64, region: Region<'_>) -> Result<f64> {
    check_radius(f, r)?;
    let m = circle_sample_count(r, f.spec().spacing);
    let dth = 2.0 * PI / m as f64;
    let at = |th: f64| -> Point { [r * th.cos(), r * th.sin()] };
    let inside: Vec<bool> = (0..m).map(|k| region.contains_point(f, at(k as f64 * dth))).collect();
    let value = |th: f64| -> Result<f64> {
        let p = at(th);
        f.interpolate(p).ok_or_else(|| {
            LabError::Geometry(format!("integrand undefined at ({}, {}) on the circle", p[0], p[1]))
        })
    };
    if inside.iter().all(|&b| b) {
        let mut s = 0.0;
        for k in 0..m {
            s += value(k as f64 * dth)?;
        }
        return Ok(s * r * dth);
    }
    let Some(first_start) = (0..m).find(|&k| inside[k] && !inside[(k + m - 1) % m]) else {
        return Ok(0.0);
    };
    let boundary = |th_in: f64, th_out: f64| -> f64 {
        let (mut a, mut b) = (th_in, th_out);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if region.contains_point(f, at(mid)) {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    };
    let mut total = 0.0;
    let mut k = first_start;
    let mut visited = 0;
    while visited < m {
        if !(inside[k] && !inside[(k + m - 1) % m]) {
            k = (k + 1) % m;
            visited += 1;
            continue;
        }
        // run of inside samples starting at k, sample parameters unwrapped
        let start_th = k as f64 * dth;
        let mut nodes = vec![boundary(start_th, start_th - dth)];
        let mut kk = k;
        let mut th = start_th;
        let mut len = 0;
        while inside[kk] && len < m {
            nodes.push(th);
            kk = (kk + 1) % m;
            th += dth;
            len += 1;
        }
        nodes.push(boundary(th - dth, th));
        let mut vals = Vec::with_capacity(nodes.len());
        for &t in &nodes {
            vals.push(value(t)?);
        }
        for w in 0..nodes.len() - 1 {
            total += 0.5 * (vals[w] + vals[w + 1]) * (nodes[w + 1] - nodes[w]) * r;
        }
        visited += len;
        k = kk;
    }
    Ok(total)
}

/// Midpoint-rule integral of `f` over `B_r ∩ region`. Every cell with four
/// masked corners is weighted by the fraction of its corners inside the
/// region (0, 1/4, 1/2, 3/4 or 1) and contributes `weight · mean(f) · h^2`.
pub fn ball_integral(f: &ScalarField, r: f64, region: Region<'_>) -> Result<f64> {
    check_radius(f, r)?;
    let spec = f.spec();
    let h = spec.spacing;
    let n = spec.cells();
    let reach = (r / h).ceil() as i64 + 1;
    let mut total = 0.0;
    for j in spec.j_min().max(-reach)..(n.min(reach)) {
        for i in (-reach).max(-n)..reach.min(n) {
            let ks = [
                spec.index(i, j),
                spec.index(i + 1, j),
                spec.index(i, j + 1),
                spec.index(i + 1, j + 1),
            ];
            let mut sum = 0.0;
            let mut covered = 0usize;
            let mut all_masked = true;
            for k in ks {
                match k {
                    Some(k) if f.is_masked(k) => {
                        sum += f.at(k);
                        let p = spec.point(k);
                        if p[0].hypot(p[1]) <= r && region.contains_node(f, k) {
                            covered += 1;
                        }
                    }
                    _ => all_masked = false,
                }
            }
            if all_masked && covered > 0 {
                total += covered as f64 / 4.0 * (sum / 4.0) * h * h;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;

    #[test]
    fn half_circle_length() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 64.0).unwrap();
        let one = geo.field_from_fn(|_| 1.0).unwrap();
        for r in [0.1, 0.37, 0.9] {
            let v = circle_integral(&one, r, Region::Domain).unwrap();
            assert!((v / (PI * r) - 1.0).abs() < 1e-3, "r = {r}: {v}");
        }
    }

    #[test]
    fn radius_out_of_range() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 64.0).unwrap();
        let one = geo.field_from_fn(|_| 1.0).unwrap();
        assert!(matches!(circle_integral(&one, 0.01, Region::Domain), Err(LabError::Radius { .. })));
        assert!(matches!(ball_integral(&one, 0.99, Region::Domain), Err(LabError::Radius { .. })));
    }

    #[test]
    fn half_disk_area() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 64.0).unwrap();
        let one = geo.field_from_fn(|_| 1.0).unwrap();
        for r in [0.25, 0.5, 0.9] {
            let v = ball_integral(&one, r, Region::Domain).unwrap();
            let exact = PI * r * r / 2.0;
            assert!(((v - exact) / exact).abs() < 2.0 / 64.0 / r, "r = {r}: {v} vs {exact}");
        }
    }

    #[test]
    fn positive_region_cuts_the_arc() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 64.0).unwrap();
        let one = geo.field_from_fn(|_| 1.0).unwrap();
        // u > 0 on {x1 < 0}: quarter circle
        let u = geo.field_from_fn(|p| (-p[0]).max(0.0)).unwrap();
        let v = circle_integral(&one, 0.5, Region::positive(&u)).unwrap();
        assert!((v - PI * 0.25).abs() < 1e-3, "{v}");
    }
}

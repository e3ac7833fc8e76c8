//! Level-set extraction of `F̄ = ∂{u > 0}` by marching squares and the
//! pointwise free boundary conditions `|Du| = Q` on `F`, `|Du| >= Q` on `Λ`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::OnePhaseSolution;
use crate::error::{LabError, Result};
use crate::grid::{CoefficientField, DomainGeometry, GridSpec, Point, ScalarField};

/// Relative slope deficit below which contact runs are trimmed.
pub const CONTACT_SLOPE_REL_TOL: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FbVertexKind {
    /// Vertex of `F`, the free part of the level set.
    Free,
    /// Vertex on a contact column of `Z`.
    Contact,
}

#[derive(Clone, Debug)]
pub struct FreeBoundarySet {
    pub level: f64,
    /// Connected components of the level set, each ordered along the curve
    /// and oriented with increasing `x1` at its first point.
    pub polylines: Vec<Vec<Point>>,
    /// Vertex kinds, parallel to `polylines`.
    pub kinds: Vec<Vec<FbVertexKind>>,
    /// Contact set `Λ` as a node mask (a subset of the `Z` nodes).
    pub contact: Vec<bool>,
    /// Thin boundary `∂′Λ`: end nodes of maximal contact runs that are not
    /// ends of `Z` itself.
    pub thin_boundary: Vec<usize>,
    spacing: f64,
    thin_points: Vec<Point>,
}

impl FreeBoundarySet {
    pub fn vertices(&self) -> impl Iterator<Item = (Point, FbVertexKind)> + '_ {
        self.polylines
            .iter()
            .zip(&self.kinds)
            .flat_map(|(p, k)| p.iter().copied().zip(k.iter().copied()))
    }

    pub fn free_vertices(&self) -> Vec<Point> {
        self.vertices().filter(|(_, k)| *k == FbVertexKind::Free).map(|(p, _)| p).collect()
    }

    pub fn contact_count(&self) -> usize {
        self.contact.iter().filter(|&&b| b).count()
    }

    pub fn thin_boundary_points(&self) -> &[Point] {
        &self.thin_points
    }

    /// Point of `∂′Λ` closest to `p`.
    pub fn nearest_thin_boundary(&self, p: Point) -> Option<Point> {
        self.thin_points
            .iter()
            .copied()
            .min_by(|a, b| dist(*a, p).total_cmp(&dist(*b, p)))
    }

    /// Shrinks every contact run from its ends while the normal slope at the
    /// end column, `(4u_1 - u_2)/(2h)` above the `Z` node in the metric of
    /// `a`, falls below `(1 - rel_tol) Q`. Near a detachment point the level
    /// set leaves `Z` like a power of the distance, so the height test alone
    /// keeps columns whose slope already reflects the detached branch.
    pub fn trim_contact(&mut self, u: &ScalarField, coeff: &CoefficientField, geometry: &DomainGeometry, rel_tol: f64) {
        let spec = *u.spec();
        let h = spec.spacing;
        let cols = geometry.fixed_columns();
        let deficient = |k: usize| -> bool {
            let (i, j) = spec.ij(k);
            let (Some(k1), Some(k2)) = (spec.index(i, j + 1), spec.index(i, j + 2)) else {
                return false;
            };
            let p = spec.point(k);
            let d = geometry.fixed_boundary().derivative(p[0]);
            let nn = (1.0 + d * d).sqrt();
            let nu = [-d / nn, 1.0 / nn];
            let metric = (coeff.a11.at(k) * nu[0] * nu[0]
                + 2.0 * coeff.a12.at(k) * nu[0] * nu[1]
                + coeff.a22.at(k) * nu[1] * nu[1])
                .sqrt();
            let slope = (-3.0 * u.at(k) + 4.0 * u.at(k1) - u.at(k2)) / (2.0 * h) * nn * metric;
            slope < (1.0 - rel_tol) * coeff.q.at(k)
        };
        let mut removed = Vec::new();
        loop {
            let ends = run_ends(&self.contact, &cols, &spec);
            let drop: Vec<usize> = ends.into_iter().filter(|&k| deficient(k)).collect();
            if drop.is_empty() {
                break;
            }
            for k in drop {
                self.contact[k] = false;
                removed.push(k);
            }
        }
        if removed.is_empty() {
            return;
        }
        let stale: Vec<Point> = removed.iter().map(|&k| spec.point(k)).collect();
        for (line, kinds) in self.polylines.iter().zip(self.kinds.iter_mut()) {
            for (p, kind) in line.iter().zip(kinds.iter_mut()) {
                if *kind == FbVertexKind::Contact && stale.iter().any(|q| (q[0] - p[0]).abs() < 1e-9 * h) {
                    *kind = FbVertexKind::Free;
                }
            }
        }
        self.thin_boundary = run_ends(&self.contact, &cols, &spec);
        self.thin_points = self.thin_boundary.iter().map(|&k| spec.point(k)).collect();
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `(x, y, arc length)` rows for every vertex, components separated by
    /// restarting the arc length at zero.
    pub fn csv_rows(&self) -> Vec<[f64; 3]> {
        let mut rows = Vec::new();
        for line in &self.polylines {
            let mut s = 0.0;
            for (k, p) in line.iter().enumerate() {
                if k > 0 {
                    s += dist(line[k - 1], *p);
                }
                rows.push([p[0], p[1], s]);
            }
        }
        rows
    }

    /// Builds a set from bare polylines (no contact information), e.g. when
    /// reading a polyline CSV back.
    pub fn from_polylines(polylines: Vec<Vec<Point>>, spacing: f64, grid_len: usize) -> Self {
        let kinds = polylines.iter().map(|l| vec![FbVertexKind::Free; l.len()]).collect();
        FreeBoundarySet {
            level: 0.0,
            polylines,
            kinds,
            contact: vec![false; grid_len],
            thin_boundary: Vec::new(),
            spacing,
            thin_points: Vec::new(),
        }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Free boundary of a solver output, extracted at its interface level.
pub fn extract_free_boundary(sol: &OnePhaseSolution, geometry: &DomainGeometry) -> Result<FreeBoundarySet> {
    extract_level_set(&sol.u, geometry, sol.fb_level)
}

/// Marching squares on `{u > level}` (nodes count as inside when
/// `u > max(level, 10^{-12}‖u‖_∞)`). Vertices sit on cell edges at the linear
/// interpolation of `level`; saddle cells are resolved by the cell mean.
pub fn extract_level_set(u: &ScalarField, geometry: &DomainGeometry, level: f64) -> Result<FreeBoundarySet> {
    let spec = *u.spec();
    if !spec.same_lattice(geometry.spec()) {
        return Err(LabError::Geometry("field and geometry live on different grids".into()));
    }
    let thr = level.max(1e-12 * u.max_abs());
    if !u.masked_values().any(|v| v > thr) {
        return Err(LabError::Degenerate("empty positivity set".into()));
    }
    let h = spec.spacing;
    let n = spec.cells();
    let inside = |k: usize| u.at(k) > thr;
    // edge ids: 2k for (i,j)-(i+1,j), 2k+1 for (i,j)-(i,j+1)
    let mut verts: BTreeMap<usize, Point> = BTreeMap::new();
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let crossing = |ka: usize, kb: usize| -> Point {
        let (a, b) = (u.at(ka), u.at(kb));
        let t = if (b - a).abs() > 0.0 { ((level - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        let (pa, pb) = (spec.point(ka), spec.point(kb));
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };
    for j in spec.j_min()..n {
        for i in -n..n {
            let ks = [spec.index(i, j), spec.index(i + 1, j), spec.index(i, j + 1), spec.index(i + 1, j + 1)];
            let Some(ks) = ks.iter().copied().collect::<Option<Vec<usize>>>() else {
                continue;
            };
            if !ks.iter().all(|&k| u.is_masked(k)) {
                continue;
            }
            let [k00, k10, k01, k11] = [ks[0], ks[1], ks[2], ks[3]];
            let s = [inside(k00), inside(k10), inside(k01), inside(k11)];
            // cell edges: bottom, right, top, left
            let edges = [
                (2 * k00, k00, k10, s[0] != s[1]),
                (2 * k10 + 1, k10, k11, s[1] != s[3]),
                (2 * k01, k01, k11, s[2] != s[3]),
                (2 * k00 + 1, k00, k01, s[0] != s[2]),
            ];
            let cut: Vec<usize> = (0..4).filter(|&e| edges[e].3).collect();
            for &e in &cut {
                let (id, a, b, _) = edges[e];
                verts.entry(id).or_insert_with(|| crossing(a, b));
            }
            let mut link = |e1: usize, e2: usize| {
                let (a, b) = (edges[e1].0, edges[e2].0);
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            };
            match cut.len() {
                2 => link(cut[0], cut[1]),
                4 => {
                    let centre = ks.iter().map(|&k| u.at(k)).sum::<f64>() / 4.0 > thr;
                    // corners opposite in sign to the centre are cut off:
                    // 00 by (bottom, left), 10 by (bottom, right),
                    // 01 by (left, top), 11 by (right, top)
                    if s[0] != centre {
                        link(0, 3);
                    }
                    if s[1] != centre {
                        link(0, 1);
                    }
                    if s[2] != centre {
                        link(3, 2);
                    }
                    if s[3] != centre {
                        link(1, 2);
                    }
                }
                _ => {}
            }
        }
    }

    let mut used: BTreeMap<usize, bool> = verts.keys().map(|&k| (k, false)).collect();
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let degree = |v: usize| adj.get(&v).map_or(0, |a| a.len());
    let starts: Vec<usize> = verts
        .keys()
        .copied()
        .filter(|&v| degree(v) != 2)
        .chain(verts.keys().copied().filter(|&v| degree(v) == 2))
        .collect();
    for start in starts {
        if used[&start] {
            continue;
        }
        let mut chain = vec![start];
        used.insert(start, true);
        let mut cur = start;
        loop {
            let next = adj
                .get(&cur)
                .and_then(|a| a.iter().copied().find(|v| !used[v]));
            match next {
                Some(v) => {
                    used.insert(v, true);
                    chain.push(v);
                    cur = v;
                }
                None => break,
            }
        }
        // closed loops end next to their start
        if chain.len() > 2 && adj.get(&cur).is_some_and(|a| a.contains(&start)) {
            chain.push(start);
        }
        chains.push(chain);
    }

    // contact columns: first vertical edge above a Z node, crossing within h/2
    let mut contact = vec![false; spec.len()];
    let cols = geometry.fixed_columns();
    let mut contact_edges = std::collections::BTreeSet::new();
    for &k in &cols {
        if let Some(p) = verts.get(&(2 * k + 1)) {
            if geometry.height_above(*p) <= 0.5 * h {
                contact[k] = true;
                contact_edges.insert(2 * k + 1);
            }
        }
    }
    let thin_boundary = run_ends(&contact, &cols, &spec);

    let mut polylines = Vec::with_capacity(chains.len());
    let mut kinds = Vec::with_capacity(chains.len());
    for mut chain in chains {
        let first = verts[&chain[0]];
        let last = verts[&chain[chain.len() - 1]];
        if (last[0], last[1]) < (first[0], first[1]) {
            chain.reverse();
        }
        kinds.push(
            chain
                .iter()
                .map(|id| if contact_edges.contains(id) { FbVertexKind::Contact } else { FbVertexKind::Free })
                .collect(),
        );
        polylines.push(chain.iter().map(|id| verts[id]).collect());
    }
    let thin_points = thin_boundary.iter().map(|&k| spec.point(k)).collect();
    Ok(FreeBoundarySet {
        level,
        polylines,
        kinds,
        contact,
        thin_boundary,
        spacing: h,
        thin_points,
    })
}

/// End nodes of maximal runs of consecutive contact columns, excluding the
/// ends of `Z` itself.
fn run_ends(contact: &[bool], cols: &[usize], spec: &GridSpec) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut idx = 0;
    while idx < cols.len() {
        if !contact[cols[idx]] {
            idx += 1;
            continue;
        }
        let start = idx;
        while idx + 1 < cols.len()
            && contact[cols[idx + 1]]
            && spec.ij(cols[idx + 1]).0 == spec.ij(cols[idx]).0 + 1
        {
            idx += 1;
        }
        if start > 0 {
            ends.push(cols[start]);
        }
        if idx + 1 < cols.len() {
            ends.push(cols[idx]);
        }
        idx += 1;
    }
    ends.dedup();
    ends
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FbCheck {
    pub point: Point,
    pub kind: FbVertexKind,
    pub normal: Point,
    pub slope: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FbConditionReport {
    pub checks: Vec<FbCheck>,
    /// Vertices skipped because the difference stencil leaves the domain.
    pub skipped: usize,
    pub free_count: usize,
    pub free_mean: f64,
    pub free_max_abs: f64,
    pub free_rms: f64,
    pub contact_count: usize,
    /// `min (s - Q)` over contact vertices.
    pub contact_min: f64,
    pub contact_violations: usize,
    pub tol: f64,
}

impl FbConditionReport {
    pub fn contact_ok(&self) -> bool {
        self.contact_violations == 0
    }
}

/// Nontangential slope `s = (u(p + 2δν) - u(p + δν))/δ`, `δ = 2h`, at every
/// vertex, where `ν` is the polyline normal pointing into `{u > 0}` (the
/// graph normal on contact vertices). The slope is measured in the metric of
/// `a`, `s·(ν^T a ν)^{1/2}`, and compared with `Q` at the vertex.
pub fn check_fb_conditions(
    u: &ScalarField,
    fb: &FreeBoundarySet,
    coeff: &CoefficientField,
    geometry: &DomainGeometry,
    tol: f64,
) -> FbConditionReport {
    let h = u.spec().spacing;
    let delta = 2.0 * h;
    let mut checks = Vec::new();
    let mut skipped = 0;
    for (line, kinds) in fb.polylines.iter().zip(&fb.kinds) {
        for (k, (&p, &kind)) in line.iter().zip(kinds).enumerate() {
            let normal = match kind {
                FbVertexKind::Contact => {
                    let d = geometry.fixed_boundary().derivative(p[0]);
                    let nn = (1.0 + d * d).sqrt();
                    [-d / nn, 1.0 / nn]
                }
                FbVertexKind::Free => {
                    let a = line[k.saturating_sub(1)];
                    let b = line[(k + 1).min(line.len() - 1)];
                    let t = [b[0] - a[0], b[1] - a[1]];
                    let tn = t[0].hypot(t[1]);
                    if tn == 0.0 {
                        skipped += 1;
                        continue;
                    }
                    let nrm = [-t[1] / tn, t[0] / tn];
                    let probe = |s: f64| u.interpolate([p[0] + s * h * nrm[0], p[1] + s * h * nrm[1]]);
                    match (probe(1.0), probe(-1.0)) {
                        (Some(fwd), Some(bwd)) if bwd > fwd => [-nrm[0], -nrm[1]],
                        (Some(_), _) => nrm,
                        (None, Some(_)) => [-nrm[0], -nrm[1]],
                        (None, None) => {
                            skipped += 1;
                            continue;
                        }
                    }
                }
            };
            let p1 = [p[0] + delta * normal[0], p[1] + delta * normal[1]];
            let p2 = [p[0] + 2.0 * delta * normal[0], p[1] + 2.0 * delta * normal[1]];
            if !(u.covers(p1) && u.covers(p2)) {
                skipped += 1;
                continue;
            }
            let (Some(v1), Some(v2), Some(q)) = (u.interpolate(p1), u.interpolate(p2), coeff.q.interpolate(p)) else {
                skipped += 1;
                continue;
            };
            let metric = match (coeff.a11.interpolate(p), coeff.a12.interpolate(p), coeff.a22.interpolate(p)) {
                (Some(a), Some(b), Some(c)) => {
                    (a * normal[0] * normal[0] + 2.0 * b * normal[0] * normal[1] + c * normal[1] * normal[1]).sqrt()
                }
                _ => 1.0,
            };
            checks.push(FbCheck {
                point: p,
                kind,
                normal,
                slope: (v2 - v1) / delta * metric,
                q,
            });
        }
    }
    let free: Vec<f64> = checks.iter().filter(|c| c.kind == FbVertexKind::Free).map(|c| c.slope - c.q).collect();
    let cont: Vec<f64> = checks.iter().filter(|c| c.kind == FbVertexKind::Contact).map(|c| c.slope - c.q).collect();
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    FbConditionReport {
        free_count: free.len(),
        free_mean: mean(&free),
        free_max_abs: free.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        free_rms: mean(&free.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt(),
        contact_count: cont.len(),
        contact_min: cont.iter().copied().fold(f64::INFINITY, f64::min),
        contact_violations: cont.iter().filter(|&&v| v < -tol).count(),
        checks,
        skipped,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;

    #[test]
    fn shifted_plane_gives_a_flat_segment() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 32.0).unwrap();
        let u = geo.field_from_fn(|p| (p[1] - 0.25).max(0.0)).unwrap();
        let fb = extract_level_set(&u, &geo, 0.0).unwrap();
        assert_eq!(fb.polylines.len(), 1);
        assert!(fb.polylines[0].iter().all(|p| (p[1] - 0.25).abs() < 1e-14));
        assert_eq!(fb.contact_count(), 0);
        assert!(fb.thin_boundary.is_empty());
        let first = fb.polylines[0][0];
        let last = *fb.polylines[0].last().unwrap();
        assert_eq!((first[0], last[0]), (-1.0, 1.0));
    }

    #[test]
    fn plane_sticks_to_z() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 16.0).unwrap();
        let u = geo.field_from_fn(|p| p[1]).unwrap();
        let fb = extract_level_set(&u, &geo, 0.0).unwrap();
        assert_eq!(fb.contact_count(), geo.fixed_columns().len());
        assert!(fb.thin_boundary.is_empty());
        assert!(fb.vertices().all(|(_, k)| k == FbVertexKind::Contact));
    }

    #[test]
    fn empty_positivity_is_degenerate() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 16.0).unwrap();
        let u = geo.zeros().unwrap();
        assert!(matches!(extract_level_set(&u, &geo, 0.0), Err(LabError::Degenerate(_))));
    }

    #[test]
    fn circle_is_a_closed_loop() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 32.0).unwrap();
        let u = geo.field_from_fn(|p| 0.2 - p[0].hypot(p[1] - 0.5)).unwrap();
        let fb = extract_level_set(&u, &geo, 0.0).unwrap();
        assert_eq!(fb.polylines.len(), 1);
        let l = &fb.polylines[0];
        assert_eq!(l.first(), l.last());
        for p in l {
            assert!((p[0].hypot(p[1] - 0.5) - 0.2).abs() < 2e-3);
        }
    }

    #[test]
    fn slope_checks_on_planes() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 32.0).unwrap();
        let u = geo.field_from_fn(|p| p[1].max(0.0)).unwrap();
        let fb = extract_level_set(&u, &geo, 0.0).unwrap();
        let one = CoefficientField::identity(*geo.spec(), geo.mask(), |_| 1.0).unwrap();
        let rep = check_fb_conditions(&u, &fb, &one, &geo, 0.1);
        assert!(rep.contact_count > 0 && rep.contact_ok());
        assert!(rep.contact_min.abs() < 1e-12);
        let two = CoefficientField::identity(*geo.spec(), geo.mask(), |_| 2.0).unwrap();
        let rep = check_fb_conditions(&u, &fb, &two, &geo, 0.1);
        assert_eq!(rep.contact_violations, rep.contact_count);
        assert!((rep.contact_min + 1.0).abs() < 1e-12);
    }
}

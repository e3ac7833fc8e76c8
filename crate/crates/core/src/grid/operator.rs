use super::{CoefficientField, ScalarField};
use crate::error::{LabError, Result};
use crate::linalg::CsrMatrix;

/// Nodes of `mask` whose eight neighbours are all inside `mask`.
pub fn interior_mask(spec: &super::GridSpec, mask: &[bool]) -> Vec<bool> {
    (0..spec.len())
        .map(|k| {
            if !mask[k] {
                return false;
            }
            let (i, j) = spec.ij(k);
            (-1..=1).all(|di| (-1..=1).all(|dj| spec.index(i + di, j + dj).is_some_and(|q| mask[q])))
        })
        .collect()
}

/// Stiffness matrix `K` of the discrete Dirichlet energy
/// `E(u) = u^T K u ≈ ∫ a^{ij} ∂_i u ∂_j u`.
///
/// Each cell with four masked corners contributes the average of its two
/// parallel edge differences in each direction (weighted by the cell mean of
/// `a11`/`a22`) and a mixed term `2 a12 ∂_1u ∂_2u` from cell-centred
/// differences. With identity coefficients `K u = -h^2 Δ_h u`, the
/// five-point Laplacian, at every interior node.
pub fn assemble_stiffness(coeff: &CoefficientField, mask: &[bool]) -> CsrMatrix {
    let spec = coeff.spec();
    let n = spec.cells();
    let mut trip = Vec::with_capacity(spec.len() * 12);
    for j in spec.j_min()..n {
        for i in -n..n {
            let ks = [
                spec.index(i, j),
                spec.index(i + 1, j),
                spec.index(i, j + 1),
                spec.index(i + 1, j + 1),
            ];
            let Some(ks) = ks.iter().copied().collect::<Option<Vec<usize>>>() else {
                continue;
            };
            if !ks.iter().all(|&k| mask[k] && coeff.q.is_masked(k)) {
                continue;
            }
            let avg = |f: &ScalarField| ks.iter().map(|&k| f.at(k)).sum::<f64>() / 4.0;
            let a11 = avg(&coeff.a11);
            let a22 = avg(&coeff.a22);
            let a12 = avg(&coeff.a12);
            let mut edge = |a: usize, b: usize, w: f64| {
                trip.push((a, a, w));
                trip.push((b, b, w));
                trip.push((a, b, -w));
                trip.push((b, a, -w));
            };
            let (k00, k10, k01, k11) = (ks[0], ks[1], ks[2], ks[3]);
            edge(k00, k10, 0.5 * a11);
            edge(k01, k11, 0.5 * a11);
            edge(k00, k01, 0.5 * a22);
            edge(k10, k11, 0.5 * a22);
            if a12 != 0.0 {
                let c = [-1.0, 1.0, -1.0, 1.0];
                let d = [-1.0, -1.0, 1.0, 1.0];
                for p in 0..4 {
                    for q in 0..4 {
                        let v = 0.25 * a12 * (c[p] * d[q] + d[p] * c[q]);
                        if v != 0.0 {
                            trip.push((ks[p], ks[q], v));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(spec.len(), trip)
}

/// Divergence-form operator `Lu = ∂_i(a^{ij} ∂_j u)` at interior nodes of
/// the mask of `u`. The result is masked on those interior nodes only.
pub fn apply_operator(u: &ScalarField, coeff: &CoefficientField) -> Result<ScalarField> {
    let spec = *u.spec();
    if !spec.same_lattice(coeff.spec()) {
        return Err(LabError::Geometry("field and coefficients live on different grids".into()));
    }
    let interior = interior_mask(&spec, u.mask());
    if !interior.iter().any(|&b| b) {
        return Err(LabError::Geometry(
            "mask too thin: no node has its full stencil inside the domain".into(),
        ));
    }
    let k = assemble_stiffness(coeff, u.mask());
    let x: Vec<f64> = u.values().iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    let mut y = vec![0.0; spec.len()];
    k.mul_vec(&x, &mut y);
    let h2 = spec.spacing * spec.spacing;
    let vals = y.iter().map(|v| -v / h2).collect();
    ScalarField::new(spec, vals, interior)
}

/// Finite-difference gradient: centred differences where both neighbours
/// are masked, second-order one-sided differences otherwise.
pub fn gradient(u: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let spec = *u.spec();
    let h = spec.spacing;
    let mut gx = vec![f64::NAN; spec.len()];
    let mut gy = vec![f64::NAN; spec.len()];
    for k in 0..spec.len() {
        if !u.is_masked(k) {
            continue;
        }
        let (i, j) = spec.ij(k);
        let dx = directional(u, i, j, 1, 0, h);
        let dy = directional(u, i, j, 0, 1, h);
        match (dx, dy) {
            (Some(a), Some(b)) => {
                gx[k] = a;
                gy[k] = b;
            }
            _ => {
                let p = spec.point(k);
                return Err(LabError::Geometry(format!(
                    "isolated node at ({}, {}): no neighbour for a difference quotient",
                    p[0], p[1]
                )));
            }
        }
    }
    Ok((
        ScalarField::new(spec, gx, u.mask().to_vec())?,
        ScalarField::new(spec, gy, u.mask().to_vec())?,
    ))
}

fn directional(u: &ScalarField, i: i64, j: i64, di: i64, dj: i64, h: f64) -> Option<f64> {
    let c = u.get(i, j)?;
    let f1 = u.get(i + di, j + dj);
    let b1 = u.get(i - di, j - dj);
    match (f1, b1) {
        (Some(f), Some(b)) => Some((f - b) / (2.0 * h)),
        (Some(f), None) => match u.get(i + 2 * di, j + 2 * dj) {
            Some(f2) => Some((-3.0 * c + 4.0 * f - f2) / (2.0 * h)),
            None => Some((f - c) / h),
        },
        (None, Some(b)) => match u.get(i - 2 * di, j - 2 * dj) {
            Some(b2) => Some((3.0 * c - 4.0 * b + b2) / (2.0 * h)),
            None => Some((c - b) / h),
        },
        (None, None) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainGeometry, GridSpec, Shape};

    fn identity(geo: &DomainGeometry) -> CoefficientField {
        CoefficientField::identity(*geo.spec(), geo.mask(), |_| 1.0).unwrap()
    }

    #[test]
    fn operator_annihilates_affine_and_harmonic_quadratics() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 32.0).unwrap();
        let coeff = identity(&geo);
        for f in [
            (|p: [f64; 2]| p[1]) as fn([f64; 2]) -> f64,
            |p| 3.0 * p[0] - 2.0 * p[1] + 0.5,
            |p| p[0] * p[0] - p[1] * p[1],
            |p| p[0] * p[1],
        ] {
            let u = geo.field_from_fn(f).unwrap();
            let lu = apply_operator(&u, &coeff).unwrap();
            assert!(lu.max_abs() < 1e-9, "residual {}", lu.max_abs());
        }
    }

    #[test]
    fn operator_with_constant_mixed_coefficient_is_exact_on_affine() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 16.0).unwrap();
        let spec = *geo.spec();
        let m = geo.mask();
        let coeff = CoefficientField::new(
            ScalarField::constant(spec, m, 1.2).unwrap(),
            ScalarField::constant(spec, m, 0.3).unwrap(),
            ScalarField::constant(spec, m, 0.9).unwrap(),
            ScalarField::constant(spec, m, 1.0).unwrap(),
            2.0,
        )
        .unwrap();
        let u = geo.field_from_fn(|p| 2.0 * p[0] + 5.0 * p[1]).unwrap();
        assert!(apply_operator(&u, &coeff).unwrap().max_abs() < 1e-9);
        // Lu = 2 a12 for u = x1 x2
        let u = geo.field_from_fn(|p| p[0] * p[1]).unwrap();
        let lu = apply_operator(&u, &coeff).unwrap();
        for v in lu.masked_values() {
            assert!((v - 0.6).abs() < 1e-9);
        }
    }

    #[test]
    fn too_thin_mask_is_a_geometry_error() {
        let spec = GridSpec::new(1.0, 1.0 / 16.0, Shape::Box).unwrap();
        let mut mask = vec![false; spec.len()];
        for i in -16..=16 {
            mask[spec.index(i, 0).unwrap()] = true;
            mask[spec.index(i, 1).unwrap()] = true;
        }
        let u = ScalarField::constant(spec, &mask, 1.0).unwrap();
        let full = vec![true; spec.len()];
        let coeff = CoefficientField::identity(spec, &full, |_| 1.0).unwrap();
        assert!(matches!(apply_operator(&u, &coeff), Err(LabError::Geometry(_))));
    }

    #[test]
    fn gradient_exact_on_affine() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 32.0).unwrap();
        let u = geo.field_from_fn(|p| 3.0 * p[0] + 4.0 * p[1]).unwrap();
        let (gx, gy) = gradient(&u).unwrap();
        for k in 0..geo.spec().len() {
            if u.is_masked(k) {
                assert!((gx.at(k) - 3.0).abs() < 1e-9);
                assert!((gy.at(k) - 4.0).abs() < 1e-9);
            }
        }
    }
}

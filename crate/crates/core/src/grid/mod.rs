//! Uniform Cartesian grids, masked scalar fields, domain geometry and
//! variable coefficient data.
//!
//! Nodes sit at `(i h, j h)` with `-n <= i <= n` and `j_min <= j <= n`, where
//! `n = R / h` is the number of cells per radius. Every quantity in the crate
//! is stored node-wise in a [`ScalarField`]; nodes outside the computational
//! domain carry `NaN` and are skipped by every reduction.

mod dump;
mod operator;
mod quadrature;

pub use dump::{read_dump, write_dump};
pub use operator::{apply_operator, assemble_stiffness, gradient, interior_mask};
pub use quadrature::{ball_integral, circle_integral, circle_sample_count, Region};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A point of the plane, `[x1, x2]`.
pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `B_R ∩ {x2 >= 0}` with fixed boundary on the diameter.
    HalfDisk,
    /// `[-R, R] x [0, R]` with fixed boundary on the bottom edge.
    Box,
    /// `B_R ∩ {x2 > g(x1)}` with fixed boundary on the graph of `g`.
    GraphDomain,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::HalfDisk => "half_disk",
            Shape::Box => "box",
            Shape::GraphDomain => "graph_domain",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "half_disk" | "half-disk" => Ok(Shape::HalfDisk),
            "box" => Ok(Shape::Box),
            "graph_domain" | "graph-domain" | "graph" => Ok(Shape::GraphDomain),
            other => Err(LabError::Parse(format!("unknown domain shape `{other}`"))),
        }
    }
}

/// Discretization parameters of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub spacing: f64,
    pub shape: Shape,
}

impl GridSpec {
    pub const MIN_CELLS_PER_RADIUS: i64 = 16;

    pub fn new(half_width: f64, spacing: f64, shape: Shape) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(LabError::Geometry(format!("grid spacing must be positive, got {spacing}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(LabError::Geometry(format!("half width must be positive, got {half_width}")));
        }
        let ratio = half_width / spacing;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-6 * ratio.max(1.0) {
            return Err(LabError::Geometry(format!(
                "R/h = {ratio} is not an integer number of cells"
            )));
        }
        if (n as i64) < Self::MIN_CELLS_PER_RADIUS {
            return Err(LabError::Geometry(format!(
                "R/h = {n} is below the minimum of {} cells per radius",
                Self::MIN_CELLS_PER_RADIUS
            )));
        }
        Ok(GridSpec {
            half_width,
            spacing,
            shape,
        })
    }

    /// Number of cells per radius.
    pub fn cells(&self) -> i64 {
        (self.half_width / self.spacing).round() as i64
    }

    pub fn j_min(&self) -> i64 {
        match self.shape {
            Shape::GraphDomain => -self.cells(),
            Shape::HalfDisk | Shape::Box => 0,
        }
    }

    pub fn nx(&self) -> usize {
        (2 * self.cells() + 1) as usize
    }

    pub fn ny(&self) -> usize {
        (self.cells() - self.j_min() + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        let n = self.cells();
        if i < -n || i > n || j < self.j_min() || j > n {
            return None;
        }
        Some((i + n) as usize + self.nx() * (j - self.j_min()) as usize)
    }

    pub fn ij(&self, k: usize) -> (i64, i64) {
        let nx = self.nx();
        ((k % nx) as i64 - self.cells(), (k / nx) as i64 + self.j_min())
    }

    /// Node coordinates, exactly `(i h, j h)`.
    pub fn point(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        [i as f64 * self.spacing, j as f64 * self.spacing]
    }

    /// Lower-left node of the cell containing `p` together with the local
    /// coordinates in `[0, 1]^2`. Points on the top/right edge of the lattice
    /// are attached to the last cell.
    pub fn locate(&self, p: Point) -> Option<(i64, i64, f64, f64)> {
        let h = self.spacing;
        let n = self.cells();
        let fx = p[0] / h;
        let fy = p[1] / h;
        if !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let tol = 1e-9;
        if fx < -(n as f64) - tol || fx > n as f64 + tol {
            return None;
        }
        if fy < self.j_min() as f64 - tol || fy > n as f64 + tol {
            return None;
        }
        let i = (fx.floor() as i64).clamp(-n, n - 1);
        let j = (fy.floor() as i64).clamp(self.j_min(), n - 1);
        let s = (fx - i as f64).clamp(0.0, 1.0);
        let t = (fy - j as f64).clamp(0.0, 1.0);
        Some((i, j, s, t))
    }

    /// Whether two specs describe the same lattice.
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self.shape == other.shape
            && self.cells() == other.cells()
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
    }

    fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(LabError::Geometry("fields live on different grids".into()))
        }
    }
}

/// Node-wise real values with a domain mask. Unmasked nodes hold `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, mut values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != spec.len() || mask.len() != spec.len() {
            return Err(LabError::Geometry(format!(
                "field storage has {} values / {} mask entries for a grid of {} nodes",
                values.len(),
                mask.len(),
                spec.len()
            )));
        }
        for (k, (v, &m)) in values.iter_mut().zip(&mask).enumerate() {
            if m {
                if !v.is_finite() {
                    let p = spec.point(k);
                    return Err(LabError::Geometry(format!(
                        "non-finite value {v} at masked node ({}, {})",
                        p[0], p[1]
                    )));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(ScalarField { spec, values, mask })
    }

    pub fn from_fn(spec: GridSpec, mask: &[bool], f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..spec.len())
            .map(|k| if mask[k] { f(spec.point(k)) } else { f64::NAN })
            .collect();
        ScalarField::new(spec, values, mask.to_vec())
    }

    pub fn constant(spec: GridSpec, mask: &[bool], c: f64) -> Result<Self> {
        ScalarField::from_fn(spec, mask, |_| c)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.mask[k]
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn get(&self, i: i64, j: i64) -> Option<f64> {
        let k = self.spec.index(i, j)?;
        self.mask[k].then(|| self.values[k])
    }

    pub fn masked_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .filter_map(|(&v, &m)| m.then_some(v))
    }

    pub fn max_abs(&self) -> f64 {
        self.masked_values().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.masked_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.masked_values().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise map over masked nodes; `f` receives the node position.
    pub fn map(&self, f: impl Fn(Point, f64) -> f64) -> Result<Self> {
        let values = (0..self.spec.len())
            .map(|k| {
                if self.mask[k] {
                    f(self.spec.point(k), self.values[k])
                } else {
                    f64::NAN
                }
            })
            .collect();
        ScalarField::new(self.spec, values, self.mask.clone())
    }

    /// Pointwise combination of two fields on the intersection of their masks.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        let mask: Vec<bool> = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        let values = (0..self.spec.len())
            .map(|k| if mask[k] { f(self.values[k], other.values[k]) } else { f64::NAN })
            .collect();
        ScalarField::new(self.spec, values, mask)
    }

    /// Bilinear interpolation. Cells with missing corners use the
    /// renormalized weights of the masked corners; `None` when the point is
    /// off the lattice or no corner is masked.
    pub fn interpolate(&self, p: Point) -> Option<f64> {
        let (i, j, s, t) = self.spec.locate(p)?;
        let corners = [
            (i, j, (1.0 - s) * (1.0 - t)),
            (i + 1, j, s * (1.0 - t)),
            (i, j + 1, (1.0 - s) * t),
            (i + 1, j + 1, s * t),
        ];
        let mut acc = 0.0;
        let mut wsum = 0.0;
        let mut full = true;
        for (ci, cj, w) in corners {
            match self.spec.index(ci, cj) {
                Some(k) if self.mask[k] => {
                    acc += w * self.values[k];
                    wsum += w;
                }
                _ => full = false,
            }
        }
        if full {
            Some(acc)
        } else if wsum > 1e-12 {
            Some(acc / wsum)
        } else {
            None
        }
    }

    /// Whether `p` lies in the closure of a cell whose four corners are masked.
    pub fn covers(&self, p: Point) -> bool {
        let Some((i, j, s, t)) = self.spec.locate(p) else {
            return false;
        };
        let cell_ok = |ci: i64, cj: i64| -> bool {
            [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)]
                .iter()
                .all(|&(a, b)| self.spec.index(a, b).is_some_and(|k| self.mask[k]))
        };
        if cell_ok(i, j) {
            return true;
        }
        // Points on a shared edge or corner belong to every adjacent cell.
        let eps = 1e-9;
        let is = if s < eps { vec![i - 1, i] } else if s > 1.0 - eps { vec![i, i + 1] } else { vec![i] };
        let js = if t < eps { vec![j - 1, j] } else if t > 1.0 - eps { vec![j, j + 1] } else { vec![j] };
        is.iter().any(|&a| js.iter().any(|&b| cell_ok(a, b)))
    }

    /// Restrict the mask; values outside the new mask become `NaN`.
    pub fn restrict(&self, mask: &[bool]) -> Result<Self> {
        let m: Vec<bool> = self.mask.iter().zip(mask).map(|(a, b)| *a && *b).collect();
        ScalarField::new(self.spec, self.values.clone(), m)
    }
}

/// Polynomial graph `g(x1) = Σ c_k x1^k` describing the fixed boundary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + k as f64 * c)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

/// Sampled `C^{1,alpha}` data of the fixed boundary graph.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GraphNorm {
    pub sup: f64,
    pub sup_derivative: f64,
    pub holder_seminorm: f64,
    pub norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    /// Unknown node: all eight neighbours are in the domain.
    Interior,
    /// Node on the fixed boundary `Z` (value pinned to zero / thin boundary).
    Fixed,
    /// Outer Dirichlet node.
    Boundary,
}

/// Computational domain with its fixed boundary `Z`.
#[derive(Clone, Debug)]
pub struct DomainGeometry {
    spec: GridSpec,
    fixed_boundary: Polynomial,
    kinds: Vec<NodeKind>,
    mask: Vec<bool>,
}

impl DomainGeometry {
    pub fn new(spec: GridSpec, fixed_boundary: Polynomial) -> Result<Self> {
        if spec.shape != Shape::GraphDomain && !fixed_boundary.is_zero() {
            return Err(LabError::Geometry(format!(
                "shape {} has a flat fixed boundary; use graph_domain for a curved one",
                spec.shape.as_str()
            )));
        }
        let n = spec.cells();
        let h = spec.spacing;
        let mut mask = vec![false; spec.len()];
        let mut fixed = vec![false; spec.len()];
        for (k, m) in mask.iter_mut().enumerate() {
            let (i, j) = spec.ij(k);
            let [x1, x2] = spec.point(k);
            let in_disk = i * i + j * j <= n * n;
            match spec.shape {
                Shape::HalfDisk => {
                    *m = in_disk && j >= 0;
                    fixed[k] = *m && j == 0;
                }
                Shape::Box => {
                    *m = true;
                    fixed[k] = j == 0;
                }
                Shape::GraphDomain => {
                    let g = fixed_boundary.eval(x1);
                    *m = in_disk && x2 > g - h;
                    fixed[k] = *m && x2 <= g;
                }
            }
        }
        // drop dangling nodes that are not a corner of any complete cell
        let full_cell = |i: i64, j: i64| {
            [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
                .iter()
                .all(|&(a, b)| spec.index(a, b).is_some_and(|q| mask[q]))
        };
        let keep: Vec<bool> = (0..spec.len())
            .map(|k| {
                let (i, j) = spec.ij(k);
                mask[k] && [(i, j), (i - 1, j), (i, j - 1), (i - 1, j - 1)].iter().any(|&(a, b)| full_cell(a, b))
            })
            .collect();
        for k in 0..spec.len() {
            mask[k] = keep[k];
            fixed[k] &= keep[k];
        }
        let kinds = (0..spec.len())
            .map(|k| {
                if !mask[k] {
                    NodeKind::Outside
                } else if fixed[k] {
                    NodeKind::Fixed
                } else {
                    let (i, j) = spec.ij(k);
                    let all = (-1..=1).all(|di| {
                        (-1..=1).all(|dj| spec.index(i + di, j + dj).is_some_and(|q| mask[q]))
                    });
                    if all {
                        NodeKind::Interior
                    } else {
                        NodeKind::Boundary
                    }
                }
            })
            .collect::<Vec<_>>();
        if !kinds.contains(&NodeKind::Interior) {
            return Err(LabError::Geometry("domain has no interior nodes".into()));
        }
        Ok(DomainGeometry {
            spec,
            fixed_boundary,
            kinds,
            mask,
        })
    }

    pub fn half_disk(half_width: f64, spacing: f64) -> Result<Self> {
        DomainGeometry::new(GridSpec::new(half_width, spacing, Shape::HalfDisk)?, Polynomial::zero())
    }

    pub fn rectangle(half_width: f64, spacing: f64) -> Result<Self> {
        DomainGeometry::new(GridSpec::new(half_width, spacing, Shape::Box)?, Polynomial::zero())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn fixed_boundary(&self) -> &Polynomial {
        &self.fixed_boundary
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn graph_height(&self, x1: f64) -> f64 {
        self.fixed_boundary.eval(x1)
    }

    /// Vertical distance of `p` above the fixed boundary.
    pub fn height_above(&self, p: Point) -> f64 {
        p[1] - self.graph_height(p[0])
    }

    /// Fixed-boundary nodes having a domain node directly above them, ordered
    /// by `i`. These carry the contact set and the thin boundary.
    pub fn fixed_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = (0..self.spec.len())
            .filter(|&k| {
                if self.kinds[k] != NodeKind::Fixed {
                    return false;
                }
                let (i, j) = self.spec.ij(k);
                self.spec
                    .index(i, j + 1)
                    .is_some_and(|q| self.mask[q] && self.kinds[q] != NodeKind::Fixed)
            })
            .collect();
        cols.sort_by_key(|&k| self.spec.ij(k).0);
        cols
    }

    pub fn field_from_fn(&self, f: impl Fn(Point) -> f64) -> Result<ScalarField> {
        ScalarField::from_fn(self.spec, &self.mask, f)
    }

    pub fn zeros(&self) -> Result<ScalarField> {
        ScalarField::constant(self.spec, &self.mask, 0.0)
    }

    /// Sampled `C^{1,1/2+sigma}` norm of the graph over `[-R, R]`, using the
    /// convention `sup|g| + sup|g'| + [g']_{1/2+sigma}`.
    pub fn graph_norm(&self, sigma: f64) -> GraphNorm {
        let r = self.spec.half_width;
        let m = 400;
        let xs: Vec<f64> = (0..=m).map(|k| -r + 2.0 * r * k as f64 / m as f64).collect();
        let g = &self.fixed_boundary;
        let sup = xs.iter().fold(0.0f64, |a, &x| a.max(g.eval(x).abs()));
        let sup_d = xs.iter().fold(0.0f64, |a, &x| a.max(g.derivative(x).abs()));
        let alpha = 0.5 + sigma;
        let mut semi = 0.0f64;
        for (a, &xa) in xs.iter().enumerate() {
            for &xb in &xs[a + 1..] {
                let q = (g.derivative(xb) - g.derivative(xa)).abs() / (xb - xa).powf(alpha);
                semi = semi.max(q);
            }
        }
        GraphNorm {
            sup,
            sup_derivative: sup_d,
            holder_seminorm: semi,
            norm: sup + sup_d + semi,
        }
    }

    /// Checks `g(0) = 0`, `g'(0) = 0` and the norm bound.
    pub fn validate_graph(&self, sigma: f64) -> Result<GraphNorm> {
        let g = &self.fixed_boundary;
        if g.eval(0.0).abs() > 1e-14 || g.derivative(0.0).abs() > 1e-14 {
            return Err(LabError::Geometry("fixed boundary must satisfy g(0) = 0 and g'(0) = 0".into()));
        }
        let norm = self.graph_norm(sigma);
        if norm.norm > 1.0 + 1e-12 {
            return Err(LabError::Geometry(format!(
                "fixed boundary norm {} exceeds 1",
                norm.norm
            )));
        }
        Ok(norm)
    }
}

/// Divergence-form coefficients `a^{ij}` and the free boundary datum `Q`.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub a11: ScalarField,
    pub a12: ScalarField,
    pub a22: ScalarField,
    pub q: ScalarField,
    pub ellipticity: f64,
    /// Hölder exponent of the coefficients, carried as metadata.
    pub holder_alpha: Option<f64>,
}

impl CoefficientField {
    pub fn new(
        a11: ScalarField,
        a12: ScalarField,
        a22: ScalarField,
        q: ScalarField,
        ellipticity: f64,
    ) -> Result<Self> {
        let c = CoefficientField {
            a11,
            a12,
            a22,
            q,
            ellipticity,
            holder_alpha: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Identity coefficients with the given `Q`.
    pub fn identity(spec: GridSpec, mask: &[bool], q: impl Fn(Point) -> f64) -> Result<Self> {
        CoefficientField::new(
            ScalarField::constant(spec, mask, 1.0)?,
            ScalarField::constant(spec, mask, 0.0)?,
            ScalarField::constant(spec, mask, 1.0)?,
            ScalarField::from_fn(spec, mask, q)?,
            1.0,
        )
    }

    pub fn spec(&self) -> &GridSpec {
        self.q.spec()
    }

    pub fn validate(&self) -> Result<()> {
        let lam = self.ellipticity;
        if !(lam >= 1.0) {
            return Err(LabError::Geometry(format!("ellipticity must be >= 1, got {lam}")));
        }
        let spec = self.q.spec();
        for f in [&self.a11, &self.a12, &self.a22] {
            spec.check_same(f.spec())?;
        }
        for k in 0..spec.len() {
            if !self.q.is_masked(k) {
                continue;
            }
            if !(self.a11.is_masked(k) && self.a12.is_masked(k) && self.a22.is_masked(k)) {
                return Err(LabError::Geometry("coefficient masks disagree".into()));
            }
            let (a, b, d) = (self.a11.at(k), self.a12.at(k), self.a22.at(k));
            // eigenvalues of the symmetric 2x2 matrix
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            let (lo, hi) = (mean - rad, mean + rad);
            if lo < 1.0 / lam - 1e-12 || hi > lam + 1e-12 {
                let p = spec.point(k);
                return Err(LabError::Geometry(format!(
                    "coefficients not uniformly elliptic at ({}, {}): eigenvalues {lo}, {hi}",
                    p[0], p[1]
                )));
            }
            if !(self.q.at(k) > 0.0) {
                let p = spec.point(k);
                return Err(LabError::Geometry(format!("Q must be positive, got {} at ({}, {})", self.q.at(k), p[0], p[1])));
            }
        }
        Ok(())
    }

    pub fn q_min(&self) -> f64 {
        self.q.min()
    }

    pub fn q_max(&self) -> f64 {
        self.q.max()
    }

    /// `sup|a^{ij} - δ^{ij}| + sup|Q - 1|`, the sup-norm part of the
    /// smallness hypothesis on the data.
    pub fn smallness(&self) -> f64 {
        let dev = |f: &ScalarField, target: f64| f.masked_values().fold(0.0f64, |m, v| m.max((v - target).abs()));
        dev(&self.a11, 1.0).max(dev(&self.a22, 1.0)).max(dev(&self.a12, 0.0)) + dev(&self.q, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_coarse_grids() {
        assert!(GridSpec::new(1.0, 1.0 / 8.0, Shape::HalfDisk).is_err());
        assert!(GridSpec::new(1.0, 0.0, Shape::HalfDisk).is_err());
        assert!(GridSpec::new(1.0, 0.3, Shape::HalfDisk).is_err());
        assert!(GridSpec::new(1.0, 1.0 / 16.0, Shape::HalfDisk).is_ok());
    }

    #[test]
    fn node_coordinates_are_integer_multiples() {
        let spec = GridSpec::new(0.5, 1.0 / 64.0, Shape::HalfDisk).unwrap();
        for k in [0, 17, spec.len() - 1] {
            let (i, j) = spec.ij(k);
            assert_eq!(spec.point(k), [i as f64 / 64.0, j as f64 / 64.0]);
            assert_eq!(spec.index(i, j), Some(k));
        }
    }

    #[test]
    fn half_disk_classification() {
        let geo = DomainGeometry::half_disk(1.0, 1.0 / 16.0).unwrap();
        let spec = geo.spec();
        assert_eq!(geo.kind(spec.index(0, 0).unwrap()), NodeKind::Fixed);
        assert_eq!(geo.kind(spec.index(0, 1).unwrap()), NodeKind::Interior);
        assert_eq!(geo.kind(spec.index(0, 15).unwrap()), NodeKind::Boundary);
        // the apex and the diameter tips belong to no complete cell
        assert_eq!(geo.kind(spec.index(0, 16).unwrap()), NodeKind::Outside);
        assert_eq!(geo.kind(spec.index(16, 0).unwrap()), NodeKind::Outside);
        assert_eq!(geo.kind(spec.index(16, 1).unwrap()), NodeKind::Outside);
        let cols = geo.fixed_columns();
        assert_eq!(cols.len(), 31);
    }

    #[test]
    fn bilinear_interpolation_is_exact_on_bilinear_functions() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 16.0).unwrap();
        let f = geo.field_from_fn(|p| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1]).unwrap();
        let p = [0.123, 0.456];
        let v = f.interpolate(p).unwrap();
        assert!((v - (1.0 + 0.246 - 0.456 + 3.0 * 0.123 * 0.456)).abs() < 1e-13);
    }

    #[test]
    fn graph_validation() {
        let spec = GridSpec::new(1.0, 1.0 / 32.0, Shape::GraphDomain).unwrap();
        let ok = DomainGeometry::new(spec, Polynomial::new(vec![0.0, 0.0, 0.1])).unwrap();
        assert!(ok.validate_graph(0.1).is_ok());
        let tilted = DomainGeometry::new(spec, Polynomial::new(vec![0.0, 0.2])).unwrap();
        assert!(tilted.validate_graph(0.1).is_err());
        let steep = DomainGeometry::new(spec, Polynomial::new(vec![0.0, 0.0, 2.0])).unwrap();
        assert!(steep.validate_graph(0.1).is_err());
    }

    #[test]
    fn ellipticity_violation_is_reported() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 16.0).unwrap();
        let spec = *geo.spec();
        let m = geo.mask();
        let bad = CoefficientField::new(
            ScalarField::constant(spec, m, 3.0).unwrap(),
            ScalarField::constant(spec, m, 0.0).unwrap(),
            ScalarField::constant(spec, m, 1.0).unwrap(),
            ScalarField::constant(spec, m, 1.0).unwrap(),
            2.0,
        );
        assert!(bad.is_err());
        let q_bad = CoefficientField::identity(spec, m, |_| 0.0);
        assert!(q_bad.is_err());
    }
}

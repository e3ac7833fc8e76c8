//! The thin obstacle problem on the upper half-disk:
//! `Δw = 0` in `B_R⁺`, `w >= ψ` on the diameter, `∂_{x2} w <= 0` there with
//! equality where `w > ψ`, and `w` prescribed on the arc.
//!
//! The discrete problem minimizes the cell-based Dirichlet energy over the
//! convex set `{w >= ψ}` by projected SOR with symmetric (forward, then
//! backward) sweeps. On the diameter the stiffness row reduces to the
//! reflected stencil `(w_{i-1} + w_{i+1} + 2 w_{i,1}) / 4`. Grids with an
//! even number of cells are warm-started from the `2h` solution.

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{LabError, Result};
use crate::grid::{assemble_stiffness, CoefficientField, DomainGeometry, GridSpec, NodeKind, Point, ScalarField, Shape};
use crate::linalg::CsrMatrix;

const WARM_START_MIN_CELLS: i64 = 32;

#[derive(Clone, Debug)]
pub struct SignoriniProblem {
    pub geometry: DomainGeometry,
    /// Used on the Dirichlet nodes only; must be masked on the whole domain
    /// so that the problem can be restricted to coarser lattices.
    pub boundary_data: ScalarField,
    /// Obstacle level per node; read on the thin nodes only.
    pub obstacle: ScalarField,
}

/// Role of a node in the relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Outside,
    Dirichlet,
    Free,
    Thin,
}

impl SignoriniProblem {
    pub fn new(spec: GridSpec, data: impl Fn(Point) -> f64) -> Result<Self> {
        if !matches!(spec.shape, Shape::HalfDisk | Shape::Box) {
            return Err(LabError::Geometry("the thin obstacle problem needs a flat diameter (half_disk or box)".into()));
        }
        let geometry = DomainGeometry::new(spec, crate::grid::Polynomial::zero())?;
        let boundary_data = geometry.field_from_fn(data)?;
        let obstacle = geometry.zeros()?;
        SignoriniProblem::from_fields(geometry, boundary_data, obstacle)
    }

    pub fn from_fields(geometry: DomainGeometry, boundary_data: ScalarField, obstacle: ScalarField) -> Result<Self> {
        let spec = geometry.spec();
        if !spec.same_lattice(boundary_data.spec()) || !spec.same_lattice(obstacle.spec()) {
            return Err(LabError::Geometry("problem data live on different grids".into()));
        }
        for k in 0..spec.len() {
            if geometry.kind(k) == NodeKind::Outside {
                continue;
            }
            if !boundary_data.is_masked(k) {
                return Err(LabError::Geometry("boundary data must cover the domain".into()));
            }
            if geometry.kind(k) == NodeKind::Fixed && !obstacle.is_masked(k) {
                return Err(LabError::Geometry("obstacle missing on the diameter".into()));
            }
        }
        Ok(SignoriniProblem {
            geometry,
            boundary_data,
            obstacle,
        })
    }

    /// Replace the obstacle by `ψ(x1)`.
    pub fn with_obstacle(mut self, psi: impl Fn(f64) -> f64) -> Result<Self> {
        self.obstacle = self.geometry.field_from_fn(|p| psi(p[0]))?;
        Ok(self)
    }

    fn roles(&self) -> Vec<Role> {
        let geo = &self.geometry;
        let spec = geo.spec();
        let masked = |i: i64, j: i64| spec.index(i, j).is_some_and(|q| geo.mask()[q]);
        (0..spec.len())
            .map(|k| match geo.kind(k) {
                NodeKind::Outside => Role::Outside,
                NodeKind::Interior => Role::Free,
                NodeKind::Boundary => Role::Dirichlet,
                NodeKind::Fixed => {
                    let (i, j) = spec.ij(k);
                    if masked(i - 1, j) && masked(i + 1, j) && masked(i, j + 1) {
                        Role::Thin
                    } else {
                        Role::Dirichlet
                    }
                }
            })
            .collect()
    }

    /// Nodes of the diameter carrying the constraint, ordered by `x1`.
    pub fn thin_nodes(&self) -> Vec<usize> {
        self.roles()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Role::Thin)
            .map(|(k, _)| k)
            .collect()
    }

    /// The problem injected onto the `2h` lattice.
    fn coarsen(&self) -> Option<SignoriniProblem> {
        let fine = *self.geometry.spec();
        let cells = fine.cells();
        if cells % 2 != 0 || cells / 2 < WARM_START_MIN_CELLS {
            return None;
        }
        let spec = GridSpec::new(fine.half_width, 2.0 * fine.spacing, fine.shape).ok()?;
        let geo = DomainGeometry::new(spec, crate::grid::Polynomial::zero()).ok()?;
        let inject = |f: &ScalarField| -> Option<ScalarField> {
            let values = (0..spec.len())
                .map(|k| {
                    let (i, j) = spec.ij(k);
                    fine.index(2 * i, 2 * j).map_or(f64::NAN, |q| f.at(q))
                })
                .collect();
            ScalarField::new(spec, values, geo.mask().to_vec()).ok()
        };
        SignoriniProblem::from_fields(geo.clone(), inject(&self.boundary_data)?, inject(&self.obstacle)?).ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThinNode {
    pub x: f64,
    pub w: f64,
    pub obstacle: f64,
    /// `λ = -∂_{x2} w`.
    pub multiplier: f64,
    pub contact: bool,
}

#[derive(Clone, Debug)]
pub struct SignoriniSolution {
    pub w: ScalarField,
    pub thin: Vec<ThinNode>,
    /// Sweeps on the finest lattice.
    pub iterations: usize,
    /// Largest pointwise update of every sweep on the finest lattice.
    pub update_history: Vec<f64>,
    pub coarse_levels: usize,
}

impl SignoriniSolution {
    pub fn contact_points(&self) -> Vec<f64> {
        self.thin.iter().filter(|t| t.contact).map(|t| t.x).collect()
    }

    /// Dirichlet energy `∫|Dw|^2` of the discrete solution.
    pub fn dirichlet_energy(&self) -> Result<f64> {
        let coeff = CoefficientField::identity(*self.w.spec(), self.w.mask(), |_| 1.0)?;
        Ok(crate::onephase::dirichlet_energy(&self.w, &coeff))
    }

    pub fn contact_csv(&self) -> String {
        let mut s = String::from("x,w,obstacle,multiplier,contact\n");
        for t in &self.thin {
            s.push_str(&format!("{},{},{},{},{}\n", t.x, t.w, t.obstacle, t.multiplier, u8::from(t.contact)));
        }
        s
    }
}

pub fn solve_signorini(problem: &SignoriniProblem, cfg: &SolverConfig) -> Result<SignoriniSolution> {
    if !(cfg.omega > 0.0 && cfg.omega < 2.0) {
        return Err(LabError::Config(format!("solver.omega must lie in (0, 2), got {}", cfg.omega)));
    }
    let geo = &problem.geometry;
    let spec = *geo.spec();
    let n = spec.len();
    let roles = problem.roles();
    let coeff = CoefficientField::identity(spec, geo.mask(), |_| 1.0)?;
    let k = assemble_stiffness(&coeff, geo.mask());
    let psi: Vec<f64> = (0..n).map(|i| if roles[i] == Role::Thin { problem.obstacle.at(i) } else { 0.0 }).collect();

    let mut w: Vec<f64> = (0..n)
        .map(|i| match roles[i] {
            Role::Dirichlet => problem.boundary_data.at(i),
            Role::Thin => psi[i],
            _ => 0.0,
        })
        .collect();
    let mut coarse_levels = 0;
    if let Some(coarse) = problem.coarsen() {
        let sol = solve_signorini(&coarse, cfg)?;
        for i in 0..n {
            if matches!(roles[i], Role::Free | Role::Thin) {
                if let Some(v) = sol.w.interpolate(spec.point(i)) {
                    w[i] = v;
                }
                if roles[i] == Role::Thin {
                    w[i] = w[i].max(psi[i]);
                }
            }
        }
        coarse_levels = sol.coarse_levels + 1;
    }

    let order: Vec<usize> = (0..n).filter(|&i| matches!(roles[i], Role::Free | Role::Thin)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        if iterations >= cfg.vi_max_iters {
            return Err(LabError::ViNonConvergence {
                iterations,
                last_update: history.last().copied().unwrap_or(f64::INFINITY),
                residual_history: history,
            });
        }
        let mut delta = 0.0f64;
        for &i in order.iter().chain(order.iter().rev()) {
            delta = delta.max(relax(&k, &roles, &psi, cfg.omega, i, &mut w));
        }
        iterations += 1;
        history.push(delta);
        if delta < cfg.vi_tol {
            break;
        }
    }

    let h = spec.spacing;
    let mut kw = vec![0.0; n];
    k.mul_vec(&w, &mut kw);
    let thin = (0..n)
        .filter(|&i| roles[i] == Role::Thin)
        .map(|i| ThinNode {
            x: spec.point(i)[0],
            w: w[i],
            obstacle: psi[i],
            multiplier: kw[i] / h,
            contact: w[i] <= psi[i],
        })
        .collect();
    Ok(SignoriniSolution {
        w: ScalarField::new(spec, w, geo.mask().to_vec())?,
        thin,
        iterations,
        update_history: history,
        coarse_levels,
    })
}

/// One projected SOR update of node `i`; returns `|change|`.
fn relax(k: &CsrMatrix, roles: &[Role], psi: &[f64], omega: f64, i: usize, w: &mut [f64]) -> f64 {
    let mut off = 0.0;
    let mut diag = 0.0;
    for (c, v) in k.row(i) {
        if c == i {
            diag = v;
        } else {
            off += v * w[c];
        }
    }
    let gs = -off / diag;
    let mut next = (1.0 - omega) * w[i] + omega * gs;
    if roles[i] == Role::Thin {
        next = next.max(psi[i]);
    }
    let change = (next - w[i]).abs();
    w[i] = next;
    change
}

/// Complementarity maxima over the thin nodes.
#[derive(Clone, Debug, Serialize)]
pub struct ComplementarityReport {
    /// `max (ψ - w)_+`.
    pub infeasibility: f64,
    /// `max (-λ)_+`.
    pub negative_multiplier: f64,
    /// `max |(w - ψ) λ|`.
    pub product: f64,
    pub contact_count: usize,
    pub thin_count: usize,
    pub tol: f64,
    pub pass: bool,
}

impl ComplementarityReport {
    pub fn max(&self) -> f64 {
        self.infeasibility.max(self.negative_multiplier).max(self.product)
    }
}

/// `tol` is applied to all three maxima.
pub fn complementarity_report(sol: &SignoriniSolution, tol: f64) -> ComplementarityReport {
    let mut r = ComplementarityReport {
        infeasibility: 0.0,
        negative_multiplier: 0.0,
        product: 0.0,
        contact_count: 0,
        thin_count: sol.thin.len(),
        tol,
        pass: false,
    };
    for t in &sol.thin {
        r.infeasibility = r.infeasibility.max(t.obstacle - t.w);
        r.negative_multiplier = r.negative_multiplier.max(-t.multiplier);
        r.product = r.product.max(((t.w - t.obstacle) * t.multiplier).abs());
        r.contact_count += usize::from(t.contact);
    }
    r.pass = r.max() <= tol;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::signorini_profile_at;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn spec(h: f64) -> GridSpec {
        GridSpec::new(1.0, h, Shape::HalfDisk).unwrap()
    }

    #[test]
    fn reflected_stencil_on_the_diameter() {
        let p = SignoriniProblem::new(spec(1.0 / 16.0), |p| p[1]).unwrap();
        let geo = &p.geometry;
        let coeff = CoefficientField::identity(*geo.spec(), geo.mask(), |_| 1.0).unwrap();
        let k = assemble_stiffness(&coeff, geo.mask());
        let s = geo.spec();
        let i = s.index(3, 0).unwrap();
        let row: Vec<(usize, f64)> = k.row(i).collect();
        let get = |c: usize| row.iter().find(|e| e.0 == c).map(|e| e.1).unwrap();
        assert_eq!(get(i), 2.0);
        assert_eq!(get(s.index(2, 0).unwrap()), -0.5);
        assert_eq!(get(s.index(4, 0).unwrap()), -0.5);
        assert_eq!(get(s.index(3, 1).unwrap()), -1.0);
    }

    #[test]
    fn negative_plane_is_full_contact_with_unit_multiplier() {
        let p = SignoriniProblem::new(spec(1.0 / 32.0), |p| -p[1]).unwrap();
        let sol = solve_signorini(&p, &cfg()).unwrap();
        let rep = complementarity_report(&sol, 1e-6);
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.contact_count, rep.thin_count);
        for t in &sol.thin {
            assert!((t.multiplier - 1.0).abs() < 1e-6, "λ = {}", t.multiplier);
        }
    }

    #[test]
    fn plus_plane_keeps_the_constraint_active_at_the_diameter() {
        // w = x2 vanishes on the diameter with ∂_{x2} w = 1 > 0, so it is
        // not a solution; the constraint forces w >= 0 and the solution
        // leaves the diameter.
        let p = SignoriniProblem::new(spec(1.0 / 32.0), |p| p[1]).unwrap();
        let sol = solve_signorini(&p, &cfg()).unwrap();
        let rep = complementarity_report(&sol, 1e-6);
        assert!(rep.pass, "{rep:?}");
        assert!(sol.thin.iter().all(|t| t.w > 0.0));
    }

    #[test]
    fn lifted_data_is_unconstrained() {
        let p = SignoriniProblem::new(spec(1.0 / 32.0), |p| 0.5 + p[1]).unwrap();
        let sol = solve_signorini(&p, &cfg()).unwrap();
        assert_eq!(complementarity_report(&sol, 1e-6).contact_count, 0);
        // λ vanishes up to the relaxation tolerance
        for t in &sol.thin {
            assert!(t.multiplier.abs() < 1e-5, "λ = {}", t.multiplier);
        }
        // the unconstrained Neumann problem has the even extension of
        // 0.5 + |x2|, which is not harmonic, so only check positivity
        assert!(sol.w.min() >= 0.5 - 1e-9);
    }

    #[test]
    fn canonical_profile_coarse() {
        let h = 1.0 / 64.0;
        let p = SignoriniProblem::new(spec(h), signorini_profile_at).unwrap();
        let sol = solve_signorini(&p, &cfg()).unwrap();
        let exact = p.geometry.field_from_fn(signorini_profile_at).unwrap();
        let num: f64 = sol.w.zip_map(&exact, |a, b| (a - b) * (a - b)).unwrap().masked_values().sum();
        let den: f64 = exact.masked_values().map(|v| v * v).sum();
        assert!((num / den).sqrt() < 0.02);
        for t in &sol.thin {
            if t.x < -2.0 * h {
                assert!(t.contact, "x = {}", t.x);
            }
            if t.x > 2.0 * h {
                assert!(!t.contact, "x = {}", t.x);
            }
        }
        assert!(sol.coarse_levels >= 1);
    }

    #[test]
    fn obstacle_is_respected() {
        let p = SignoriniProblem::new(spec(1.0 / 32.0), |p| -p[1]).unwrap().with_obstacle(|x| 0.1 - x * x).unwrap();
        let sol = solve_signorini(&p, &cfg()).unwrap();
        let rep = complementarity_report(&sol, 1e-6);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.contact_count > 0);
    }

    #[test]
    fn bad_omega_is_rejected() {
        let p = SignoriniProblem::new(spec(1.0 / 16.0), |p| p[1]).unwrap();
        let c = SolverConfig { omega: 2.0, ..cfg() };
        assert!(matches!(solve_signorini(&p, &c), Err(LabError::Config(_))));
    }

    #[test]
    fn sweep_budget_is_enforced() {
        let p = SignoriniProblem::new(spec(1.0 / 16.0), signorini_profile_at).unwrap();
        let c = SolverConfig { vi_max_iters: 3, ..cfg() };
        assert!(matches!(solve_signorini(&p, &c), Err(LabError::ViNonConvergence { iterations: 3, .. })));
    }
}

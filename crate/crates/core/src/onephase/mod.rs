//! Discrete minimizers of the one-phase energy
//! `J(u) = ∫ a^{ij} ∂_i u ∂_j u + Q^2 χ_{u>0}` with `u = 0` on the fixed
//! boundary `Z` and prescribed data on the rest of `∂Ω`.
//!
//! The indicator is replaced by the ramp `ψ(u/ε)`, `ψ(s) = 1 - (1 - s)^3` on
//! `[0, 1]`, and the smoothed energy is minimized by projected truncated
//! Newton descent for `ε ∈ {8h, 4h, 2h, h}`, each stage warm-started from
//! the previous one. The first stage starts from the solution on the `2h`
//! lattice when the grid is fine enough.

mod free_boundary;

pub use free_boundary::{
    check_fb_conditions, extract_free_boundary, CONTACT_SLOPE_REL_TOL, extract_level_set, FbCheck, FbConditionReport, FbVertexKind,
    FreeBoundarySet,
};

use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{LabError, Result};
use crate::grid::{assemble_stiffness, CoefficientField, DomainGeometry, GridSpec, NodeKind, ScalarField};
use crate::linalg::{pcg, solve_dirichlet, CsrMatrix, PcgOptions};
use crate::oracle::gauss_legendre_8;

/// Multipliers of `h` in the penalty schedule.
pub const PENALTY_SCHEDULE: [f64; 4] = [8.0, 4.0, 2.0, 1.0];

#[derive(Clone, Debug)]
pub struct OnePhaseProblem {
    pub geometry: DomainGeometry,
    pub coeff: CoefficientField,
    /// Values on the outer boundary nodes; ignored elsewhere.
    pub boundary_data: ScalarField,
}

impl OnePhaseProblem {
    pub fn new(geometry: DomainGeometry, coeff: CoefficientField, boundary_data: ScalarField) -> Result<Self> {
        let spec = geometry.spec();
        if !spec.same_lattice(coeff.spec()) || !spec.same_lattice(boundary_data.spec()) {
            return Err(LabError::Geometry("problem data live on different grids".into()));
        }
        for k in 0..spec.len() {
            let kind = geometry.kind(k);
            if kind == NodeKind::Outside {
                continue;
            }
            if !coeff.q.is_masked(k) {
                return Err(LabError::Geometry("coefficients do not cover the domain".into()));
            }
            if kind == NodeKind::Interior {
                continue;
            }
            if !boundary_data.is_masked(k) {
                return Err(LabError::Geometry("boundary data missing on a boundary node".into()));
            }
            let v = boundary_data.at(k);
            let p = spec.point(k);
            if v < 0.0 {
                return Err(LabError::Argument(format!("boundary data {v} < 0 at ({}, {})", p[0], p[1])));
            }
            if kind == NodeKind::Fixed && v.abs() > 1e-14 {
                return Err(LabError::Argument(format!(
                    "boundary data must vanish on Z, got {v} at ({}, {})",
                    p[0], p[1]
                )));
            }
        }
        Ok(OnePhaseProblem {
            geometry,
            coeff,
            boundary_data,
        })
    }
}

/// Nodes counted as positive: `u > 10^{-12} ‖u‖_∞`.
#[derive(Clone, Debug)]
pub struct PositivitySet {
    pub mask: Vec<bool>,
    pub threshold: f64,
}

impl PositivitySet {
    pub fn of(u: &ScalarField) -> Self {
        let threshold = 1e-12 * u.max_abs();
        let mask = (0..u.spec().len()).map(|k| u.is_masked(k) && u.at(k) > threshold).collect();
        PositivitySet { mask, threshold }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageLog {
    pub eps_pen: f64,
    pub iterations: usize,
    /// Smoothed energy after every accepted step, starting with the stage's
    /// initial value.
    pub energies: Vec<f64>,
    /// Projected gradient at exit relative to the penalty force scale.
    pub stationarity: f64,
    pub pcg_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct OnePhaseSolution {
    pub u: ScalarField,
    pub positivity: PositivitySet,
    pub free_boundary: FreeBoundarySet,
    /// Smoothed energies per penalty stage.
    pub energy_history: Vec<Vec<f64>>,
    pub penalty_schedule: Vec<f64>,
    pub stages: Vec<StageLog>,
    /// Sharp energy of the harmonic initial guess.
    pub initial_energy: f64,
    pub energy: f64,
    /// `max |Lu|` over unknown nodes with `u >= ε_pen`.
    pub pde_residual: f64,
    /// Level used for the free boundary: the sharp interface of the final
    /// smoothed stage sits at `u = layer_level() · ε_pen`.
    pub fb_level: f64,
    /// Number of coarser lattices solved for the warm start.
    pub coarse_levels: usize,
}

/// Sharp energy by cell-midpoint quadrature: the Dirichlet part is exact for
/// bilinear cell interpolants of the edge differences and `χ` is evaluated at
/// the cell centre (mean of the four corners).
pub fn energy(u: &ScalarField, coeff: &CoefficientField) -> f64 {
    let (d, area) = energy_parts(u, coeff);
    d + area
}

/// `(Dirichlet part, Q^2-weighted positive area)`.
pub fn energy_parts(u: &ScalarField, coeff: &CoefficientField) -> (f64, f64) {
    let spec = u.spec();
    let n = spec.cells();
    let h2 = spec.spacing * spec.spacing;
    let thr = 1e-12 * u.max_abs();
    let mut dir = 0.0;
    let mut area = 0.0;
    for j in spec.j_min()..n {
        for i in -n..n {
            let ks = [spec.index(i, j), spec.index(i + 1, j), spec.index(i, j + 1), spec.index(i + 1, j + 1)];
            let Some(ks) = ks.iter().copied().collect::<Option<Vec<usize>>>() else {
                continue;
            };
            if !ks.iter().all(|&k| u.is_masked(k) && coeff.q.is_masked(k)) {
                continue;
            }
            let [u00, u10, u01, u11] = [u.at(ks[0]), u.at(ks[1]), u.at(ks[2]), u.at(ks[3])];
            let avg = |f: &ScalarField| ks.iter().map(|&k| f.at(k)).sum::<f64>() / 4.0;
            let (a11, a12, a22) = (avg(&coeff.a11), avg(&coeff.a12), avg(&coeff.a22));
            let (xb, xt) = (u10 - u00, u11 - u01);
            let (yl, yr) = (u01 - u00, u11 - u10);
            let xm = 0.5 * (xb + xt);
            let ym = 0.5 * (yl + yr);
            dir += a11 * 0.5 * (xb * xb + xt * xt) + a22 * 0.5 * (yl * yl + yr * yr) + 2.0 * a12 * xm * ym;
            if (u00 + u10 + u01 + u11) / 4.0 > thr {
                let q = avg(&coeff.q);
                area += q * q * h2;
            }
        }
    }
    (dir, area)
}

/// Discrete Dirichlet energy `u^T K u`.
pub fn dirichlet_energy(u: &ScalarField, coeff: &CoefficientField) -> f64 {
    energy_parts(u, coeff).0
}

fn ramp(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let t = 1.0 - s;
        1.0 - t * t * t
    }
}

fn ramp_second(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        -6.0 * (1.0 - s)
    }
}

fn ramp_prime(s: f64) -> f64 {
    if s <= 0.0 {
        3.0
    } else if s >= 1.0 {
        0.0
    } else {
        3.0 * (1.0 - s) * (1.0 - s)
    }
}

/// Value `s*` of `u/ε` at the sharp-equivalent interface of the smoothed
/// one-dimensional profile. Along the profile `u'^2 = Q^2 ψ(u/ε)`, so the
/// linear continuation of the outer solution vanishes at a distance
/// `(ε/Q)(∫_0^1 ψ^{-1/2} - 1)` beyond the zero of `u`; `s*` solves
/// `∫_0^{s*} ψ^{-1/2} = ∫_0^1 ψ^{-1/2} - 1`.
pub fn layer_level() -> f64 {
    // ∫_0^s ψ(σ)^{-1/2} dσ with σ = τ^2 to remove the endpoint singularity.
    let integral = |s: f64| -> f64 {
        let (x, w) = gauss_legendre_8();
        let tmax = s.sqrt();
        let panels = 64;
        let mut acc = 0.0;
        for p in 0..panels {
            let (a, b) = (tmax * p as f64 / panels as f64, tmax * (p + 1) as f64 / panels as f64);
            for (xi, wi) in x.iter().zip(&w) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                acc += 0.5 * (b - a) * wi * 2.0 * t / ramp(t * t).sqrt();
            }
        }
        acc
    };
    let target = integral(1.0) - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if integral(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Smoothed<'a> {
    k: &'a CsrMatrix,
    unknown: &'a [bool],
    weight: Vec<f64>,
    eps: f64,
}

impl Smoothed<'_> {
    fn energy(&self, u: &[f64], ku: &mut [f64]) -> f64 {
        self.k.mul_vec(u, ku);
        let mut e = 0.0;
        for i in 0..u.len() {
            e += u[i] * ku[i];
            if self.unknown[i] {
                e += self.weight[i] * ramp(u[i] / self.eps);
            }
        }
        e
    }

    /// `energy(t) - energy(u)` from node-local differences, given `Ku` and
    /// `Kt`; accurate when the change is far below the energy itself.
    fn change(&self, u: &[f64], ku: &[f64], t: &[f64], kt: &[f64]) -> f64 {
        let mut d = 0.0;
        for i in 0..u.len() {
            if t[i] == u[i] {
                continue;
            }
            d += (t[i] - u[i]) * (kt[i] + ku[i]);
            if self.unknown[i] {
                d += self.weight[i] * (ramp(t[i] / self.eps) - ramp(u[i] / self.eps));
            }
        }
        d
    }

    /// `max |projected gradient|` relative to the larger of `max |2Ku|` and
    /// the full penalty force `3 h^2 Q^2 / ε`.
    fn stationarity(&self, u: &[f64], ku: &[f64], g: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..u.len() {
            if self.unknown[i] {
                let pg = if u[i] > 0.0 { g[i] } else { g[i].min(0.0) };
                worst = worst.max(pg.abs());
                scale = scale.max(2.0 * ku[i].abs()).max(3.0 * self.weight[i] / self.eps);
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    fn gradient(&self, u: &[f64], ku: &[f64], g: &mut [f64]) {
        for i in 0..u.len() {
            g[i] = if self.unknown[i] {
                2.0 * ku[i] + self.weight[i] * ramp_prime(u[i] / self.eps) / self.eps
            } else {
                0.0
            };
        }
    }
}

/// Minimizes the smoothed energies over the penalty schedule.
pub fn solve(problem: &OnePhaseProblem, cfg: &SolverConfig) -> Result<OnePhaseSolution> {
    let geo = &problem.geometry;
    let spec = *geo.spec();
    let h = spec.spacing;
    let h2 = h * h;
    let n = spec.len();
    let mask = geo.mask();
    let unknown: Vec<bool> = (0..n).map(|k| geo.kind(k) == NodeKind::Interior).collect();
    let k = assemble_stiffness(&problem.coeff, mask);
    let run = minimize(problem, cfg)?;
    let u = run.u;

    let eps_final = PENALTY_SCHEDULE[PENALTY_SCHEDULE.len() - 1] * h;
    let mut ku = vec![0.0; n];
    k.mul_vec(&u, &mut ku);
    let mut pde_residual = 0.0f64;
    for i in 0..n {
        if unknown[i] && u[i] >= eps_final {
            pde_residual = pde_residual.max(ku[i].abs() / h2);
        }
    }
    if pde_residual > cfg.pde_tol {
        return Err(LabError::Residual {
            residual: pde_residual,
            tol: cfg.pde_tol,
        });
    }
    let field = ScalarField::new(spec, u, mask.to_vec())?;
    let fb_level = layer_level() * eps_final;
    let mut free_boundary = extract_level_set(&field, geo, fb_level)?;
    free_boundary.trim_contact(&field, &problem.coeff, geo, CONTACT_SLOPE_REL_TOL);
    Ok(OnePhaseSolution {
        positivity: PositivitySet::of(&field),
        energy: energy(&field, &problem.coeff),
        u: field,
        free_boundary,
        energy_history: run.stages.iter().map(|s| s.energies.clone()).collect(),
        penalty_schedule: PENALTY_SCHEDULE.iter().map(|m| m * h).collect(),
        stages: run.stages,
        initial_energy: run.initial_energy,
        pde_residual,
        fb_level,
        coarse_levels: run.coarse_levels,
    })
}

/// Smallest number of cells per radius solved as a warm-start level.
const WARM_START_MIN_CELLS: i64 = 32;

struct Minimized {
    u: Vec<f64>,
    stages: Vec<StageLog>,
    initial_energy: f64,
    coarse_levels: usize,
}

/// The problem injected onto the `2h` lattice, with data taken from `u0`.
fn coarsen(problem: &OnePhaseProblem, u0: &[f64]) -> Option<OnePhaseProblem> {
    let fine = *problem.geometry.spec();
    let cells = fine.cells();
    if cells % 2 != 0 || cells / 2 < WARM_START_MIN_CELLS {
        return None;
    }
    let spec = GridSpec::new(fine.half_width, 2.0 * fine.spacing, fine.shape).ok()?;
    let geo = DomainGeometry::new(spec, problem.geometry.fixed_boundary().clone()).ok()?;
    let at_fine = |k: usize| {
        let (i, j) = spec.ij(k);
        fine.index(2 * i, 2 * j)
    };
    let mut mask = geo.mask().to_vec();
    for (k, m) in mask.iter_mut().enumerate() {
        *m &= at_fine(k).is_some_and(|f| problem.coeff.q.is_masked(f) && problem.coeff.a11.is_masked(f));
    }
    if mask != geo.mask() {
        return None;
    }
    let inject = |f: &ScalarField| -> Option<ScalarField> {
        let values = (0..spec.len()).map(|k| at_fine(k).map_or(f64::NAN, |q| f.at(q))).collect();
        ScalarField::new(spec, values, mask.clone()).ok()
    };
    let c = &problem.coeff;
    let coeff = CoefficientField::new(inject(&c.a11)?, inject(&c.a12)?, inject(&c.a22)?, inject(&c.q)?, c.ellipticity).ok()?;
    let data: Vec<f64> = (0..spec.len())
        .map(|k| match (geo.kind(k), at_fine(k)) {
            (NodeKind::Outside, _) | (_, None) => f64::NAN,
            (NodeKind::Fixed, _) => 0.0,
            (_, Some(q)) => u0[q].max(0.0),
        })
        .collect();
    let data = ScalarField::new(spec, data, mask.clone()).ok()?;
    OnePhaseProblem::new(geo, coeff, data).ok()
}

fn minimize(problem: &OnePhaseProblem, cfg: &SolverConfig) -> Result<Minimized> {
    let geo = &problem.geometry;
    let spec = *geo.spec();
    let h = spec.spacing;
    let h2 = h * h;
    let n = spec.len();
    let mask = geo.mask();
    let unknown: Vec<bool> = (0..n).map(|k| geo.kind(k) == NodeKind::Interior).collect();
    let k = assemble_stiffness(&problem.coeff, mask);

    let mut u: Vec<f64> = (0..n)
        .map(|i| match geo.kind(i) {
            NodeKind::Boundary => problem.boundary_data.at(i),
            _ => 0.0,
        })
        .collect();
    let opts = PcgOptions {
        rel_tol: 1e-12,
        max_iter: 20_000,
        omega: 1.6,
    };
    solve_dirichlet(&k, &unknown, &mut u, opts);
    for i in 0..n {
        if unknown[i] {
            u[i] = u[i].max(0.0);
        }
    }
    let initial_energy = energy(&ScalarField::new(spec, u.clone(), mask.to_vec())?, &problem.coeff);

    // nested warm start from the solution on the 2h lattice
    let mut coarse_levels = 0;
    if let Some(coarse) = coarsen(problem, &u) {
        if let Ok(run) = minimize(&coarse, cfg) {
            let cu = ScalarField::new(*coarse.geometry.spec(), run.u, coarse.geometry.mask().to_vec())?;
            for i in 0..n {
                let p = spec.point(i);
                if unknown[i] && cu.covers(p) {
                    if let Some(v) = cu.interpolate(p) {
                        u[i] = v.max(0.0);
                    }
                }
            }
            coarse_levels = run.coarse_levels + 1;
        }
    }

    let weight: Vec<f64> = (0..n)
        .map(|i| if unknown[i] { h2 * problem.coeff.q.at(i).powi(2) } else { 0.0 })
        .collect();
    let mut stages = Vec::new();
    let mut ku = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut k_trial = vec![0.0; n];
    let two_k = scaled(&k, 2.0);
    let dir_opts = PcgOptions {
        rel_tol: 1e-6,
        max_iter: 5000,
        omega: 1.6,
    };
    for (stage, &mult) in PENALTY_SCHEDULE.iter().enumerate() {
        let eps = mult * h;
        let model = Smoothed {
            k: &k,
            unknown: &unknown,
            weight: weight.clone(),
            eps,
        };
        let mut e = model.energy(&u, &mut ku);
        let u_scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let last = stage + 1 == PENALTY_SCHEDULE.len();
        // the final stage must also meet the interior equation
        let converged = |stat: f64, u: &[f64], ku: &[f64]| {
            stat <= cfg.grad_tol
                && (!last || (0..n).all(|i| !unknown[i] || u[i] < eps || ku[i].abs() <= 0.5 * cfg.pde_tol * h2))
        };
        let mut energies = vec![e];
        let mut iterations = 0;
        let mut pcg_iterations = 0;
        let mut stationarity;
        loop {
            model.gradient(&u, &ku, &mut g);
            stationarity = model.stationarity(&u, &ku, &g);
            if converged(stationarity, &u, &ku) {
                break;
            }
            if iterations >= cfg.max_iters {
                return Err(LabError::NonConvergence {
                    stage,
                    eps_pen: eps,
                    iterations,
                    energy_history: energies,
                });
            }
            let free: Vec<bool> = (0..n).map(|i| unknown[i] && !(u[i] <= 0.0 && g[i] >= 0.0)).collect();
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            // Newton direction with the concave penalty curvature; falls back
            // to the Dirichlet part when the free block is not positive
            let shift: Vec<f64> = (0..n)
                .map(|i| if free[i] { model.weight[i] * ramp_second(u[i] / eps) / (eps * eps) } else { 0.0 })
                .collect();
            let mut newton = false;
            if (0..n).all(|i| !free[i] || two_k.diagonal(i) + shift[i] > 0.0) {
                let hess = two_k.add_diagonal(&shift);
                d.iter_mut().for_each(|v| *v = 0.0);
                let st = pcg(&hess, &free, &rhs, &mut d, dir_opts);
                pcg_iterations += st.iterations;
                // a truncated iterate is still a descent direction
                let slope: f64 = (0..n).map(|i| g[i] * d[i]).sum();
                newton = st.iterations > 0 && slope < 0.0;
            }
            if !newton {
                d.iter_mut().for_each(|v| *v = 0.0);
                let st = pcg(&two_k, &free, &rhs, &mut d, dir_opts);
                pcg_iterations += st.iterations;
            }
            // Armijo backtracking along the projected arc
            let mut alpha = 1.0;
            let mut accepted = false;
            let mut best_step = 0.0f64;
            for _ in 0..60 {
                let mut decrease = 0.0;
                for i in 0..n {
                    trial[i] = if unknown[i] { (u[i] + alpha * d[i]).max(0.0) } else { u[i] };
                    decrease -= g[i] * (trial[i] - u[i]);
                }
                k.mul_vec(&trial, &mut k_trial);
                let de = model.change(&u, &ku, &trial, &k_trial);
                if de <= -1e-4 * decrease.max(0.0) && de <= 0.0 {
                    best_step = (0..n).fold(0.0f64, |m, i| m.max((trial[i] - u[i]).abs()));
                    std::mem::swap(&mut u, &mut trial);
                    std::mem::swap(&mut ku, &mut k_trial);
                    e += de;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            iterations += 1;
            if !accepted || best_step <= 1e-13 * u_scale {
                // no representable decrease left along the descent arc
                model.gradient(&u, &ku, &mut g);
                stationarity = model.stationarity(&u, &ku, &g);
                if converged(stationarity, &u, &ku) {
                    break;
                }
                return Err(LabError::NonConvergence {
                    stage,
                    eps_pen: eps,
                    iterations,
                    energy_history: energies,
                });
            }
            energies.push(e);
        }
        stages.push(StageLog {
            eps_pen: eps,
            iterations,
            energies,
            stationarity,
            pcg_iterations,
        });
    }

    Ok(Minimized {
        u,
        stages,
        initial_energy,
        coarse_levels,
    })
}

fn scaled(k: &CsrMatrix, s: f64) -> CsrMatrix {
    let mut trip = Vec::new();
    for r in 0..k.dim() {
        for (c, v) in k.row(r) {
            trip.push((r, c, s * v));
        }
    }
    CsrMatrix::from_triplets(k.dim(), trip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;

    fn identity(geo: &DomainGeometry, q: f64) -> CoefficientField {
        CoefficientField::identity(*geo.spec(), geo.mask(), |_| q).unwrap()
    }

    #[test]
    fn energy_of_zero_and_plane() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 32.0).unwrap();
        let coeff = identity(&geo, 1.0);
        assert_eq!(energy(&geo.zeros().unwrap(), &coeff), 0.0);
        let u = geo.field_from_fn(|p| p[1].max(0.0)).unwrap();
        assert!((energy(&u, &coeff) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_is_c1_at_the_top() {
        assert_eq!(ramp(1.0), 1.0);
        assert_eq!(ramp_prime(1.0 - 1e-12).abs() < 1e-20, true);
        assert!((ramp_prime(0.0) - 3.0).abs() < 1e-15);
        let s = 0.3;
        let fd = (ramp(s + 1e-6) - ramp(s - 1e-6)) / 2e-6;
        assert!((fd - ramp_prime(s)).abs() < 1e-8);
    }

    #[test]
    fn layer_level_against_midpoint_rule() {
        // independent evaluation: midpoint rule in τ = sqrt(σ) on a fine grid
        let m = 200_000;
        let f = |s: f64| -> f64 {
            let tmax = s.sqrt();
            (0..m)
                .map(|k| {
                    let t = tmax * (k as f64 + 0.5) / m as f64;
                    2.0 * t / ramp(t * t).sqrt() * tmax / m as f64
                })
                .sum()
        };
        let total = f(1.0);
        assert!((total - 1.402_182_105_324_65).abs() < 1e-6, "{total}");
        let s = layer_level();
        assert!((f(s) - (total - 1.0)).abs() < 1e-6);
        assert!((0.11..0.13).contains(&s), "{s}");
    }

    #[test]
    fn plane_data_gives_plane_solution() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 32.0).unwrap();
        let coeff = identity(&geo, 1.0);
        let data = geo.field_from_fn(|p| p[1]).unwrap();
        let prob = OnePhaseProblem::new(geo.clone(), coeff, data).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        let h = 1.0 / 32.0;
        let err = sol.u.zip_map(&geo.field_from_fn(|p| p[1]).unwrap(), |a, b| a - b).unwrap().max_abs();
        assert!(err <= 3.0 * h, "sup error {err}");
        for s in &sol.energy_history {
            assert!(s.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(sol.energy <= sol.initial_energy + 1e-12);
    }

    #[test]
    fn negative_data_is_rejected() {
        let geo = DomainGeometry::rectangle(1.0, 1.0 / 16.0).unwrap();
        let coeff = identity(&geo, 1.0);
        let data = geo.field_from_fn(|p| p[1] - 0.5).unwrap();
        assert!(OnePhaseProblem::new(geo, coeff, data).is_err());
    }
}

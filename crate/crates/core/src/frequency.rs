//! Spherical averages and the truncated frequency of `w` around the origin.
//!
//! With `⨍_E f = r^{-d} ∫_E f` for `d = dim E`:
//!
//! ```text
//! H(r)  = ⨍_{∂B_r ∩ Ω⁺} w²
//! E₁(r) = (1/r) ⨍_{∂B_r ∩ F̄} w² (x·ν)
//! E₂(r) = 2r ⨍_{B_r ∩ F̄} w ∂_ν w
//! H̃(r)  = H(r) + ∫_0^r (E₁ + E₂) dρ/ρ
//! Ñ(r)  = (r/2) d/dr ln max(H̃(r), r^{3+σ/10})
//! ```
//!
//! `ν` is the outward normal of `Ω⁺`. The plane is two-dimensional, so
//! `∂B_r ∩ F̄` is a finite set of points and `E₁` is a plain sum over them.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SolverConfig;
use crate::error::{LabError, Result};
use crate::grid::{ball_integral, circle_integral, gradient, GridSpec, Point, Region, ScalarField, Shape};
use crate::onephase::FreeBoundarySet;

/// Space dimension used in the formulas.
pub const DIM: usize = 2;

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyConfig {
    /// Strictly decreasing radii.
    pub radii: Vec<f64>,
    pub sigma: f64,
    pub c_mono: f64,
    pub mono_tol: f64,
}

impl FrequencyConfig {
    /// `r_k = r_max ρ^k` for all `k` with `r_k >= r_min`.
    pub fn geometric(r_max: f64, rho: f64, r_min: f64, sigma: f64, c_mono: f64, mono_tol: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(LabError::Config(format!("frequency.rho must lie in (0, 1), got {rho}")));
        }
        if !(r_min > 0.0 && r_min <= r_max) {
            return Err(LabError::Config(format!("need 0 < r_min <= r_max, got {r_min}, {r_max}")));
        }
        let mut radii = Vec::new();
        let mut r = r_max;
        while r >= r_min * (1.0 - 1e-12) {
            radii.push(r);
            r *= rho;
        }
        let c = FrequencyConfig {
            radii,
            sigma,
            c_mono,
            mono_tol,
        };
        c.validate()?;
        Ok(c)
    }

    /// Radii from `cfg` down to the smallest usable radius `8h`.
    pub fn from_solver(cfg: &SolverConfig, spec: &GridSpec) -> Result<Self> {
        let r_max = cfg.r_max.min(spec.half_width - 2.0 * spec.spacing);
        Self::geometric(r_max, cfg.rho, 8.0 * spec.spacing, cfg.sigma, cfg.c_mono, cfg.mono_tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(LabError::Config(format!("σ must lie in (0, 1/2), got {}", self.sigma)));
        }
        if self.radii.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(LabError::Config("radii must be strictly decreasing".into()));
        }
        Ok(())
    }

    /// Exponent of the truncation term, `3 + σ/10`.
    pub fn truncation_exponent(&self) -> f64 {
        3.0 + self.sigma / 10.0
    }
}

/// An oriented piece of `F̄`: consecutive points and the outward normal of
/// `Ω⁺` on every segment.
#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
}

impl BoundaryCurve {
    /// The diameter `[-R, R] × {0}` with `ν = -e₂`.
    pub fn diameter(radius: f64, spacing: f64) -> Self {
        let m = (2.0 * radius / spacing).round().max(1.0) as usize;
        let points: Vec<Point> = (0..=m).map(|k| [-radius + 2.0 * radius * k as f64 / m as f64, 0.0]).collect();
        BoundaryCurve {
            normals: vec![[0.0, -1.0]; m],
            points,
        }
    }

    /// Normals of the extracted free boundary, pointing toward smaller `u`.
    pub fn from_free_boundary(fb: &FreeBoundarySet, u: &ScalarField) -> Vec<Self> {
        let h = u.spec().spacing;
        fb.polylines
            .iter()
            .filter(|l| l.len() >= 2)
            .map(|line| {
                let normals = line
                    .windows(2)
                    .map(|s| {
                        let t = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
                        let tn = t[0].hypot(t[1]).max(f64::MIN_POSITIVE);
                        let nrm = [-t[1] / tn, t[0] / tn];
                        let m = [0.5 * (s[0][0] + s[1][0]), 0.5 * (s[0][1] + s[1][1])];
                        let probe = |sg: f64| u.interpolate([m[0] + sg * h * nrm[0], m[1] + sg * h * nrm[1]]);
                        match (probe(1.0), probe(-1.0)) {
                            (Some(fwd), Some(bwd)) if fwd > bwd => [-nrm[0], -nrm[1]],
                            (Some(_), None) => [-nrm[0], -nrm[1]],
                            _ => nrm,
                        }
                    })
                    .collect();
                BoundaryCurve {
                    points: line.clone(),
                    normals,
                }
            })
            .collect()
    }
}

/// Everything the analyzer needs about one function.
#[derive(Clone, Copy)]
pub struct FrequencyInput<'a> {
    pub w: &'a ScalarField,
    /// `Ω⁺`.
    pub region: Region<'a>,
    /// `F̄`.
    pub boundary: &'a [BoundaryCurve],
    /// Width of a smoothing layer along `F̄` in the data (the final penalty
    /// parameter for solver output, 0 for exact fields). Boundary traces are
    /// sampled at least two layer widths inside `Ω⁺`.
    pub layer: f64,
}

impl FrequencyInput<'_> {
    fn trace_spacing(&self) -> f64 {
        2.0 * self.w.spec().spacing + 2.0 * self.layer.max(0.0)
    }
}

/// Samples along `F̄` used by the correction terms.
struct SegmentSample {
    a: Point,
    b: Point,
    normal: Point,
    /// `w ∂_ν w` at the midpoint.
    w_dnu_w: f64,
    /// Rellich boundary integrand `|Dw|²(x·ν) - 2 (Dw·x) ∂_ν w` at the midpoint.
    rellich: f64,
}

struct Prepared<'a> {
    input: FrequencyInput<'a>,
    grad_sq: ScalarField,
    radial_term: ScalarField,
    segments: Vec<SegmentSample>,
    skipped_segments: usize,
    delta: f64,
}

impl<'a> Prepared<'a> {
    fn new(input: FrequencyInput<'a>) -> Result<Self> {
        let w = input.w;
        let (gx, gy) = region_gradient(w, input.region)?;
        let grad_sq = gx.zip_map(&gy, |a, b| a * a + b * b)?;
        // |Dw|² - 2 (∂_r w)²
        let radial_term = {
            let spec = *w.spec();
            let values = (0..spec.len())
                .map(|k| {
                    if !w.is_masked(k) {
                        return f64::NAN;
                    }
                    let p = spec.point(k);
                    let r = p[0].hypot(p[1]);
                    let (a, b) = (gx.at(k), gy.at(k));
                    let dr = if r > 0.0 { (a * p[0] + b * p[1]) / r } else { 0.0 };
                    a * a + b * b - 2.0 * dr * dr
                })
                .collect();
            ScalarField::new(spec, values, w.mask().to_vec())?
        };
        let delta = input.trace_spacing();
        let mut segments = Vec::new();
        let mut skipped = 0;
        for curve in input.boundary {
            for (s, &nu) in curve.points.windows(2).zip(&curve.normals) {
                let m = [0.5 * (s[0][0] + s[1][0]), 0.5 * (s[0][1] + s[1][1])];
                let (Some((wm, dnu)), Some(gxm), Some(gym)) =
                    (trace(w, m, nu, delta), trace(&gx, m, nu, delta), trace(&gy, m, nu, delta))
                else {
                    skipped += 1;
                    continue;
                };
                let g = [gxm.0, gym.0];
                let xn = m[0] * nu[0] + m[1] * nu[1];
                let gxm = g[0] * m[0] + g[1] * m[1];
                segments.push(SegmentSample {
                    a: s[0],
                    b: s[1],
                    normal: nu,
                    w_dnu_w: wm * dnu,
                    rellich: (g[0] * g[0] + g[1] * g[1]) * xn - 2.0 * gxm * dnu,
                });
            }
        }
        Ok(Prepared {
            input,
            grad_sq,
            radial_term,
            segments,
            skipped_segments: skipped,
            delta,
        })
    }

    fn h(&self, r: f64) -> Result<f64> {
        let w = self.input.w;
        let sq = w.map(|_, v| v * v)?;
        Ok(circle_integral(&sq, r, self.input.region)? / r.powi(DIM as i32 - 1))
    }

    /// `(E₁, E₂)` at radius `r`.
    fn corrections(&self, r: f64) -> (f64, f64) {
        let w = self.input.w;
        let mut e1 = 0.0;
        let mut line = 0.0;
        for s in &self.segments {
            let (t0, t1) = inside_interval(s.a, s.b, r);
            let len = (s.b[0] - s.a[0]).hypot(s.b[1] - s.a[1]);
            line += (t1 - t0).max(0.0) * len * s.w_dnu_w;
            for t in crossings(s.a, s.b, r) {
                let p = [s.a[0] + t * (s.b[0] - s.a[0]), s.a[1] + t * (s.b[1] - s.a[1])];
                if let Some((v, _)) = trace(w, p, s.normal, self.delta) {
                    e1 += v * v * (p[0] * s.normal[0] + p[1] * s.normal[1]);
                }
            }
        }
        (e1 / r, 2.0 * r * line / r)
    }

    fn rellich_boundary(&self, r: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let (t0, t1) = inside_interval(s.a, s.b, r);
                let len = (s.b[0] - s.a[0]).hypot(s.b[1] - s.a[1]);
                (t1 - t0).max(0.0) * len * s.rellich
            })
            .sum()
    }
}

/// Gradient of `w` from differences inside `region` only. Nodes just
/// outside the region get the mean of their in-region neighbours so that
/// cut cells and near-boundary interpolation see one-sided values.
fn region_gradient(w: &ScalarField, region: Region<'_>) -> Result<(ScalarField, ScalarField)> {
    if matches!(region, Region::Domain) {
        return gradient(w);
    }
    let spec = *w.spec();
    let mut inside: Vec<bool> = (0..spec.len()).map(|k| region.contains_node(w, k)).collect();
    // drop nodes without a neighbour along some axis
    loop {
        let has = |i, j| spec.index(i, j).is_some_and(|k| inside[k]);
        let lonely: Vec<usize> = (0..spec.len())
            .filter(|&k| inside[k])
            .filter(|&k| {
                let (i, j) = spec.ij(k);
                !(has(i - 1, j) || has(i + 1, j)) || !(has(i, j - 1) || has(i, j + 1))
            })
            .collect();
        if lonely.is_empty() {
            break;
        }
        for k in lonely {
            inside[k] = false;
        }
    }
    let (gx, gy) = gradient(&w.restrict(&inside)?)?;
    let extend = |g: &ScalarField| -> Result<ScalarField> {
        let values = (0..spec.len())
            .map(|k| {
                if inside[k] {
                    return g.at(k);
                }
                let (i, j) = spec.ij(k);
                let near: Vec<f64> = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
                    .iter()
                    .filter_map(|&(di, dj)| spec.index(i + di, j + dj).filter(|&n| inside[n]).map(|n| g.at(n)))
                    .collect();
                if near.is_empty() {
                    0.0
                } else {
                    near.iter().sum::<f64>() / near.len() as f64
                }
            })
            .collect();
        ScalarField::new(spec, values, w.mask().to_vec())
    };
    Ok((extend(&gx)?, extend(&gy)?))
}

/// Value and outward normal derivative of `f` at a boundary point `p`,
/// extrapolated quadratically from `p - kδν`, `k = 1, 2, 3`.
/// Grid values next to the boundary mix both sides, so `p` itself is not
/// sampled.
fn trace(f: &ScalarField, p: Point, nu: Point, delta: f64) -> Option<(f64, f64)> {
    let at = |k: f64| {
        let q = [p[0] - k * delta * nu[0], p[1] - k * delta * nu[1]];
        if f.covers(q) {
            f.interpolate(q)
        } else {
            None
        }
    };
    let (f1, f2, f3) = (at(1.0)?, at(2.0)?, at(3.0)?);
    Some((3.0 * f1 - 3.0 * f2 + f3, (2.5 * f1 - 4.0 * f2 + 1.5 * f3) / delta))
}

/// Parameter interval of `a + t (b - a)`, `t ∈ [0, 1]`, inside `B_r`.
fn inside_interval(a: Point, b: Point, r: f64) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
    let qc = a[0] * a[0] + a[1] * a[1] - r * r;
    if qa == 0.0 {
        return if qc <= 0.0 { (0.0, 1.0) } else { (0.0, 0.0) };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return (0.0, 0.0);
    }
    let sq = disc.sqrt();
    let lo = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let hi = ((-qb + sq) / (2.0 * qa)).min(1.0);
    if hi > lo {
        (lo, hi)
    } else {
        (0.0, 0.0)
    }
}

/// Parameters `t ∈ [0, 1)` where the segment meets `∂B_r`.
fn crossings(a: Point, b: Point, r: f64) -> Vec<f64> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
    let qc = a[0] * a[0] + a[1] * a[1] - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
        .into_iter()
        .filter(|t| (0.0..1.0).contains(t))
        .collect()
}

/// `H(r) = ⨍_{∂B_r ∩ Ω⁺} w²`.
pub fn compute_h(w: &ScalarField, region: Region<'_>, r: f64) -> Result<f64> {
    let sq = w.map(|_, v| v * v)?;
    Ok(circle_integral(&sq, r, region)? / r.powi(DIM as i32 - 1))
}

/// `(E₁(r), E₂(r))`.
pub fn compute_corrections(input: FrequencyInput<'_>, r: f64) -> Result<(f64, f64)> {
    let h = input.w.spec().spacing;
    let (min, max) = (2.0 * h, input.w.spec().half_width - 2.0 * h);
    if !(r >= min && r <= max) {
        return Err(LabError::Radius { r, min, max });
    }
    Ok(Prepared::new(input)?.corrections(r))
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyRow {
    pub r: f64,
    pub h: f64,
    pub e1: f64,
    pub e2: f64,
    pub h_tilde: f64,
    /// `∫_{B_r ∩ Ω⁺} |Dw|²`.
    pub d: f64,
    /// Centred difference of `H̃` in `ln r` over the neighbouring radii.
    pub h_tilde_prime_fd: Option<f64>,
    /// `2r ⨍_{B_r ∩ Ω⁺} |Dw|²`.
    pub h_tilde_prime_identity: f64,
    pub n_tilde: Option<f64>,
    pub truncation_active: bool,
    pub rellich_residual: Option<f64>,
    /// `ε_r / r^{1/2 + σ/20}` with `ε_r = H(r)^{1/2} / r`.
    pub eps_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub r_small: f64,
    pub r_large: f64,
    pub drop: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyReport {
    pub rows: Vec<FrequencyRow>,
    pub sigma: f64,
    pub c_mono: f64,
    pub mono_tol: f64,
    pub violations: Vec<Violation>,
    /// `Ñ` at the smallest radius where it is defined.
    pub n_tilde_small: Option<f64>,
    pub degree: Option<f64>,
    pub degree_residual: Option<f64>,
    /// Log-log slope of `H` over the smallest decade of radii.
    pub growth_slope: Option<f64>,
    /// `min H̃' / r^{2+σ/10}` over rows where the truncation is inactive.
    pub c0: Option<f64>,
    /// Rows with inactive truncation and `H̃' <= 0`.
    pub nonpositive_derivative: usize,
    pub skipped_segments: usize,
}

impl FrequencyReport {
    pub fn monotone(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut s = String::from("r,H,E1,E2,H_tilde,D,H_tilde_prime_fd,H_tilde_prime_identity,N_tilde,truncation_active,rellich_residual\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.r,
                r.h,
                r.e1,
                r.e2,
                r.h_tilde,
                r.d,
                opt(r.h_tilde_prime_fd),
                r.h_tilde_prime_identity,
                opt(r.n_tilde),
                u8::from(r.truncation_active),
                opt(r.rellich_residual)
            ));
        }
        s
    }
}

/// Full frequency analysis over `cfg.radii`.
pub fn analyze(input: FrequencyInput<'_>, cfg: &FrequencyConfig) -> Result<FrequencyReport> {
    cfg.validate()?;
    let prep = Prepared::new(input)?;
    let w = input.w;
    let h = w.spec().spacing;
    let r_max = cfg.radii.first().copied().unwrap_or(0.0);

    // ∫_0^r (E₁ + E₂) dρ/ρ on a fine midpoint grid
    let step = 0.25 * h;
    let m = (r_max / step).ceil() as usize;
    let integrand: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| {
            let rho = (k as f64 + 0.5) * step;
            let (e1, e2) = prep.corrections(rho);
            (e1 + e2) / rho * step
        })
        .collect();
    let mut cumulative = vec![0.0; m + 1];
    for k in 0..m {
        cumulative[k + 1] = cumulative[k] + integrand[k];
    }
    let correction_integral = |r: f64| {
        let x = r / step;
        let k = (x.floor() as usize).min(m.saturating_sub(1));
        let frac = x - k as f64;
        cumulative[k] + frac * (cumulative[(k + 1).min(m)] - cumulative[k])
    };

    let base: Vec<(f64, f64, f64, f64, f64, f64)> = cfg
        .radii
        .par_iter()
        .map(|&r| -> Result<_> {
            let hr = prep.h(r)?;
            let (e1, e2) = prep.corrections(r);
            let d = ball_integral(&prep.grad_sq, r, input.region)?;
            let arc = circle_integral(&prep.radial_term, r, input.region)?;
            Ok((r, hr, e1, e2, d, r * arc + prep.rellich_boundary(r)))
        })
        .collect::<Result<Vec<_>>>()?;

    let expo = cfg.truncation_exponent();
    let n = base.len();
    let h_tilde: Vec<f64> = base.iter().map(|&(r, hr, ..)| hr + correction_integral(r)).collect();
    let log_m: Vec<f64> = base.iter().zip(&h_tilde).map(|(b, &ht)| ht.max(b.0.powf(expo)).ln()).collect();
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let (r, hr, e1, e2, d, rellich_rhs) = base[k];
        let (fd, nt) = if k > 0 && k + 1 < n {
            let (ra, rb) = (base[k - 1].0, base[k + 1].0);
            let (ha, hm, hb) = (h_tilde[k - 1], h_tilde[k], h_tilde[k + 1]);
            let fd = if ha > 0.0 && hm > 0.0 && hb > 0.0 {
                hm / r * (ha.ln() - hb.ln()) / (ra.ln() - rb.ln())
            } else {
                // three-point derivative on the nonuniform radii
                let (da, db) = (ra - r, r - rb);
                (ha * db * db - hb * da * da + hm * (da * da - db * db)) / (da * db * (da + db))
            };
            let nt = 0.5 * (log_m[k - 1] - log_m[k + 1]) / (ra.ln() - rb.ln());
            (Some(fd), Some(nt))
        } else {
            (None, None)
        };
        // left side is (n - 2) ∫|Dw|² = 0 in the plane
        let lhs = (DIM as f64 - 2.0) * d;
        let rellich = if d.abs() < 1e-14 { None } else { Some((lhs - rellich_rhs).abs() / d.abs()) };
        rows.push(FrequencyRow {
            r,
            h: hr,
            e1,
            e2,
            h_tilde: h_tilde[k],
            d,
            h_tilde_prime_fd: fd,
            h_tilde_prime_identity: 2.0 * r * d / r.powi(DIM as i32),
            n_tilde: nt,
            truncation_active: h_tilde[k] < r.powf(expo),
            rellich_residual: rellich,
            eps_ratio: hr.max(0.0).sqrt() / r / r.powf(0.5 + cfg.sigma / 20.0),
        });
    }

    let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.n_tilde.map(|v| (r.r, v))).collect();
    let violations = monotonicity_audit(&pairs, cfg.c_mono, cfg.sigma, cfg.mono_tol);
    let n_tilde_small = pairs.last().map(|p| p.1);
    let fit = homogeneity_fit(&rows).ok();
    let growth_slope = {
        let r_min = rows.last().map(|r| r.r).unwrap_or(0.0);
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.r <= 10.0 * r_min * (1.0 + 1e-9) && r.h > 0.0).map(|r| (r.r.ln(), r.h.ln())).collect();
        if pts.len() >= 2 {
            Some(least_squares(&pts).0)
        } else {
            None
        }
    };
    let mut c0: Option<f64> = None;
    let mut nonpositive = 0;
    for r in rows.iter().filter(|r| !r.truncation_active) {
        let v = r.h_tilde_prime_identity;
        if v <= 0.0 {
            nonpositive += 1;
        }
        let ratio = v / r.r.powf(2.0 + cfg.sigma / 10.0);
        c0 = Some(c0.map_or(ratio, |c| c.min(ratio)));
    }
    Ok(FrequencyReport {
        rows,
        sigma: cfg.sigma,
        c_mono: cfg.c_mono,
        mono_tol: cfg.mono_tol,
        violations,
        n_tilde_small,
        degree: fit.map(|f| f.0),
        degree_residual: fit.map(|f| f.1),
        growth_slope,
        c0,
        nonpositive_derivative: nonpositive,
        skipped_segments: prep.skipped_segments,
    })
}

/// `Ñ` by a centred difference in `ln r` over three consecutive rows given
/// as `(r, H̃)` with decreasing `r`; `None` at the ends. Also returns the
/// truncation flags.
pub fn compute_ntilde(rows: &[(f64, f64)], sigma: f64) -> Result<Vec<(Option<f64>, bool)>> {
    if rows.len() < 3 {
        return Err(LabError::Arity {
            what: "truncated frequency",
            need: 3,
            got: rows.len(),
        });
    }
    let expo = 3.0 + sigma / 10.0;
    let lm: Vec<f64> = rows.iter().map(|&(r, ht)| ht.max(r.powf(expo)).ln()).collect();
    Ok((0..rows.len())
        .map(|k| {
            let active = rows[k].1 < rows[k].0.powf(expo);
            if k == 0 || k + 1 == rows.len() {
                (None, active)
            } else {
                let v = 0.5 * (lm[k - 1] - lm[k + 1]) / (rows[k - 1].0.ln() - rows[k + 1].0.ln());
                (Some(v), active)
            }
        })
        .collect())
}

/// Pairs `(r, Ñ(r))` in any order. A violation is a pair of consecutive
/// radii `r < r'` with `(1 + C r'^{σ/10}) Ñ(r') < (1 + C r^{σ/10}) Ñ(r) - tol`.
pub fn monotonicity_audit(pairs: &[(f64, f64)], c_mono: f64, sigma: f64, tol: f64) -> Vec<Violation> {
    let mut p = pairs.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    let f = |(r, n): (f64, f64)| (1.0 + c_mono * r.powf(sigma / 10.0)) * n;
    p.windows(2)
        .filter_map(|w| {
            let drop = f(w[0]) - f(w[1]);
            (drop > tol).then_some(Violation {
                r_small: w[0].0,
                r_large: w[1].0,
                drop,
            })
        })
        .collect()
}

/// Smallest `C` in `{0, 1, 2, 4, 8}` that removes every violation from all
/// the given `(r, Ñ)` sequences.
pub fn calibrate_c_mono(corpus: &[Vec<(f64, f64)>], sigma: f64, tol: f64) -> Option<f64> {
    [0.0, 1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .find(|&c| corpus.iter().all(|p| monotonicity_audit(p, c, sigma, tol).is_empty()))
}

/// Least-squares `(slope, intercept, rms residual)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Homogeneity degree `d` from `H(r) ∝ r^{2d}`: half the log-log slope of
/// `H`. Returns `(degree, rms residual of the fit)`.
pub fn homogeneity_fit(rows: &[FrequencyRow]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.h > 0.0).map(|r| (r.r.ln(), r.h.ln())).collect();
    homogeneity_fit_points(&pts)
}

/// As [`homogeneity_fit`] on `(ln r, ln H)` points.
pub fn homogeneity_fit_points(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 5 {
        return Err(LabError::Arity {
            what: "homogeneity fit",
            need: 5,
            got: pts.len(),
        });
    }
    let (slope, _, rms) = least_squares(pts);
    Ok((slope / 2.0, rms))
}

/// Relative residual of the integrated Rellich identity at radius `r`.
pub fn rellich_residual(input: FrequencyInput<'_>, r: f64) -> Result<f64> {
    let prep = Prepared::new(input)?;
    let d = ball_integral(&prep.grad_sq, r, input.region)?;
    if d.abs() < 1e-14 {
        return Err(LabError::DegenerateScale { r, value: d });
    }
    let rhs = r * circle_integral(&prep.radial_term, r, input.region)? + prep.rellich_boundary(r);
    Ok(((DIM as f64 - 2.0) * d - rhs).abs() / d.abs())
}

#[derive(Clone, Debug)]
pub struct Blowup {
    /// `w_r(x) = w(r x) / H(r)^{1/2}`.
    pub w: ScalarField,
    /// `u_r(x) = u(r x) / r` when a positivity field was supplied.
    pub u: Option<ScalarField>,
    /// `ε_r = H(r)^{1/2} / r`.
    pub eps_r: f64,
    pub sup_norm: f64,
    /// `(∫ w_r² + |Dw_r|²)^{1/2}` over the blowup grid.
    pub h1_norm: f64,
}

/// Rescale to the unit half-disk. The target grid has `cells` cells per
/// unit length and extends two cells beyond radius 1.
pub fn blowup(w: &ScalarField, u: Option<&ScalarField>, region: Region<'_>, r: f64, cells: usize) -> Result<Blowup> {
    let hr = compute_h(w, region, r)?;
    if !(hr > 0.0) {
        return Err(LabError::DegenerateScale { r, value: hr });
    }
    if cells < 16 {
        return Err(LabError::Argument(format!("blowup grid needs at least 16 cells, got {cells}")));
    }
    let hb = 1.0 / cells as f64;
    let spec = GridSpec::new(1.0 + 2.0 * hb, hb, Shape::HalfDisk)?;
    let geo = crate::grid::DomainGeometry::new(spec, crate::grid::Polynomial::zero())?;
    let scale = hr.sqrt();
    let resample = |f: &ScalarField, div: f64| -> Result<ScalarField> {
        let mut mask = geo.mask().to_vec();
        let values = (0..spec.len())
            .map(|k| {
                let p = spec.point(k);
                let q = [r * p[0], r * p[1]];
                match (mask[k] && f.covers(q)).then(|| f.interpolate(q)).flatten() {
                    Some(v) => v / div,
                    None => {
                        mask[k] = false;
                        f64::NAN
                    }
                }
            })
            .collect::<Vec<_>>();
        ScalarField::new(spec, values, mask)
    };
    let wb = resample(w, scale)?;
    let ub = u.map(|u| resample(u, r)).transpose()?;
    let (gx, gy) = gradient(&wb)?;
    let energy = wb.zip_map(&gx, |a, b| a * a + b * b)?.zip_map(&gy, |a, b| a + b * b)?;
    let h1 = (energy.masked_values().sum::<f64>() * hb * hb).sqrt();
    Ok(Blowup {
        sup_norm: wb.max_abs(),
        w: wb,
        u: ub,
        eps_r: scale / r,
        h1_norm: h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainGeometry;
    use crate::oracle::signorini_profile_at;
    use std::f64::consts::PI;

    fn half_disk(h: f64) -> DomainGeometry {
        DomainGeometry::half_disk(1.0, h).unwrap()
    }

    #[test]
    fn h_of_plane_and_profile() {
        let geo = half_disk(1.0 / 128.0);
        let x2 = geo.field_from_fn(|p| p[1]).unwrap();
        let ws = geo.field_from_fn(signorini_profile_at).unwrap();
        for r in [0.125, 0.25, 0.5] {
            let a = compute_h(&x2, Region::Domain, r).unwrap();
            assert!((a / (0.5 * PI * r * r) - 1.0).abs() < 5e-3, "{a}");
            let b = compute_h(&ws, Region::Domain, r).unwrap();
            assert!((b / (0.5 * PI * r.powi(3)) - 1.0).abs() < 5e-3, "{b}");
        }
        assert_eq!(compute_h(&geo.zeros().unwrap(), Region::Domain, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn corrections_vanish_on_a_flat_boundary() {
        let h = 1.0 / 64.0;
        let geo = half_disk(h);
        let x2 = geo.field_from_fn(|p| p[1]).unwrap();
        let dia = [BoundaryCurve::diameter(1.0 - 2.0 * h, h)];
        let input = FrequencyInput {
            w: &x2,
            region: Region::Domain,
            boundary: &dia,
            layer: 0.0,
        };
        let (e1, e2) = compute_corrections(input, 0.5).unwrap();
        assert!(e1.abs() < 1e-14 && e2.abs() < 1e-14, "{e1} {e2}");
        assert!(compute_corrections(input, 1.0).is_err());
    }

    #[test]
    fn segment_clipping() {
        let (t0, t1) = inside_interval([-2.0, 0.0], [2.0, 0.0], 1.0);
        assert!((t0 - 0.25).abs() < 1e-15 && (t1 - 0.75).abs() < 1e-15);
        assert_eq!(inside_interval([2.0, 2.0], [3.0, 2.0], 1.0), (0.0, 0.0));
        assert_eq!(crossings([0.0, 0.0], [2.0, 0.0], 1.0), vec![0.5]);
    }

    #[test]
    fn ntilde_of_synthetic_powers() {
        let sigma = 0.1;
        let expo = 3.0 + sigma / 10.0;
        let radii: Vec<f64> = (0..8).map(|k| 0.25 * 2f64.powf(-0.25 * k as f64)).collect();
        let trunc: Vec<(f64, f64)> = radii.iter().map(|&r| (r, r.powf(expo))).collect();
        for (v, active) in compute_ntilde(&trunc, sigma).unwrap().into_iter().filter(|e| e.0.is_some()) {
            assert!((v.unwrap() - expo / 2.0).abs() < 1e-12);
            assert!(!active);
        }
        let x2: Vec<(f64, f64)> = radii.iter().map(|&r| (r, 0.5 * PI * r * r)).collect();
        for (v, _) in compute_ntilde(&x2, sigma).unwrap().into_iter().filter(|e| e.0.is_some()) {
            assert!((v.unwrap() - 1.0).abs() < 1e-12);
        }
        // tiny H̃ selects the power term
        let tiny: Vec<(f64, f64)> = radii.iter().map(|&r| (r, 1e-9 * r.powi(4))).collect();
        assert!(compute_ntilde(&tiny, sigma).unwrap().iter().all(|e| e.1));
        assert!(matches!(compute_ntilde(&x2[..2], sigma), Err(LabError::Arity { .. })));
    }

    #[test]
    fn audit_flags_a_decreasing_sequence() {
        let pairs: Vec<(f64, f64)> =
            (0..8).map(|k| (0.25 * 2f64.powf(0.25 * k as f64), 2.0 - k as f64 / 10.0)).collect();
        assert_eq!(monotonicity_audit(&pairs, 0.0, 0.1, 0.02).len(), 7);
        let flat: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0, 1.5)).collect();
        assert!(monotonicity_audit(&flat, 0.0, 0.1, 0.02).is_empty());
        assert_eq!(calibrate_c_mono(&[flat], 0.1, 0.02), Some(0.0));
    }

    #[test]
    fn degree_is_half_the_slope() {
        let pts = |e: f64| -> Vec<(f64, f64)> { (0..6).map(|k| (-(k as f64), -(k as f64) * e)).collect() };
        let (d, res) = homogeneity_fit_points(&pts(3.0)).unwrap();
        assert!((d - 1.5).abs() < 1e-12 && res < 1e-12);
        assert!((homogeneity_fit_points(&pts(2.0)).unwrap().0 - 1.0).abs() < 1e-12);
        assert!((homogeneity_fit_points(&pts(5.0)).unwrap().0 - 2.5).abs() < 1e-12);
        assert!(homogeneity_fit_points(&pts(3.0)[..4]).is_err());
    }

    #[test]
    fn rellich_controls() {
        let h = 1.0 / 64.0;
        let geo = half_disk(h);
        let dia = [BoundaryCurve::diameter(1.0 - 2.0 * h, h)];
        let res = |f: &ScalarField| {
            rellich_residual(
                FrequencyInput {
                    w: f,
                    region: Region::Domain,
                    boundary: &dia,
                    layer: 0.0,
                },
                0.5,
            )
            .unwrap()
        };
        assert!(res(&geo.field_from_fn(|p| p[1]).unwrap()) < 2.0 * h);
        assert!(res(&geo.field_from_fn(|p| p[0] * p[0]).unwrap()) > 0.3);
    }

    #[test]
    fn blowup_normalizes_h() {
        let geo = half_disk(1.0 / 128.0);
        let x2 = geo.field_from_fn(|p| p[1]).unwrap();
        let b = blowup(&x2, None, Region::Domain, 0.25, 32).unwrap();
        let h1 = compute_h(&b.w, Region::Domain, 1.0).unwrap();
        assert!((h1 - 1.0).abs() < 1e-3, "{h1}");
        let k = b.w.spec().index(0, 16).unwrap();
        assert!((b.w.at(k) - 0.5 * (2.0 / PI).sqrt()).abs() < 1e-3);
        assert!(matches!(
            blowup(&geo.zeros().unwrap(), None, Region::Domain, 0.25, 32),
            Err(LabError::DegenerateScale { .. })
        ));
    }
}

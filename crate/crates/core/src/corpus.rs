//! Problem builders for the reference cases used by the suites, the
//! examples and the acceptance tests.

use crate::config::{DataKind, QSource, SolverConfig};
use crate::error::{LabError, Result};
use crate::grid::{read_dump, CoefficientField, DomainGeometry, Point, ScalarField};
use crate::onephase::OnePhaseProblem;
use crate::oracle::{example_q_at, example_u_at, signorini_profile_at};

/// Boundary data of the given kind at `p`.
pub fn data_value(kind: DataKind, shift: f64, p: Point) -> f64 {
    match kind {
        DataKind::Example => example_u_at(p),
        DataKind::Plane => p[1],
        DataKind::ShiftedPlane => (p[1] - shift).max(0.0),
        DataKind::Signorini => signorini_profile_at(p),
        DataKind::NegPlane => -p[1],
        DataKind::Lifted => shift + p[1],
    }
}

/// Identity coefficients with `Q` taken from the configuration.
pub fn coefficients(geo: &DomainGeometry, q: &QSource) -> Result<CoefficientField> {
    let spec = *geo.spec();
    match q {
        QSource::Constant(c) => CoefficientField::identity(spec, geo.mask(), |_| *c),
        QSource::Example => {
            let q = ScalarField::from_fn(spec, geo.mask(), |p| example_q_at(p).unwrap_or(f64::NAN))?;
            CoefficientField::new(
                ScalarField::constant(spec, geo.mask(), 1.0)?,
                ScalarField::constant(spec, geo.mask(), 0.0)?,
                ScalarField::constant(spec, geo.mask(), 1.0)?,
                q,
                1.0,
            )
        }
        QSource::File(path) => {
            let file = std::fs::File::open(path)?;
            let (_, q) = read_dump(std::io::BufReader::new(file))?;
            if !q.spec().same_lattice(&spec) {
                return Err(LabError::Config(format!("Q dump {path} does not match the configured grid")));
            }
            CoefficientField::new(
                ScalarField::constant(spec, geo.mask(), 1.0)?,
                ScalarField::constant(spec, geo.mask(), 0.0)?,
                ScalarField::constant(spec, geo.mask(), 1.0)?,
                q.restrict(geo.mask())?,
                1.0,
            )
        }
    }
}

/// One-phase problem described by `cfg`.
pub fn onephase_problem(cfg: &SolverConfig) -> Result<OnePhaseProblem> {
    let geo = cfg.geometry()?;
    let coeff = coefficients(&geo, &cfg.q)?;
    let (kind, shift) = (cfg.data_kind, cfg.data_shift);
    let data = geo.field_from_fn(|p| {
        if geo.height_above(p) <= 0.0 {
            0.0
        } else {
            data_value(kind, shift, p)
        }
    })?;
    OnePhaseProblem::new(geo, coeff, data)
}

/// The example on `B_R⁺` with its own `Q`.
pub fn example_problem(h: f64, radius: f64) -> Result<OnePhaseProblem> {
    let cfg = SolverConfig {
        h,
        radius,
        data_kind: DataKind::Example,
        q: QSource::Example,
        ..SolverConfig::default()
    };
    onephase_problem(&cfg)
}

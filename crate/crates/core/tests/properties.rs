use proptest::prelude::*;

use fb_lab::config::SolverConfig;
use fb_lab::frequency::compute_ntilde;
use fb_lab::grid::{ball_integral, circle_integral, DomainGeometry, Region, ScalarField};
use fb_lab::onephase::FreeBoundarySet;
use fb_lab::plot::{emit_plot, PlotKind, Series};
use fb_lab::regularity::{fb_exponent_fit, harnack_dichotomy_check, measure_flatness, Dichotomy, Frame};

fn geo() -> DomainGeometry {
    DomainGeometry::half_disk(1.0, 1.0 / 32.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_is_linear_and_deterministic(a in -3.0..3.0f64, b in -3.0..3.0f64, r in 0.2..0.9f64) {
        let g = geo();
        let f = g.field_from_fn(|p| p[0] * p[0] + p[1]).unwrap();
        let k = g.field_from_fn(|p| (p[0] - p[1]).cos()).unwrap();
        let mix = f.zip_map(&k, |x, y| a * x + b * y).unwrap();
        let q = |f: &ScalarField, ball: bool| {
            if ball { ball_integral(f, r, Region::Domain) } else { circle_integral(f, r, Region::Domain) }.unwrap()
        };
        for ball in [true, false] {
            let lhs = q(&mix, ball);
            let rhs = a * q(&f, ball) + b * q(&k, ball);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            prop_assert_eq!(q(&mix, ball).to_bits(), lhs.to_bits());
        }
    }

    #[test]
    fn flatness_is_monotone_in_u(s in 0.0..0.1f64, bump in 0.0..0.2f64, cx in -0.3..0.3f64) {
        let g = geo();
        let u = g.field_from_fn(|p| (p[1] + s).max(0.0)).unwrap();
        let v = u.map(|p, x| x + bump * (-(8.0 * ((p[0] - cx).powi(2) + p[1] * p[1]))).exp()).unwrap();
        let frame = Frame::new([0.0, 0.0], [0.0, 1.0]).unwrap();
        let fu = measure_flatness(&u, &frame, 0.5).unwrap();
        let fv = measure_flatness(&v, &frame, 0.5).unwrap();
        prop_assert!(fu.upper <= fv.upper + 1e-12);
    }

    #[test]
    fn exponent_fit_recovers_power_laws(gamma in 1.0..2.0f64, c in 0.2..2.0f64) {
        let h = 1.0 / 256.0;
        let line: Vec<[f64; 2]> = (0..=200).map(|k| {
            let x = -0.1 + 0.4 * k as f64 / 200.0;
            [x, if x > 0.0 { c * x.powf(gamma) } else { 0.0 }]
        }).collect();
        let fb = FreeBoundarySet::from_polylines(vec![line], h, 0);
        let fit = fb_exponent_fit(&fb, [0.0, 0.0], 0.25).unwrap();
        prop_assert!((fit.exponent - gamma).abs() < 1e-6, "{} vs {gamma}", fit.exponent);
        prop_assert!(fit.residual < 1e-9);
    }

    #[test]
    fn shifted_planes_never_violate_the_dichotomy(s in 1e-3..0.05f64, up in any::<bool>(), theta in 0.0..1.0f64) {
        let g = geo();
        let shift = if up { s } else { -s };
        let u = g.field_from_fn(|p| (p[1] + shift).max(0.0)).unwrap();
        let frame = Frame::new([0.0, 0.0], [0.0, 1.0]).unwrap();
        let rep = harnack_dichotomy_check(&u, &frame, s, s, 0.5, theta, 0.75).unwrap();
        prop_assert_ne!(rep.outcome, Dichotomy::Violation);
    }

    #[test]
    fn ntilde_of_a_power_is_half_the_exponent(p in 0.5..3.0f64, c in 1.0..10.0f64) {
        let rows: Vec<(f64, f64)> = (0..12).map(|k| {
            let r = 0.25 * 2f64.powf(-0.25 * k as f64);
            (r, c * r.powf(p))
        }).collect();
        let nt = compute_ntilde(&rows, 0.1).unwrap();
        for (n, truncated) in &nt[1..nt.len() - 1] {
            prop_assert!(!truncated);
            prop_assert!((n.unwrap() - 0.5 * p).abs() < 1e-9);
        }
        prop_assert!(nt[0].0.is_none() && nt[nt.len() - 1].0.is_none());
    }

    #[test]
    fn config_round_trips_through_its_text_form(k in 5u32..10, theta in 1e-3..0.5f64, sigma in 0.01..0.49f64) {
        let mut cfg = SolverConfig::default();
        cfg.set("grid.h", &format!("{}", 2f64.powi(-(k as i32)))).unwrap();
        cfg.set("regularity.theta", &theta.to_string()).unwrap();
        cfg.set("frequency.sigma", &sigma.to_string()).unwrap();
        let back = SolverConfig::from_kv(&cfg.to_kv()).unwrap();
        prop_assert_eq!(back.to_kv(), cfg.to_kv());
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_ne!(cfg.hash(), SolverConfig::default().with_h(1.0 / 3.0).hash());
    }

    #[test]
    fn plots_are_deterministic(pts in prop::collection::vec((1e-3..1.0f64, 1e-3..1.0f64), 2..40)) {
        let a = emit_plot("t", &[Series::new("s", pts.clone())], PlotKind::LogLog).unwrap();
        let b = emit_plot("t", &[Series::new("s", pts)], PlotKind::LogLog).unwrap();
        prop_assert_eq!(a, b);
    }
}

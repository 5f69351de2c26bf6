use fibertwist::expr;
use fibertwist::forward::solve_forward;
use fibertwist::interp::interpolate;
use fibertwist::invert::error_metrics;
use fibertwist::model::diagonal_ratio;
use fibertwist::sideways::{solve_sideways, SidewaysData};
use fibertwist::{CoefficientProfile, Grid, Interpolation, ModelParams, SolverOptions, Vec4};
use proptest::prelude::*;

fn grid(c: f64, n: usize) -> Grid {
    Grid::new(ModelParams::new(c, 1.0).unwrap(), n).unwrap()
}

fn quadratic(g: &Grid, a: f64, b: f64, d: f64) -> CoefficientProfile {
    CoefficientProfile::from_fn(0.0, 1.0, g.h(), |z| a + b * z + d * z * z).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diagonal_keeps_closure_ratio(c in 0.1f64..0.9, a in -2.0f64..2.0, b in -2.0f64..2.0, d in -2.0f64..2.0) {
        let g = grid(c, 16);
        let f = solve_forward(&g, &quadratic(&g, a, b, d), &SolverOptions::default()).unwrap();
        let ratio = diagonal_ratio(c);
        // The corner takes the boundary value m4 = 0 instead.
        for i in 1..=g.n() {
            let m = f.field.get(i, i).unwrap();
            prop_assert_eq!(m[0], 0.0);
            prop_assert!((m[2] - ratio * m[3]).abs() <= 1e-12 * m[2].abs().max(1.0));
        }
    }

    #[test]
    fn boundary_conditions_hold(c in 0.1f64..0.9, a in -2.0f64..2.0, d in -2.0f64..2.0) {
        let g = grid(c, 16);
        let f = solve_forward(&g, &quadratic(&g, a, 0.0, d), &SolverOptions::default()).unwrap();
        for j in 1..g.levels() {
            let m = f.field.get(0, j).unwrap();
            prop_assert_eq!((m[1], m[3]), (0.0, 0.0));
        }
        prop_assert_eq!(f.trace.len(), 2 * g.n() + 1);
    }

    #[test]
    fn negating_twist_flips_odd_components(b in -3.0f64..3.0, d in -3.0f64..3.0) {
        // B only couples (m1, m2) with (m3, m4), so beta -> -beta maps
        // m to (m1, m2, -m3, -m4).
        let g = grid(0.5, 16);
        let p = quadratic(&g, 0.0, b, d);
        let q = quadratic(&g, 0.0, -b, -d);
        let fp = solve_forward(&g, &p, &SolverOptions::default()).unwrap();
        let fq = solve_forward(&g, &q, &SolverOptions::default()).unwrap();
        for (i, j, m) in fp.field.nodes() {
            let n = fq.field.get(i, j).unwrap();
            let s = 1e-12 * m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            prop_assert!((m[0] - n[0]).abs() <= s && (m[1] - n[1]).abs() <= s);
            prop_assert!((m[2] + n[2]).abs() <= s && (m[3] + n[3]).abs() <= s);
        }
    }

    #[test]
    fn sideways_is_linear_in_data(wa in -2.0f64..2.0, wb in -2.0f64..2.0, seed in 0u64..1000) {
        let g = grid(0.5, 16);
        let len = g.column_top(0) + 1;
        let wave = |k: usize, s: f64| -> Vec4 {
            let t = k as f64 * g.h();
            [(s + t).sin(), 0.0, (2.0 * s * t).cos(), 0.0]
        };
        let s = seed as f64 * 1e-3;
        let d1 = SidewaysData::new(&g, 0, (0..len).map(|k| wave(k, s)).collect()).unwrap();
        let d2 = SidewaysData::new(&g, 0, (0..len).map(|k| wave(k, 1.0 - s)).collect()).unwrap();
        let beta = quadratic(&g, 0.2, 1.0, -0.5).slice(0, g.sensing_columns());
        let o = SolverOptions::default();
        let f1 = solve_sideways(&g, &beta, &d1, &o).unwrap();
        let f2 = solve_sideways(&g, &beta, &d2, &o).unwrap();
        let f = solve_sideways(&g, &beta, &d1.combine(&d2, wa, wb), &o).unwrap();
        for (i, j, v) in f.nodes() {
            let (a, b) = (f1.get(i, j).unwrap(), f2.get(i, j).unwrap());
            for k in 0..4 {
                prop_assert!((v[k] - wa * a[k] - wb * b[k]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics(c0 in -5.0f64..5.0, c3 in -1.0f64..1.0, pos in 0.0f64..9.0) {
        let f = |x: f64| c0 + 0.5 * x - 0.25 * x * x + c3 * x * x * x;
        let v: Vec<f64> = (0..10).map(|k| f(k as f64)).collect();
        prop_assert!((interpolate(&v, pos, Interpolation::Cubic) - f(pos)).abs() <= 1e-9 * (1.0 + f(pos).abs()));
    }

    #[test]
    fn metrics_vanish_on_identical_profiles(a in 0.1f64..5.0, w in 0.5f64..20.0) {
        let p = CoefficientProfile::from_fn(0.0, 1.0, 0.01, |z| a * (w * z).sin() + a).unwrap();
        let (e2, einf) = error_metrics(&p, &p).unwrap();
        prop_assert_eq!((e2, einf), (0.0, 0.0));
    }

    #[test]
    fn parser_matches_closed_forms(a in -3.0f64..3.0, z in 0.0f64..2.0) {
        let text = format!("{a}*sin(z)^2 + exp(-z)*log(z+1) - cos(2*z)");
        let got = expr::eval_str(&text, z).unwrap();
        let want = a * z.sin().powi(2) + (-z).exp() * (z + 1.0).ln() - (2.0 * z).cos();
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }
}

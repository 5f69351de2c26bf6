//! Crank-Nicolson solvers against their integral-equation oracles.

use fibertwist::diagnostics::check_energy_inequality;
use fibertwist::forward::{picard_forward, solve_forward};
use fibertwist::sideways::{picard_sideways, solve_sideways, SidewaysData};
use fibertwist::{CoefficientProfile, Grid, ModelParams, SolverOptions};
use std::f64::consts::FRAC_PI_2;

/// `(beta, C)` with `C = max|CN - Picard| / h` measured once at N = 32 and
/// rounded up; later runs must stay under `C h`.
const BATTERY: [(&str, f64); 3] = [
    ("z^2", 0.116),
    ("sin(z)^2*exp(-z)", 0.133),
    ("3*z^2*cos(10*z)*log(z+1)", 11.97),
];

/// Sideways differences this small are rounding, not discretization.
const ROUNDOFF: f64 = 1e-12;

fn setup(beta: &str, n: usize) -> (Grid, CoefficientProfile) {
    let g = Grid::new(ModelParams::new(0.5, FRAC_PI_2).unwrap(), n).unwrap();
    let b = CoefficientProfile::from_expr(beta, 0.0, FRAC_PI_2, g.h()).unwrap();
    (g, b)
}

fn forward_gap(beta: &str, n: usize) -> (f64, f64) {
    let (g, b) = setup(beta, n);
    let cn = solve_forward(&g, &b, &SolverOptions::default()).unwrap();
    let pic = picard_forward(&g, &b, 1e-13, 500).unwrap();
    (cn.field.max_abs_diff(&pic.field), g.h())
}

fn sideways_gap(beta: &str, n: usize) -> (f64, f64) {
    let (g, b) = setup(beta, n);
    let f = solve_forward(&g, &b, &SolverOptions::default()).unwrap();
    let data = SidewaysData::from_trace(&g, &f.trace).unwrap();
    let b = b.slice(0, g.sensing_columns());
    let cn = solve_sideways(&g, &b, &data, &SolverOptions::default()).unwrap();
    let pic = picard_sideways(&g, &b, &data, 1e-13, 500).unwrap();
    (cn.max_abs_diff(&pic), g.h())
}

#[test]
fn forward_matches_picard_within_frozen_constant() {
    for (beta, c) in BATTERY {
        let (d32, h32) = forward_gap(beta, 32);
        let (d64, h64) = forward_gap(beta, 64);
        assert!(d32 <= c * h32, "{beta}: {d32:e} > {c} h");
        assert!(d64 <= c * h64, "{beta}: {d64:e} > {c} h");
        assert!(d32 / d64 >= 1.5, "{beta}: {d32:e} -> {d64:e}");
    }
}

#[test]
fn sideways_matches_picard() {
    for (beta, c) in BATTERY {
        let (d32, h32) = sideways_gap(beta, 32);
        let (d64, _) = sideways_gap(beta, 64);
        assert!(d32 <= c * h32, "{beta}: {d32:e}");
        assert!(d64 <= ROUNDOFF || d32 / d64 >= 1.5, "{beta}: {d32:e} -> {d64:e}");
    }
}

#[test]
fn energy_inequality_on_battery() {
    for (beta, _) in BATTERY {
        for n in [32, 64] {
            let (g, b) = setup(beta, n);
            let f = solve_forward(&g, &b, &SolverOptions::default()).unwrap();
            let data = SidewaysData::from_trace(&g, &f.trace).unwrap();
            let b = b.slice(0, g.sensing_columns());
            let field = solve_sideways(&g, &b, &data, &SolverOptions::default()).unwrap();
            let r = check_energy_inequality(&field, &b, &g).unwrap();
            assert!(r.pass, "{beta} N={n}: margin {}", r.worst_margin);
        }
    }
}

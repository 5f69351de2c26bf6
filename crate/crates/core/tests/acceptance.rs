//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use fibertwist::diagnostics::{boundary_energy_balance, check_energy_inequality, check_linearization};
use fibertwist::forward::{forward_trace, picard_forward, solve_forward};
use fibertwist::invert::{reconstruct, ReconstructOptions, ReconstructionReport};
use fibertwist::model::diagonal_ratio;
use fibertwist::sideways::{picard_sideways, solve_sideways, SidewaysData};
use fibertwist::{expr, io, CoefficientProfile, Grid, ModelParams, SolverOptions};

const EX1: &str = "3*z^2*cos(10*z)*log(z+1)";
const EX2: &str = "z*sin(100*z)*log(z+1)";
const EX3: &str = "9*z^2*cos(100*z)*log(z+1)";

/// Battery for the oracle and energy checks, with the oracle constant `C`
/// frozen from the first calibrated run at N = 32.
const BATTERY: [(&str, f64); 3] = [("z^2", 0.116), ("sin(z)^2*exp(-z)", 0.133), (EX1, 11.97)];

/// Differences below this are rounding, not discretization.
const ROUNDOFF: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn grid(n: usize) -> Grid {
    Grid::new(ModelParams::new(0.5, FRAC_PI_2).unwrap(), n).unwrap()
}

fn profile(g: &Grid, beta: &str) -> CoefficientProfile {
    CoefficientProfile::from_expr(beta, 0.0, FRAC_PI_2, g.h()).unwrap()
}

/// Simulate the data for `beta` and reconstruct from `beta0 = z`.
fn run_example(beta: &str, n: usize) -> (ReconstructionReport, Duration) {
    let start = Instant::now();
    let g = grid(n);
    let exact = profile(&g, beta);
    let trace = forward_trace(&g, &exact, &SolverOptions::default()).unwrap();
    let b0 = CoefficientProfile::from_expr("z", 0.0, g.sensing_columns() as f64 * g.h(), g.h()).unwrap();
    let mut report = reconstruct(&trace, &g, &b0, &ReconstructOptions::default()).unwrap();
    if report.converged {
        report.compare(&exact).unwrap();
    }
    (report, start.elapsed())
}

fn within_factor_two(iterations: usize, reference: usize) -> bool {
    2 * iterations >= reference && iterations <= 2 * reference
}

fn criterion_1() -> Outcome {
    let (r, elapsed) = run_example(EX1, 512);
    let its = r.total_iterations();
    let e_inf = r.e_inf.unwrap_or(f64::INFINITY);
    let pass = r.converged && its <= 34 && e_inf <= 0.05 && elapsed < Duration::from_secs(60);
    Outcome { pass, detail: format!("N=512 converged={} iterations={its} E_inf={e_inf:.3e} time={elapsed:.2?}", r.converged) }
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, beta, reference) in [("ex2", EX2, 17), ("ex3", EX3, 14)] {
        let mut last = f64::INFINITY;
        let mut cells = Vec::new();
        for n in [64, 128, 256, 512] {
            let (r, _) = run_example(beta, n);
            let its = r.total_iterations();
            let e2 = r.e2.unwrap_or(f64::NAN);
            let ok = r.converged && e2 < last && within_factor_two(its, reference);
            pass &= ok;
            last = e2;
            cells.push(format!("N={n}:{its}it,E2={e2:.2e}{}", if ok { "" } else { "(x)" }));
        }
        parts.push(format!("{name} [{}]", cells.join(" ")));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_3() -> Outcome {
    let beta = |a: i32| format!("z*sin(100*z)*exp({a}*z)");
    let (a3, _) = run_example(&beta(3), 64);
    let (a6_coarse, _) = run_example(&beta(6), 64);
    let (a6_fine, _) = run_example(&beta(6), 2048);
    let pass = a3.converged && !a6_coarse.converged && a6_fine.converged;
    let state = |r: &ReconstructionReport| {
        if r.converged {
            format!("converged in {}", r.total_iterations())
        } else if r.diverged {
            format!("diverged after {}", r.total_iterations())
        } else {
            format!("stalled after {}", r.total_iterations())
        }
    };
    Outcome {
        pass,
        detail: format!(
            "a=3 N=64: {}; a=6 N=64: {}; a=6 N=2048: {}",
            state(&a3),
            state(&a6_coarse),
            state(&a6_fine)
        ),
    }
}

/// `(forward gap, sideways gap, h)` between the CN solvers and the oracles.
fn oracle_gaps(beta: &str, n: usize) -> (f64, f64, f64) {
    let g = grid(n);
    let b = profile(&g, beta);
    let opts = SolverOptions::default();
    let f = solve_forward(&g, &b, &opts).unwrap();
    let fwd = f.field.max_abs_diff(&picard_forward(&g, &b, 1e-13, 500).unwrap().field);
    let data = SidewaysData::from_trace(&g, &f.trace).unwrap();
    let b = b.slice(0, g.sensing_columns());
    let cn = solve_sideways(&g, &b, &data, &opts).unwrap();
    let side = cn.max_abs_diff(&picard_sideways(&g, &b, &data, 1e-13, 500).unwrap());
    (fwd, side, g.h())
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (beta, c) in BATTERY {
        let (f32, s32, h) = oracle_gaps(beta, 32);
        let (f64_, s64, _) = oracle_gaps(beta, 64);
        let ok = f32 <= c * h
            && s32 <= c * h
            && f32 / f64_ >= 1.5
            && (s64 <= ROUNDOFF || s32 / s64 >= 1.5);
        pass &= ok;
        parts.push(format!("{beta}: fwd {f32:.2e}->{f64_:.2e} side {s32:.1e}->{s64:.1e}"));
    }
    Outcome { pass, detail: format!("C h bound and >=1.5x shrink; {}", parts.join("; ")) }
}

fn criterion_5() -> Outcome {
    let opts = SolverOptions::default();
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut refinement = Vec::new();
    for (beta, _) in BATTERY {
        let mut residuals = Vec::new();
        for n in [32, 64, 128] {
            let g = grid(n);
            let b = profile(&g, beta);
            let f = solve_forward(&g, &b, &opts).unwrap();
            residuals.push(boundary_energy_balance(&f.field, &g).unwrap().residual);
            let data = SidewaysData::from_trace(&g, &f.trace).unwrap();
            let b = b.slice(0, g.sensing_columns());
            let side = solve_sideways(&g, &b, &data, &opts).unwrap();
            match check_energy_inequality(&side, &b, &g) {
                Ok(r) => {
                    pass &= r.pass;
                    worst = worst.max(r.worst_margin);
                }
                Err(_) => pass = false,
            }
        }
        let factors = [residuals[0] / residuals[1], residuals[1] / residuals[2]];
        pass &= factors.iter().all(|f| *f >= 1.5);
        refinement.push(format!("{beta}: x{:.2} x{:.2}", factors[0], factors[1]));
    }
    Outcome {
        pass,
        detail: format!("energy inequality worst margin {worst:.1e}; balance refinement {}", refinement.join(", ")),
    }
}

fn criterion_6() -> Outcome {
    let phi = expr::parse("z^2").unwrap();
    let r = check_linearization(&phi, &grid(256), &[1e-2, 1e-3, 1e-4], &SolverOptions::default()).unwrap();
    let fmt = |s: Option<f64>| s.map_or("exact".to_string(), |s| format!("{s:.3}"));
    Outcome { pass: r.pass, detail: format!("remainder slope {} (need >= 1.8), m1 slope {}", fmt(r.slope), fmt(r.m1_slope)) }
}

fn criterion_7() -> Outcome {
    let opts = SolverOptions::default();
    let mut fails = Vec::new();

    let g = grid(64);
    let zero = CoefficientProfile::zeros(0.0, g.h(), g.n() + 1);
    let f = solve_forward(&g, &zero, &opts).unwrap();
    let side = solve_sideways(&g, &zero.slice(0, g.sensing_columns()), &SidewaysData::zeros(&g, 0).unwrap(), &opts).unwrap();
    if f.field.values().iter().chain(side.values()).flatten().any(|v| v.to_bits() != 0) {
        fails.push("zero field");
    }

    let b = profile(&g, EX1);
    let f = solve_forward(&g, &b, &opts).unwrap();
    let ratio = diagonal_ratio(g.c());
    let closure = (1..=g.n())
        .map(|i| f.field.get(i, i).unwrap())
        .all(|m| (m[2] - ratio * m[3]).abs() <= 1e-12 * m[2].abs().max(1.0));
    if !closure {
        fails.push("diagonal closure");
    }

    let mut buf = Vec::new();
    io::write_trace(&mut buf, &f.trace).unwrap();
    let back = io::read_trace(buf.as_slice()).unwrap();
    let mut pbuf = Vec::new();
    io::write_profile(&mut pbuf, &b).unwrap();
    let pback = io::read_profile(pbuf.as_slice()).unwrap();
    if back.m1() != f.trace.m1() || back.m3() != f.trace.m3() || pback.samples() != b.samples() {
        fails.push("csv round trip");
    }

    let rerun = || {
        let (r, _) = run_example(EX1, 64);
        let mut out = Vec::new();
        io::write_trace(&mut out, &forward_trace(&g, &b, &opts).unwrap()).unwrap();
        io::write_profile(&mut out, &r.beta_app).unwrap();
        out
    };
    if rerun() != rerun() {
        fails.push("deterministic rerun");
    }

    let detail = if fails.is_empty() {
        "zero field, diagonal closure, csv round trip, reruns all exact".to_string()
    } else {
        format!("failed: {}", fails.join(", "))
    };
    Outcome { pass: fails.is_empty(), detail }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("example 1 reproduction", criterion_1),
        ("examples 2 and 3 over N", criterion_2),
        ("example 4 trend in a and N", criterion_3),
        ("oracle equivalence", criterion_4),
        ("energy suite", criterion_5),
        ("linearization order", criterion_6),
        ("exactness battery", criterion_7),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let out = check();
        failed += usize::from(!out.pass);
        println!("criterion {} ({name}): {}  {}", k + 1, if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

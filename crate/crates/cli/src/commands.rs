use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fibertwist::diagnostics::{
    boundary_energy_balance, check_divergence_identity, check_energy_inequality, check_linearization,
    check_stability_ratio,
};
use fibertwist::field::trapezoid;
use fibertwist::forward::{forward_trace, forward_trace_refined, picard_forward, solve_forward};
use fibertwist::invert::{reconstruct, ReconstructionReport};
use fibertwist::model::{transform_e_to_m, FieldJet};
use fibertwist::sideways::{check_matching, picard_sideways, solve_sideways, SidewaysData};
use fibertwist::{expr, io, BoundaryTrace, CoefficientProfile, Grid};

use crate::config::{BetaSource, RunConfig};
use crate::plot::{line_plot, Series};
use crate::NumericalFailure;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_with(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> fibertwist::Result<()>) -> Result<PathBuf> {
    let mut w = create(dir, name)?;
    f(&mut w).with_context(|| format!("writing {name}"))?;
    w.flush()?;
    Ok(dir.join(name))
}

/// Reflection data for the configured twist, on the run grid.
fn simulate_trace(cfg: &RunConfig, grid: &Grid) -> Result<BoundaryTrace> {
    let opts = cfg.solver();
    if cfg.refine_data == 1 {
        let beta = cfg.beta_profile(grid.h())?.ok_or_else(|| anyhow!("no twist configured (set beta)"))?;
        return Ok(forward_trace(grid, &beta, &opts)?);
    }
    if matches!(cfg.beta, Some(BetaSource::File(_))) {
        bail!("refine_data > 1 needs beta as an expression, not a sampled profile");
    }
    let fine_h = grid.h() / cfg.refine_data as f64;
    let beta = cfg.beta_profile(fine_h)?.ok_or_else(|| anyhow!("no twist configured (set beta)"))?;
    Ok(forward_trace_refined(grid, cfg.refine_data, &beta, &opts)?)
}

pub fn simulate(cfg: &RunConfig, field: bool) -> Result<()> {
    let grid = cfg.grid();
    let trace = simulate_trace(cfg, &grid)?;
    let path = write_with(&cfg.out, "trace.csv", |w| io::write_trace(w, &trace))?;
    let mut max_abs = trace.m1().iter().chain(trace.m3()).fold(0.0f64, |m, v| m.max(v.abs()));
    if field {
        let beta = cfg.beta_profile(grid.h())?.expect("checked by simulate_trace");
        let sol = solve_forward(&grid, &beta, &cfg.solver())?;
        max_abs = sol.field.max_abs();
        let p = write_with(&cfg.out, "field.csv", |w| io::write_field(w, &sol.field))?;
        println!("field: {}", p.display());
    }
    let energy: Vec<f64> = trace.m1().iter().zip(trace.m3()).map(|(a, b)| a * a + cfg.c * b * b).collect();
    println!(
        "grid: c = {}, Z = {}, N = {}, h = {:.6e}, sensing depth Y = {:.6}",
        cfg.c,
        cfg.z,
        cfg.n,
        grid.h(),
        grid.params().sensing_depth()
    );
    println!("max |m|: {max_abs:.6e}{}", if field { "" } else { " (trace only; pass --field for the whole field)" });
    println!("energy through z = 0, int (m1^2 + c m3^2) dt: {:.6e}", trapezoid(&energy, grid.h()));
    println!("trace: {} ({} rows)", path.display(), trace.len());
    Ok(())
}

fn read_trace_for(grid: &Grid, path: &Path) -> Result<BoundaryTrace> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let trace = io::read_trace(file).with_context(|| format!("reading {}", path.display()))?;
    if trace.n() != grid.n() {
        bail!(
            "{}: trace has {} rows but N = {} needs {}",
            path.display(),
            trace.len(),
            grid.n(),
            2 * grid.n() + 1
        );
    }
    if (trace.h() - grid.h()).abs() > 1e-9 * grid.h() {
        bail!("{}: trace spacing {} does not match Z/N = {}", path.display(), trace.h(), grid.h());
    }
    Ok(trace)
}

fn report_text(cfg: &RunConfig, r: &ReconstructionReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("mode: {}\n", r.mode));
    s.push_str(&format!("grid: c = {}, Z = {}, N = {}\n", cfg.c, cfg.z, cfg.n));
    s.push_str(&format!("tol: {:e}, max_iter: {}\n", cfg.tol, cfg.max_iter));
    s.push_str(&format!("converged: {}\n", r.converged));
    if r.diverged {
        s.push_str("diverged: iterates became non-finite\n");
    }
    s.push_str(&format!("segments: {}\n", r.segments.len()));
    s.push_str(&format!("iterations: {}\n", r.total_iterations()));
    for seg in &r.segments {
        let hist: Vec<String> = seg.history.iter().map(|d| format!("{d:.3e}")).collect();
        s.push_str(&format!(
            "segment {}..{}: {} iterations, converged {}, history [{}]\n",
            seg.first,
            seg.last,
            seg.iterations,
            seg.converged,
            hist.join(", ")
        ));
    }
    if let (Some(e2), Some(einf)) = (r.e2, r.e_inf) {
        s.push_str(&format!("E2: {e2:.6e}\nE_inf: {einf:.6e}\n"));
    }
    s
}

pub fn run_reconstruct(cfg: &RunConfig, trace_path: Option<&Path>) -> Result<()> {
    let grid = cfg.grid();
    let trace = match trace_path {
        Some(p) => read_trace_for(&grid, p)?,
        None => simulate_trace(cfg, &grid).context("no --trace given, so the data are simulated from beta")?,
    };
    let beta0 = cfg.beta0_profile(&grid)?;
    let mut report = reconstruct(&trace, &grid, &beta0, &cfg.reconstruct_options())?;
    let exact = cfg.beta_profile(grid.h())?;
    if let (Some(exact), true) = (&exact, report.converged) {
        report.compare(exact)?;
    }

    let app = &report.beta_app;
    write_with(&cfg.out, "beta_app.csv", |w| io::write_profile(w, app))?;
    let text = report_text(cfg, &report);
    fs::write(cfg.out.join("report.txt"), &text).context("writing report.txt")?;
    let z: Vec<f64> = (0..app.len()).map(|k| app.z_at(k)).collect();
    let mut series = Vec::new();
    match &exact {
        Some(exact) => {
            write_with(&cfg.out, "plot.csv", |w| io::write_comparison(w, exact, app))?;
            series.push(Series { label: "exact", color: "black", points: z.iter().copied().zip(exact.samples().iter().copied()).collect() });
        }
        None => {
            write_with(&cfg.out, "plot.csv", |w| {
                io::write_table(w, &["z", "beta_app"], (0..app.len()).map(|k| vec![z[k], app.samples()[k]]))
            })?;
        }
    }
    series.push(Series { label: "reconstructed", color: "#d0342c", points: z.iter().copied().zip(app.samples().iter().copied()).collect() });
    let title = format!("twist on [0, Y], N = {}", cfg.n);
    fs::write(cfg.out.join("plot.svg"), line_plot(&title, "z", "beta", &series)).context("writing plot.svg")?;

    print!("{text}");
    println!("outputs: {}", cfg.out.display());
    if !report.converged {
        return Err(NumericalFailure(format!(
            "reconstruction did not converge after {} iterations; partial outputs written",
            report.total_iterations()
        ))
        .into());
    }
    Ok(())
}

/// Differences at or below this are rounding, not discretization.
const ROUNDOFF: f64 = 1e-12;

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn shrinks(coarse: f64, fine: f64) -> bool {
    fine <= ROUNDOFF || coarse / fine >= 1.5
}

const BATTERY: [&str; 3] = ["z^2", "sin(z)^2*exp(-z)", "3*z^2*cos(10*z)*log(z+1)"];

fn verify_twist(cfg: &RunConfig, label: &str, beta_at: &dyn Fn(&Grid) -> Result<CoefficientProfile>) -> Result<Vec<Check>> {
    let opts = cfg.solver();
    let coarse = cfg.grid();
    let fine = fibertwist::Grid::new(cfg.params(), 2 * cfg.n)?;
    let mut checks = Vec::new();

    let mut fwd_gap = [0.0; 2];
    let mut side_gap = [0.0; 2];
    let mut div = [0.0; 2];
    let mut balance = [0.0; 2];
    for (k, g) in [&coarse, &fine].into_iter().enumerate() {
        let beta = beta_at(g)?;
        let sol = solve_forward(g, &beta, &opts)?;
        fwd_gap[k] = sol.field.max_abs_diff(&picard_forward(g, &beta, 1e-13, 1000)?.field);
        div[k] = check_divergence_identity(&sol.field, &sol.field, &beta, g);
        balance[k] = boundary_energy_balance(&sol.field, g)?.residual;
        let data = SidewaysData::from_trace(g, &sol.trace)?;
        let sensed = beta.slice(0, g.sensing_columns());
        let side = solve_sideways(g, &sensed, &data, &opts)?;
        side_gap[k] = side.max_abs_diff(&picard_sideways(g, &sensed, &data, 1e-13, 1000)?);
        if k == 0 {
            let energy = check_energy_inequality(&side, &sensed, g)?;
            checks.push(Check {
                name: format!("energy inequality ({label})"),
                pass: energy.pass,
                detail: format!("worst ratio {:.4}, margin {:.2e}", energy.worst_ratio, energy.worst_margin),
            });
            let scale = data.values().iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            let m = check_matching(&data, beta.samples()[0], g.c(), g.h() * scale);
            checks.push(Check {
                name: format!("corner matching ({label})"),
                pass: m.pass,
                detail: format!("r0 {:.2e}, r1 {:.2e}, tol {:.2e}", m.r0, m.r1, m.tol),
            });
            let bumped = CoefficientProfile::from_samples(beta.z0(), beta.h(), beta.samples().iter().map(|v| 1.01 * v + 1e-3).collect())?;
            let ratio = check_stability_ratio(&beta, &bumped, g, &opts)?;
            checks.push(Check { name: format!("stability ratio ({label})"), pass: ratio.is_finite(), detail: format!("{ratio:.4e} (recorded)") });
        }
    }
    let pairs = [
        ("forward oracle", fwd_gap),
        ("sideways oracle", side_gap),
        ("divergence identity", div),
        ("energy balance", balance),
    ];
    for (name, [a, b]) in pairs {
        checks.push(Check {
            name: format!("{name} ({label})"),
            pass: shrinks(a, b),
            detail: format!("N={}: {a:.3e}, N={}: {b:.3e}", cfg.n, 2 * cfg.n),
        });
    }

    let trace = forward_trace(&coarse, &beta_at(&coarse)?, &opts)?;
    let mut buf = Vec::new();
    io::write_trace(&mut buf, &trace)?;
    let back = io::read_trace(buf.as_slice())?;
    let exact = back.m1() == trace.m1() && back.m3() == trace.m3();
    checks.push(Check { name: format!("csv round trip ({label})"), pass: exact, detail: format!("{} rows", trace.len()) });
    Ok(checks)
}

pub fn verify(cfg: &RunConfig) -> Result<()> {
    let mut checks = Vec::new();
    match &cfg.beta {
        Some(BetaSource::Expr(text)) => {
            let text = text.clone();
            checks.extend(verify_twist(cfg, &text, &|g: &Grid| {
                Ok(CoefficientProfile::from_expr(&text, 0.0, cfg.z, g.h())?)
            })?);
        }
        Some(BetaSource::File(_)) => bail!("verify needs beta as an expression (it refines the grid)"),
        None => {
            for text in BATTERY {
                checks.extend(verify_twist(cfg, text, &|g: &Grid| {
                    Ok(CoefficientProfile::from_expr(text, 0.0, cfg.z, g.h())?)
                })?);
            }
        }
    }
    let phi = expr::parse("z^2")?;
    let lin = check_linearization(&phi, &cfg.grid(), &[1e-2, 1e-3, 1e-4], &cfg.solver())?;
    let slope = |s: Option<f64>| s.map_or("exact".to_string(), |s| format!("{s:.3}"));
    checks.push(Check {
        name: "linearization order (z^2)".into(),
        pass: lin.pass,
        detail: format!("remainder slope {}, m1 slope {}", slope(lin.slope), slope(lin.m1_slope)),
    });

    let mut failed = Vec::new();
    for c in &checks {
        println!("{}  {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.pass {
            failed.push(c.name.clone());
        }
    }
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(NumericalFailure(format!("failed checks: {}", failed.join("; "))).into())
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct TransformArgs {
    /// CSV with columns e1,e2,e1_z,e1_t,e2_z,e2_t,beta; one output row each.
    #[arg(long, conflicts_with_all = ["e1", "e2", "e1_z", "e1_t", "e2_z", "e2_t", "beta"])]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub e1: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub e2: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub e1_z: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub e1_t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub e2_z: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub e2_t: f64,
    /// Twist rate at the point.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Channel speeds.
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.5)]
    pub c2: f64,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const JET_HEADER: [&str; 7] = ["e1", "e2", "e1_z", "e1_t", "e2_z", "e2_t", "beta"];

pub fn transform(args: &TransformArgs) -> Result<()> {
    if !(args.c1 > 0.0 && args.c2 > 0.0) {
        bail!("channel speeds must be positive");
    }
    let rows: Vec<Vec<f64>> = match &args.input {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            io::read_table(file, &JET_HEADER).with_context(|| format!("reading {}", path.display()))?
        }
        None => vec![vec![args.e1, args.e2, args.e1_z, args.e1_t, args.e2_z, args.e2_t, args.beta]],
    };
    let out = rows.iter().map(|r| {
        let jet = FieldJet { e1: r[0], e2: r[1], e1_z: r[2], e1_t: r[3], e2_z: r[4], e2_t: r[5] };
        transform_e_to_m(&jet, r[6], args.c1, args.c2).to_vec()
    });
    let header = ["m1", "m2", "m3", "m4"];
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            io::write_table(BufWriter::new(file), &header, out)?;
        }
        None => io::write_table(std::io::stdout().lock(), &header, out)?,
    }
    Ok(())
}

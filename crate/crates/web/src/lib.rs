//! Browser bindings: simulate traces, reconstruct the twist, and convert a
//! field jet to characteristic variables.
//!
//! Errors come back as strings so the page can show them verbatim.

use fibertwist::invert::{self, ReconstructOptions};
use fibertwist::model::{transform_e_to_m, FieldJet};
use fibertwist::{forward, CoefficientProfile, Grid, ModelParams, SolverOptions};
use wasm_bindgen::prelude::*;

fn grid(c: f64, z: f64, n: usize) -> Result<Grid, String> {
    let params = ModelParams::new(c, z).map_err(|e| e.to_string())?;
    Grid::new(params, n).map_err(|e| e.to_string())
}

fn profile(text: &str, z1: f64, h: f64) -> Result<CoefficientProfile, String> {
    CoefficientProfile::from_expr(text, 0.0, z1, h).map_err(|e| format!("`{text}`: {e}"))
}

/// Reflection traces at `z = 0`.
#[wasm_bindgen]
#[derive(Debug)]
pub struct Traces {
    t: Vec<f64>,
    m1: Vec<f64>,
    m3: Vec<f64>,
}

#[wasm_bindgen]
impl Traces {
    #[wasm_bindgen(getter)]
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn m1(&self) -> Vec<f64> {
        self.m1.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn m3(&self) -> Vec<f64> {
        self.m3.clone()
    }
}

#[wasm_bindgen]
pub fn simulate(beta: &str, c: f64, z: f64, n: usize) -> Result<Traces, String> {
    let g = grid(c, z, n)?;
    let b = profile(beta, z, g.h())?;
    let trace = forward::forward_trace(&g, &b, &SolverOptions::default()).map_err(|e| e.to_string())?;
    Ok(Traces { t: (0..trace.len()).map(|k| trace.t_at(k)).collect(), m1: trace.m1().to_vec(), m3: trace.m3().to_vec() })
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Reconstruction {
    z: Vec<f64>,
    exact: Vec<f64>,
    approx: Vec<f64>,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
    e2: f64,
    e_inf: f64,
}

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn approx(&self) -> Vec<f64> {
        self.approx.clone()
    }

    /// Successive step sizes `||beta_{k+1} - beta_k||`.
    #[wasm_bindgen(getter)]
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    #[wasm_bindgen(getter)]
    pub fn e2(&self) -> f64 {
        self.e2
    }

    #[wasm_bindgen(getter)]
    pub fn e_inf(&self) -> f64 {
        self.e_inf
    }
}

/// Simulate data for `beta`, then recover it from the traces alone.
#[wasm_bindgen]
pub fn reconstruct(beta: &str, beta0: &str, c: f64, z: f64, n: usize, max_iter: usize) -> Result<Reconstruction, String> {
    let g = grid(c, z, n)?;
    let exact = profile(beta, z, g.h())?;
    let opts = ReconstructOptions { max_iter: max_iter.max(1), ..Default::default() };
    let trace = forward::forward_trace(&g, &exact, &opts.solver).map_err(|e| e.to_string())?;
    let guess = profile(beta0, g.sensing_columns() as f64 * g.h(), g.h())?;
    let mut report = invert::reconstruct(&trace, &g, &guess, &opts).map_err(|e| e.to_string())?;
    report.compare(&exact).map_err(|e| e.to_string())?;
    let app = &report.beta_app;
    Ok(Reconstruction {
        z: (0..app.len()).map(|k| app.z_at(k)).collect(),
        exact: exact.samples()[..app.len()].to_vec(),
        approx: app.samples().to_vec(),
        history: report.segments.iter().flat_map(|s| s.history.iter().copied()).collect(),
        iterations: report.total_iterations(),
        converged: report.converged,
        e2: report.e2.unwrap_or(f64::NAN),
        e_inf: report.e_inf.unwrap_or(f64::NAN),
    })
}

/// `(m1, m2, m3, m4)` from the two field components and their derivatives.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn transform(e1: f64, e2: f64, e1_z: f64, e1_t: f64, e2_z: f64, e2_t: f64, beta: f64, c1: f64, c2: f64) -> Result<Vec<f64>, String> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(format!("channel speeds must be positive, got c1 = {c1}, c2 = {c2}"));
    }
    Ok(transform_e_to_m(&FieldJet { e1, e2, e1_z, e1_t, e2_z, e2_t }, beta, c1, c2).to_vec())
}

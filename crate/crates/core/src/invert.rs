//! Twist reconstruction by fixed-point iteration of
//! `Q(beta)(z) = 2(c+1)/(c-1) h3(z, z)`, where `h` solves the sideways
//! problem with coefficient `beta` and the measured data.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::BoundaryTrace;
use crate::forward::SolverOptions;
use crate::model::{eps_star, CoefficientProfile, Grid, ModelParams};
use crate::sideways::{self, SidewaysData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Iterate over the whole sensing interval at once.
    #[default]
    GlobalIteration,
    /// Advance in segments whose length comes from [`segment_constants`].
    TheoryStepped,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" | "global-iteration" => Ok(Mode::GlobalIteration),
            "stepped" | "theory-stepped" => Ok(Mode::TheoryStepped),
            _ => Err(Error::InvalidParameter(format!(
                "unknown mode {s:?} (expected global-iteration or theory-stepped)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::GlobalIteration => "global-iteration",
            Mode::TheoryStepped => "theory-stepped",
        })
    }
}

/// Constants governing one local reconstruction segment starting at `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConstants {
    pub epsilon: f64,
    /// Weighted energy of the data on the segment.
    pub j_x: f64,
    /// Squared radius of the ball the iterates live in.
    pub k_x: f64,
    pub delta: f64,
    pub lambda: f64,
    pub sigma: f64,
    /// Step size that works for every `X` given the a priori bound.
    pub delta_star: f64,
}

/// Segment constants for data at `X = data.x()` and a priori bound
/// `||beta||^2 <= k` on `[0, Y]`.
///
/// The ball radius is the larger of `k` and `8(1+c)^2/(1-c)^2 J_X`; with
/// zero data `delta` is the whole remaining interval.
pub fn segment_constants(data: &SidewaysData, k: f64, params: &ModelParams) -> SegmentConstants {
    let c = params.c();
    let eps = eps_star(c);
    let y = params.sensing_depth();
    let ratio = ((1.0 + c) / (1.0 - c)).powi(2);
    let j_x = data.weighted_energy(c, eps);
    let k_x = (8.0 * ratio * j_x).max(k);
    let rest = (y - data.x()).max(0.0);
    let delta = if k_x > 0.0 { rest.min(c * c * eps * eps / (256.0 * k_x)) } else { rest };
    let lambda = if j_x > 0.0 {
        c * eps / (64.0 * ratio * j_x) * (-4.0 * (k_x * delta).sqrt() / (c * eps)).exp()
    } else {
        f64::INFINITY
    };
    let delta_star =
        c * c * eps * eps / (2048.0 * ratio) * (-4.0 * (k.max(0.0) * y).sqrt() / (c * eps)).exp();
    SegmentConstants { epsilon: eps, j_x, k_x, delta, lambda, sigma: 0.5, delta_star }
}

/// One application of the map: solve sideways with `beta_guess` on the
/// columns it covers and scale the diagonal slow left mover.
pub fn q_map(
    beta_guess: &CoefficientProfile,
    data: &SidewaysData,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<CoefficientProfile> {
    let (diag, _) = sideways::solve_sideways_diagonal(grid, beta_guess, data, opts)?;
    Ok(scaled_diagonal(beta_guess, &diag, grid.c()))
}

fn scaled_diagonal(like: &CoefficientProfile, diag: &[crate::Vec4], c: f64) -> CoefficientProfile {
    let scale = 2.0 * (c + 1.0) / (c - 1.0);
    let mut out = like.clone();
    for (v, d) in out.samples_mut().iter_mut().zip(diag) {
        *v = scale * d[2] + 0.0;
    }
    out
}

/// Outcome of iterating the map on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub beta: CoefficientProfile,
    /// `||beta_{n+1} - beta_n||` for each step.
    pub history: Vec<f64>,
    pub converged: bool,
    /// Set when the iterates blew up before `max_iter`.
    pub diverged: bool,
}

impl FixedPoint {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

fn iterate(
    beta0: &CoefficientProfile,
    data: &SidewaysData,
    grid: &Grid,
    tol: f64,
    max_iter: usize,
    opts: &SolverOptions,
    ball: Option<f64>,
) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let mut beta = beta0.clone();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let mut next = match q_map(&beta, data, grid, opts) {
            Ok(next) => next,
            Err(Error::NonFiniteField { .. }) => {
                return Ok(FixedPoint { beta, history, converged: false, diverged: true });
            }
            Err(e) => return Err(e),
        };
        if let Some(k_x) = ball {
            clip_to_ball(&mut next, k_x);
        }
        let dist = next.l2_distance(&beta);
        let scale = beta.l2_norm().max(1.0);
        history.push(dist);
        beta = next;
        if !dist.is_finite() {
            return Ok(FixedPoint { beta, history, converged: false, diverged: true });
        }
        if dist <= tol * scale {
            return Ok(FixedPoint { beta, history, converged: true, diverged: false });
        }
    }
    Ok(FixedPoint { beta, history, converged: false, diverged: false })
}

/// Radially shrink `beta` into `||beta||^2 <= k_x`.
fn clip_to_ball(beta: &mut CoefficientProfile, k_x: f64) {
    let norm_sq = beta.l2_norm_sq();
    if norm_sq > k_x && norm_sq > 0.0 {
        let s = (k_x / norm_sq).sqrt();
        beta.samples_mut().iter_mut().for_each(|v| *v *= s);
    }
}

/// Iterate `beta <- Q(beta)` from `beta0` until
/// `||beta_{n+1} - beta_n|| <= tol * max(1, ||beta_n||)`.
///
/// Returns the final iterate and the distance history.
pub fn fixed_point(
    beta0: &CoefficientProfile,
    data: &SidewaysData,
    grid: &Grid,
    tol: f64,
    max_iter: usize,
    opts: &SolverOptions,
) -> Result<(CoefficientProfile, Vec<f64>)> {
    let fp = iterate(beta0, data, grid, tol, max_iter, opts, None)?;
    if fp.converged {
        Ok((fp.beta, fp.history))
    } else {
        Err(Error::NoConvergence {
            iterations: fp.iterations(),
            residual: fp.history.last().copied().unwrap_or(f64::INFINITY),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    pub mode: Mode,
    pub tol: f64,
    pub max_iter: usize,
    /// A priori bound on `||beta||^2` over `[0, Y]`; used by the stepped mode.
    pub k_bound: f64,
    pub solver: SolverOptions,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            mode: Mode::GlobalIteration,
            tol: 1e-8,
            max_iter: 200,
            k_bound: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

/// One reconstructed segment `[first, last]` (column indices).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub first: usize,
    pub last: usize,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
    pub constants: Option<SegmentConstants>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub mode: Mode,
    /// Reconstructed twist on the columns reached so far.
    pub beta_app: CoefficientProfile,
    pub segments: Vec<Segment>,
    pub converged: bool,
    pub diverged: bool,
    pub e2: Option<f64>,
    pub e_inf: Option<f64>,
}

impl ReconstructionReport {
    pub fn iterations(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.iterations).collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.segments.iter().map(|s| s.iterations).sum()
    }

    /// Fill in `E2` and `E_inf` against the true profile on the same nodes.
    pub fn compare(&mut self, exact: &CoefficientProfile) -> Result<()> {
        let exact = if exact.len() > self.beta_app.len() {
            exact.slice(0, self.beta_app.len() - 1)
        } else {
            exact.clone()
        };
        let (e2, e_inf) = error_metrics(&exact, &self.beta_app)?;
        self.e2 = Some(e2);
        self.e_inf = Some(e_inf);
        Ok(())
    }

    /// Turn a non-converged report into [`Error::NoConvergence`].
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            return Ok(());
        }
        let last = self.segments.last();
        Err(Error::NoConvergence {
            iterations: last.map_or(0, |s| s.iterations),
            residual: last.and_then(|s| s.history.last().copied()).unwrap_or(f64::INFINITY),
        })
    }
}

/// Recover the twist on `[0, Y]` from reflection traces.
///
/// `beta0` is the initial guess sampled on the sensing columns. A run that
/// fails to converge still returns a report, with `converged == false` and
/// the iterates reached so far.
pub fn reconstruct(
    trace: &BoundaryTrace,
    grid: &Grid,
    beta0: &CoefficientProfile,
    opts: &ReconstructOptions,
) -> Result<ReconstructionReport> {
    let n_y = grid.sensing_columns();
    if beta0.len() != n_y + 1 {
        return Err(Error::DimensionMismatch { expected: n_y + 1, found: beta0.len() });
    }
    let data = SidewaysData::from_trace(grid, trace)?;
    match opts.mode {
        Mode::GlobalIteration => {
            let fp = iterate(beta0, &data, grid, opts.tol, opts.max_iter, &opts.solver, None)?;
            Ok(ReconstructionReport {
                mode: opts.mode,
                beta_app: fp.beta.clone(),
                converged: fp.converged,
                diverged: fp.diverged,
                segments: vec![Segment {
                    first: 0,
                    last: n_y,
                    iterations: fp.iterations(),
                    history: fp.history,
                    converged: fp.converged,
                    constants: None,
                }],
                e2: None,
                e_inf: None,
            })
        }
        Mode::TheoryStepped => stepped(data, grid, beta0, opts),
    }
}

fn stepped(
    mut data: SidewaysData,
    grid: &Grid,
    beta0: &CoefficientProfile,
    opts: &ReconstructOptions,
) -> Result<ReconstructionReport> {
    if !(opts.k_bound >= 0.0) {
        return Err(Error::InvalidParameter(format!("bound K = {} must be >= 0", opts.k_bound)));
    }
    let n_y = grid.sensing_columns();
    let h = grid.h();
    let mut samples = vec![beta0.samples()[0]];
    let mut segments = Vec::new();
    let mut diverged = false;
    let mut converged = true;
    while data.column() < n_y {
        let x = data.column();
        let k = segment_constants(&data, opts.k_bound, grid.params());
        // A segment is at least one column, whatever delta says.
        let cols = ((k.delta / h + 1e-9).floor() as usize).clamp(1, n_y - x);
        let guess = beta0.slice(x, x + cols);
        let fp = iterate(&guess, &data, grid, opts.tol, opts.max_iter, &opts.solver, Some(k.k_x))?;
        samples.extend_from_slice(&fp.beta.samples()[1..]);
        segments.push(Segment {
            first: x,
            last: x + cols,
            iterations: fp.iterations(),
            history: fp.history.clone(),
            converged: fp.converged,
            constants: Some(k),
        });
        if !fp.converged {
            converged = false;
            diverged = fp.diverged;
            break;
        }
        let (_, last) = sideways::solve_sideways_diagonal(grid, &fp.beta, &data, &opts.solver)?;
        data = SidewaysData::new(grid, x + cols, last)?;
    }
    Ok(ReconstructionReport {
        mode: Mode::TheoryStepped,
        beta_app: CoefficientProfile::from_samples(0.0, h, samples)?,
        segments,
        converged,
        diverged,
        e2: None,
        e_inf: None,
    })
}

/// Samples below this fraction of `max |beta|` count as zeros of `beta`:
/// `3 z^2 cos(10 z)` evaluates to about `1e-16`, not 0, at `z = pi/4`.
pub const ZERO_CUTOFF: f64 = 1e-12;

/// `E2 = (h sum_{i>=1} (beta - beta_app)^2)^(1/2)` and
/// `E_inf = max |beta - beta_app| / |beta|` over nodes with `beta != 0`.
pub fn error_metrics(exact: &CoefficientProfile, approx: &CoefficientProfile) -> Result<(f64, f64)> {
    if exact.len() != approx.len() {
        return Err(Error::DimensionMismatch { expected: exact.len(), found: approx.len() });
    }
    let e2 = exact.l2_distance(approx);
    let cutoff = ZERO_CUTOFF * exact.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let e_inf = exact
        .samples()
        .iter()
        .zip(approx.samples())
        .filter(|(b, _)| b.abs() > cutoff)
        .map(|(b, a)| ((b - a) / b).abs())
        .reduce(f64::max)
        .ok_or(Error::EmptySupport)?;
    Ok((e2, e_inf))
}

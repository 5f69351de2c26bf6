//! Forward problem: march the characteristic boundary value problem on the
//! triangle `0 <= z <= t <= 2Z - z` in t-levels and read off the reflected
//! signal at `z = 0`.
//!
//! Boundary data: `m2 = m4 = 0` on `z = 0`; `m1 = 0`,
//! `m3 = (c-1)/(2(c+1)) beta`, `m4 = (c+1)/(2(c-1)) beta` on `t = z`. The
//! diagonal is itself the `m2` characteristic, so `m2` there is integrated
//! along it from the origin.

mod picard;

pub use picard::{picard_forward, PicardResult};

use crate::cn::{self, Sweeps, Update};
use crate::error::{Error, Result};
use crate::field::{BoundaryTrace, Layout, WaveField};
use crate::interp::{self, Interpolation};
use crate::model::{char_boundary_values, CoefficientProfile, Grid};
use crate::Vec4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Interpolation at off-grid slow-characteristic feet.
    pub interpolation: Interpolation,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { interpolation: Interpolation::Cubic, sweep_tol: 1e-12, max_sweeps: 50 }
    }
}

impl SolverOptions {
    pub fn with_interpolation(interpolation: Interpolation) -> Self {
        SolverOptions { interpolation, ..Default::default() }
    }

    pub(crate) fn sweeps(&self) -> Sweeps {
        Sweeps { tol: self.sweep_tol, max: self.max_sweeps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    pub field: WaveField,
    pub trace: BoundaryTrace,
}

/// Solve the forward problem on the whole triangle.
pub fn solve_forward(
    grid: &Grid,
    beta: &CoefficientProfile,
    opts: &SolverOptions,
) -> Result<ForwardSolution> {
    let mut field = WaveField::new(Layout::Levels, grid.h(), 0);
    march(grid, beta, opts, |_, line| field.push_line(0, line))?;
    let trace = extract_traces(&field, grid.h());
    Ok(ForwardSolution { field, trace })
}

/// Reflection traces only; keeps two t-levels in memory.
pub fn forward_trace(
    grid: &Grid,
    beta: &CoefficientProfile,
    opts: &SolverOptions,
) -> Result<BoundaryTrace> {
    let mut m1 = Vec::with_capacity(grid.levels());
    let mut m3 = Vec::with_capacity(grid.levels());
    march(grid, beta, opts, |_, line| {
        m1.push(line[0][0]);
        m3.push(line[0][2]);
    })?;
    BoundaryTrace::new(grid.h(), m1, m3)
}

/// Traces generated on a grid `factor` times finer and restricted back to
/// `grid`'s nodes.
///
/// `beta_fine` must be sampled on the refined grid.
pub fn forward_trace_refined(
    grid: &Grid,
    factor: usize,
    beta_fine: &CoefficientProfile,
    opts: &SolverOptions,
) -> Result<BoundaryTrace> {
    let fine = Grid::new(*grid.params(), grid.n() * factor)?;
    forward_trace(&fine, beta_fine, opts)?.decimate(factor)
}

/// Copy the `z = 0` row of `m1` and `m3`.
pub fn extract_traces(field: &WaveField, h: f64) -> BoundaryTrace {
    let (m1, m3): (Vec<f64>, Vec<f64>) = (0..=field.last_line())
        .map(|j| field.get(0, j).map_or((0.0, 0.0), |v| (v[0], v[2])))
        .unzip();
    BoundaryTrace::new(h, m1, m3).expect("forward field has 2N+1 levels")
}

pub(crate) fn check_profile(grid: &Grid, beta: &CoefficientProfile, first: usize, last: usize) -> Result<()> {
    if beta.len() != last - first + 1 {
        return Err(Error::DimensionMismatch { expected: last - first + 1, found: beta.len() });
    }
    let h = grid.h();
    if (beta.h() - h).abs() > 1e-9 * h || (beta.z0() - first as f64 * h).abs() > 1e-9 * h {
        return Err(Error::InvalidParameter(format!(
            "profile spacing {} / origin {} does not match grid step {h} at column {first}",
            beta.h(),
            beta.z0()
        )));
    }
    Ok(())
}

/// Values on the diagonal `t = z` at fractional index `d`: `m1`, `m3`, `m4`
/// from the twist, `m2` interpolated from the integrated diagonal values.
fn diagonal_point(
    d: f64,
    beta: &CoefficientProfile,
    diag_m2: &[f64],
    c: f64,
    order: Interpolation,
) -> (Vec4, f64) {
    let b = interp::interpolate(beta.samples(), d, order);
    let (m1, m3, m4) = char_boundary_values(b, c);
    let m2 = interp::interpolate(diag_m2, d, order);
    ([m1, m2, m3, m4], b)
}

fn march(
    grid: &Grid,
    beta: &CoefficientProfile,
    opts: &SolverOptions,
    mut sink: impl FnMut(usize, &[Vec4]),
) -> Result<()> {
    let n = grid.n();
    check_profile(grid, beta, 0, n)?;
    let c = grid.c();
    let h = grid.h();
    let b = beta.samples();
    let order = opts.interpolation;
    let sweeps = opts.sweeps();
    let half = 0.5 * h;

    let (_, m3_0, _) = char_boundary_values(b[0], c);
    let mut prev = vec![[0.0, 0.0, m3_0, 0.0]];
    let mut diag_m2 = vec![0.0];
    sink(0, &prev);
    // Recent levels, newest first, so the slow left mover can step back past
    // lines too short for the interpolation stencil.
    let depth = order.points();
    let mut older: std::collections::VecDeque<Vec<Vec4>> = std::collections::VecDeque::new();

    for j in 1..=2 * n {
        let last = grid.level_last(j);
        let mut cur = vec![[0.0; 4]; last + 1];

        if j <= n {
            let (m1, m3, m4) = char_boundary_values(b[j], c);
            let foot = prev[j - 1];
            let ups = [
                Update::Fixed(m1),
                Update::along(1, &foot, b[j - 1], half, c),
                Update::Fixed(m3),
                Update::Fixed(m4),
            ];
            let m = cn::solve_node(&ups, b[j], c, sweeps);
            diag_m2.push(m[1]);
            cur[j] = m;
        }

        let interior_last = if j <= n { j - 1 } else { last };
        let lines: Vec<&[Vec4]> = std::iter::once(prev.as_slice()).chain(older.iter().map(Vec::as_slice)).collect();
        for i in 0..=interior_last {
            let gap = (j - i) as f64;
            let m1 = if i + 2 <= j {
                Update::along(0, &prev[i + 1], b[i + 1], half, c)
            } else {
                // The fast left mover's foot lies on the diagonal, half a step back.
                let d = i as f64 + 0.5 * gap;
                let (foot, bf) = diagonal_point(d, beta, &diag_m2, c, order);
                Update::along(0, &foot, bf, 0.25 * gap * h, c)
            };
            let m2 = if i == 0 {
                Update::Fixed(0.0)
            } else {
                Update::along(1, &prev[i - 1], b[i - 1], half, c)
            };
            let m3 = match slow_left_foot(&lines, gap, c, order.points()) {
                Some(back) => {
                    let pos = i as f64 + c * back as f64;
                    let foot = interp::interpolate_vec4(lines[back - 1], pos, order);
                    let bf = interp::interpolate(b, pos, order);
                    Update::along(2, &foot, bf, half * back as f64, c)
                }
                None => {
                    let dt = gap / (1.0 + c);
                    let d = i as f64 + c * dt;
                    let (foot, bf) = diagonal_point(d, beta, &diag_m2, c, order);
                    Update::along(2, &foot, bf, 0.5 * dt * h, c)
                }
            };
            let m4 = if i == 0 {
                Update::Fixed(0.0)
            } else {
                let pos = i as f64 - c;
                let foot = interp::interpolate_vec4(&prev, pos, order);
                let bf = interp::interpolate(b, pos, order);
                Update::along(3, &foot, bf, half, c)
            };
            cur[i] = cn::solve_node(&[m1, m2, m3, m4], b[i], c, sweeps);
        }

        if let Some(i) = cur.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFiniteField { i, j });
        }
        sink(j, &cur);
        if depth > 0 {
            older.push_front(std::mem::replace(&mut prev, cur));
            older.truncate(depth - 1);
        } else {
            prev = cur;
        }
    }
    Ok(())
}

/// How many levels back the slow left mover from `(i, j)` should start, or
/// `None` to start on the diagonal. `lines[s - 1]` is level `j - s`.
///
/// One level back is the rule. A line too short for a full stencil (the
/// first and last few levels) would silently drop the order, so the foot is
/// taken further back where the lines are longer, or on the diagonal.
fn slow_left_foot(lines: &[&[Vec4]], gap: f64, c: f64, points: usize) -> Option<usize> {
    let below = |s: usize| gap >= (1.0 + c) * s as f64 - 1e-12;
    if lines[0].len() >= points {
        return below(1).then_some(1);
    }
    if let Some(s) = (2..=lines.len()).find(|&s| lines[s - 1].len() >= points && below(s)) {
        return Some(s);
    }
    // Early levels: the diagonal is within reach; otherwise accept the lower order.
    if gap <= (1.0 + c) * points as f64 {
        None
    } else {
        below(1).then_some(1)
    }
}

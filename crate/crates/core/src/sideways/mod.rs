//! Sideways problem: the same system marched in `z` from full data on a
//! vertical segment `z = X`, closed on the diagonal by
//! `h3 = ((c-1)/(c+1))^2 h4`.
//!
//! Written as `h_z = A^{-1}(h_t - beta B h)`, component `k` obeys
//! `dh_k/dz = -beta (B h)_k / a_k` along `dt/dz = -1/a_k`, with
//! `a = (1, -1, c, -c)`. Nodes on column `X + i h` run over
//! `t in [z, 2Z - z/c]`, the region whose slow echo reaches `z = X` before
//! the data segment ends.

mod picard;

pub use picard::picard_sideways;

use crate::cn::{self, Update};
use crate::error::{Error, Result};
use crate::field::{BoundaryTrace, Layout, WaveField};
use crate::forward::{check_profile, SolverOptions};
use crate::interp;
use crate::model::{apply_b, diagonal_ratio, CoefficientProfile, Grid};
use crate::Vec4;

/// Cauchy data `h(X, t)` for `t` from `X` to `2Z - X/c` at grid spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct SidewaysData {
    column: usize,
    h: f64,
    values: Vec<Vec4>,
}

impl SidewaysData {
    /// Data on column `column`; `values[k]` sits at t index `column + k`.
    pub fn new(grid: &Grid, column: usize, values: Vec<Vec4>) -> Result<Self> {
        if column > grid.sensing_columns() {
            return Err(Error::Geometry(format!(
                "column {column} lies beyond the sensing depth (last column {})",
                grid.sensing_columns()
            )));
        }
        let expected = grid.column_top(column) - column + 1;
        if values.len() < expected {
            return Err(Error::Geometry(format!(
                "data segment at column {column} has {} samples, needs {expected}",
                values.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sideways data".into()));
        }
        let mut values = values;
        values.truncate(expected);
        Ok(SidewaysData { column, h: grid.h(), values })
    }

    /// `a = (m1(0,t), 0, m3(0,t), 0)` from reflection traces.
    pub fn from_trace(grid: &Grid, trace: &BoundaryTrace) -> Result<Self> {
        if trace.len() != grid.levels() {
            return Err(Error::DimensionMismatch { expected: grid.levels(), found: trace.len() });
        }
        let values = trace.m1().iter().zip(trace.m3()).map(|(&a1, &a3)| [a1, 0.0, a3, 0.0]).collect();
        Self::new(grid, 0, values)
    }

    /// Column `column` of an existing field (forward or sideways).
    pub fn from_field(grid: &Grid, field: &WaveField, column: usize) -> Result<Self> {
        let top = grid.column_top(column);
        let values = (column..=top)
            .map(|j| {
                field.get(column, j).copied().ok_or_else(|| {
                    Error::Geometry(format!("field has no node at ({column}, {j})"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, column, values)
    }

    pub fn zeros(grid: &Grid, column: usize) -> Result<Self> {
        let len = (grid.column_top(column) + 1).saturating_sub(column);
        Self::new(grid, column, vec![[0.0; 4]; len])
    }

    pub fn column(&self) -> usize {
        self.column
    }

    pub fn x(&self) -> f64 {
        self.column as f64 * self.h
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[Vec4] {
        &self.values
    }

    /// `||a1||^2 + ||a2||^2 + c ||a3||^2 + c eps ||a4||^2` by the trapezoid rule.
    pub fn weighted_energy(&self, c: f64, eps: f64) -> f64 {
        let f: Vec<f64> = self
            .values
            .iter()
            .map(|a| a[0] * a[0] + a[1] * a[1] + c * a[2] * a[2] + c * eps * a[3] * a[3])
            .collect();
        crate::field::trapezoid(&f, self.h)
    }

    /// Sum with another data set on the same column.
    pub fn combine(&self, other: &SidewaysData, wa: f64, wb: f64) -> SidewaysData {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| std::array::from_fn(|k| wa * a[k] + wb * b[k]))
            .collect();
        SidewaysData { column: self.column, h: self.h, values }
    }
}

/// Residuals of the corner compatibility conditions at `(X, X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchingReport {
    pub r0: f64,
    pub r1: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Check that the data can belong to a C^1 solution near the corner:
///
/// ```text
/// r0 = (c+1)^2 a3 - (1-c)^2 a4
/// r1 = (c+1)^2 ((1+c) a3' - beta (B a)_3) - (c-1)^2 ((c-1) a4' + beta (B a)_4)
/// ```
///
/// at `t = X`, with `a'` from a one-sided second-order difference.
pub fn check_matching(data: &SidewaysData, beta_at_x: f64, c: f64, tol: f64) -> MatchingReport {
    let a = &data.values;
    let h = data.h;
    let slope = |k: usize| match a.len() {
        0 | 1 => 0.0,
        2 => (a[1][k] - a[0][k]) / h,
        _ => (-3.0 * a[0][k] + 4.0 * a[1][k] - a[2][k]) / (2.0 * h),
    };
    let a0 = a[0];
    let ba = apply_b(&a0, c);
    let (p2, q2) = ((c + 1.0).powi(2), (c - 1.0).powi(2));
    let r0 = p2 * a0[2] - q2 * a0[3];
    let r1 = p2 * ((1.0 + c) * slope(2) - beta_at_x * ba[2])
        - q2 * ((c - 1.0) * slope(3) + beta_at_x * ba[3]);
    MatchingReport { r0, r1, tol, pass: r0.abs().max(r1.abs()) <= tol }
}

/// Solve on columns `data.column() ..= data.column() + beta.len() - 1`.
pub fn solve_sideways(
    grid: &Grid,
    beta: &CoefficientProfile,
    data: &SidewaysData,
    opts: &SolverOptions,
) -> Result<WaveField> {
    let mut field = WaveField::new(Layout::Columns, grid.h(), data.column);
    march(grid, beta, data, opts, &mut |i, _, line| field.push_line(i, line))?;
    Ok(field)
}

/// Diagonal values `h(z, z)` and the final column, without storing the
/// whole field.
pub(crate) fn solve_sideways_diagonal(
    grid: &Grid,
    beta: &CoefficientProfile,
    data: &SidewaysData,
    opts: &SolverOptions,
) -> Result<(Vec<Vec4>, Vec<Vec4>)> {
    let mut diag = Vec::with_capacity(beta.len());
    let mut last = Vec::new();
    march(grid, beta, data, opts, &mut |_, _, line| {
        diag.push(line[0]);
        last.clear();
        last.extend_from_slice(line);
    })?;
    Ok((diag, last))
}

/// Data on the last column of a sideways field.
pub fn advance_data(grid: &Grid, field: &WaveField) -> Result<SidewaysData> {
    let (start, line) = field
        .line(field.last_line())
        .ok_or_else(|| Error::Geometry("empty sideways field".into()))?;
    SidewaysData::new(grid, start, line.to_vec())
}

fn march(
    grid: &Grid,
    beta: &CoefficientProfile,
    data: &SidewaysData,
    opts: &SolverOptions,
    on_column: &mut dyn FnMut(usize, usize, &[Vec4]),
) -> Result<()> {
    let x = data.column;
    if beta.is_empty() {
        return Err(Error::InvalidParameter("empty twist profile".into()));
    }
    let end = x + beta.len() - 1;
    if end > grid.sensing_columns() {
        return Err(Error::Geometry(format!(
            "segment ends at column {end}, beyond the sensing depth (column {})",
            grid.sensing_columns()
        )));
    }
    check_profile(grid, beta, x, end)?;
    let c = grid.c();
    let h = grid.h();
    let b = beta.samples();
    let order = opts.interpolation;
    let sweeps = opts.sweeps();
    let reflect = 1.0 / diagonal_ratio(c);
    // Trapezoid weights -dz/(2 a_k) for a full column step.
    let w = [-0.5 * h, 0.5 * h, -0.5 * h / c, 0.5 * h / c];

    let mut prev = data.values.clone();
    let mut diag: Vec<Vec4> = vec![prev[0]];
    on_column(x, x, &prev);

    for i in x + 1..=end {
        let top = grid.column_top(i);
        let mut cur = vec![[0.0; 4]; top - i + 1];
        let (bp, bf) = (b[i - x], b[i - x - 1]);
        // prev[m] sits at t index (i - 1) + m.
        let rel = |t: f64| t - (i - 1) as f64;
        let foot_at = |prev: &[Vec4], t: f64| interp::interpolate_vec4(prev, rel(t), order);

        for (m, node) in cur.iter_mut().enumerate() {
            let j = i + m;
            let tj = j as f64;
            let h1 = Update::along(0, &prev[m + 2], bf, w[0], c);
            let h2 = Update::along(1, &prev[m], bf, w[1], c);
            let h3 = Update::along(2, &foot_at(&prev, tj + 1.0 / c), bf, w[2], c);
            let h4 = if m == 0 {
                Update::Tied { to: 2, factor: reflect }
            } else if tj - 1.0 / c >= (i - 1) as f64 - 1e-12 {
                Update::along(3, &foot_at(&prev, tj - 1.0 / c), bf, w[3], c)
            } else {
                // The slow right mover's backward characteristic meets the
                // diagonal between the two columns; start from the
                // diagonal value there (this column's node is already in).
                let y = (i as f64 - c * tj) / (1.0 - c);
                let dz = i as f64 - y;
                let foot = interp::interpolate_vec4(&diag, y - x as f64, order);
                let bh = interp::interpolate(b, y - x as f64, order);
                Update::along(3, &foot, bh, 0.5 * dz * h / c, c)
            };
            *node = cn::solve_node(&[h1, h2, h3, h4], bp, c, sweeps);
            if m == 0 {
                diag.push(*node);
            }
        }

        if let Some(m) = cur.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFiniteField { i, j: i + m });
        }
        on_column(i, i, &cur);
        prev = cur;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::solve_forward;
    use crate::model::ModelParams;
    use std::f64::consts::FRAC_PI_2;

    fn grid(n: usize) -> Grid {
        Grid::new(ModelParams::new(0.5, FRAC_PI_2).unwrap(), n).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let g = grid(32);
        let beta = CoefficientProfile::from_expr("5*z", 0.0, 21.0 * g.h(), g.h()).unwrap();
        let f = solve_sideways(&g, &beta, &SidewaysData::zeros(&g, 0).unwrap(), &Default::default())
            .unwrap();
        assert!(f.values().iter().flatten().all(|v| *v == 0.0));
        assert_eq!(f.line_count(), 22);
    }

    #[test]
    fn matching_residuals() {
        let g = grid(16);
        let r = check_matching(&SidewaysData::zeros(&g, 0).unwrap(), 3.0, 0.5, 1e-12);
        assert!(r.pass && r.r0 == 0.0 && r.r1 == 0.0);
        let mut v = vec![[0.0; 4]; g.column_top(0) + 1];
        v[0] = [0.0, 0.0, 1.0, 0.0];
        let d = SidewaysData::new(&g, 0, v).unwrap();
        let r = check_matching(&d, 0.0, 0.5, 1e-6);
        assert_eq!(r.r0, 2.25);
        assert!(!r.pass);
    }

    #[test]
    fn diagonal_closure_ratio() {
        let g = grid(32);
        let n_y = g.sensing_columns();
        let beta =
            CoefficientProfile::from_expr("3*z^2*cos(10*z)*log(z+1)", 0.0, FRAC_PI_2, g.h()).unwrap();
        let trace = solve_forward(&g, &beta, &Default::default()).unwrap().trace;
        let data = SidewaysData::from_trace(&g, &trace).unwrap();
        let f = solve_sideways(&g, &beta.slice(0, n_y), &data, &Default::default()).unwrap();
        for i in 1..=n_y {
            let v = f.get(i, i).unwrap();
            assert!((v[2] - v[3] / 9.0).abs() <= 1e-12 * v[3].abs().max(1e-12));
        }
    }

    #[test]
    fn data_must_cover_segment() {
        let g = grid(16);
        assert!(matches!(SidewaysData::new(&g, 0, vec![[0.0; 4]; 10]), Err(Error::Geometry(_))));
        assert!(SidewaysData::zeros(&g, g.sensing_columns() + 1).is_err());
        let beta = CoefficientProfile::zeros(0.0, g.h(), g.sensing_columns() + 2);
        let data = SidewaysData::zeros(&g, 0).unwrap();
        assert!(matches!(
            solve_sideways(&g, &beta, &data, &Default::default()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn advance_then_resolve_returns_same_column() {
        let g = grid(32);
        let beta = CoefficientProfile::from_fn(0.0, 6.0 * g.h(), g.h(), |z| z * z).unwrap();
        let mut v = vec![[0.0; 4]; g.column_top(0) + 1];
        for (k, a) in v.iter_mut().enumerate() {
            let t = k as f64 * g.h();
            *a = [t.sin(), 0.0, t * t, 0.0];
        }
        let data = SidewaysData::new(&g, 0, v).unwrap();
        let f = solve_sideways(&g, &beta, &data, &Default::default()).unwrap();
        let next = advance_data(&g, &f).unwrap();
        assert_eq!(next.column(), 6);
        let again =
            solve_sideways(&g, &beta.slice(6, 6), &next, &Default::default()).unwrap();
        assert_eq!(again.line(6).unwrap().1, next.values());
    }
}

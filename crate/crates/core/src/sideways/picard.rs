//! Successive approximation of the sideways integral equations.
//!
//! Component `k` at `(z, t)` equals its value where the backward
//! characteristic `dt/dz = -1/a_k` meets the data column, plus the integral
//! of `-beta (B h)_k / a_k` in `z`. The slow right mover may instead meet
//! the diagonal first, where it starts from the closure value `h3 / ratio`.
//! Trapezoid rule over the columns crossed, linear interpolation in `t`.

use super::SidewaysData;
use crate::error::{Error, Result};
use crate::field::{Layout, WaveField};
use crate::interp::{self, Interpolation};
use crate::model::{b_row, diagonal_ratio, CoefficientProfile, Grid};
use crate::forward::check_profile;
use crate::Vec4;

struct Iterate<'a> {
    /// `cols[q][m]` is the node at column `x + q`, t index `x + q + m`.
    cols: Vec<Vec<Vec4>>,
    beta: &'a [f64],
    x: usize,
    c: f64,
}

impl Iterate<'_> {
    fn at(&self, q: usize, t: f64) -> Vec4 {
        let rel = t - (self.x + q) as f64;
        interp::interpolate_vec4(&self.cols[q], rel, Interpolation::Linear)
    }

    /// Diagonal point at fractional column offset `y`.
    fn on_diagonal(&self, y: f64) -> Vec4 {
        let last = self.cols.len() - 1;
        let lo = (y.floor().max(0.0) as usize).min(last);
        let hi = (lo + 1).min(last);
        let w = y - lo as f64;
        let (a, b) = (self.cols[lo][0], self.cols[hi][0]);
        std::array::from_fn(|k| (1.0 - w) * a[k] + w * b[k])
    }

    fn rate(&self, k: usize, v: &Vec4, q: f64) -> f64 {
        let a = [1.0, -1.0, self.c, -self.c][k];
        -interp::interpolate(self.beta, q, Interpolation::Linear) * b_row(v, self.c, k) / a
    }

    /// Integral of the rate from column offset `q_end` (value `end`) up to
    /// node `(q, t)` along `t(z) = t + back (q - z)`.
    fn integrate(&self, k: usize, q: usize, t: f64, back: f64, q_end: f64, end: Vec4) -> f64 {
        let mut total = 0.0;
        let mut z_prev = q as f64;
        let mut f_prev = self.rate(k, &self.at(q, t), z_prev);
        let mut p = q;
        while p > 0 && (p - 1) as f64 > q_end + 1e-12 {
            p -= 1;
            let v = self.at(p, t + back * (q - p) as f64);
            let f = self.rate(k, &v, p as f64);
            total += 0.5 * (z_prev - p as f64) * (f_prev + f);
            z_prev = p as f64;
            f_prev = f;
        }
        total + 0.5 * (z_prev - q_end) * (f_prev + self.rate(k, &end, q_end))
    }

    fn apply(&self, data: &SidewaysData, h: f64) -> Vec<Vec<Vec4>> {
        let c = self.c;
        let ratio = diagonal_ratio(c);
        let x = self.x as f64;
        // Shift in t per column stepped back in z.
        let back = [1.0, -1.0, 1.0 / c, -1.0 / c];
        let mut out: Vec<Vec<Vec4>> = Vec::with_capacity(self.cols.len());
        out.push(data.values().to_vec());
        for q in 1..self.cols.len() {
            let col = (0..self.cols[q].len())
                .map(|m| {
                    let t = (self.x + q + m) as f64;
                    let mut v = [0.0; 4];
                    for k in 0..3 {
                        let t0 = t + back[k] * q as f64;
                        let foot = interp::interpolate_vec4(data.values(), t0 - x, Interpolation::Linear);
                        v[k] = foot[k] + h * self.integrate(k, q, t, back[k], 0.0, foot);
                    }
                    let t0 = t - q as f64 / c;
                    v[3] = if t0 >= x - 1e-12 {
                        let foot = interp::interpolate_vec4(data.values(), t0 - x, Interpolation::Linear);
                        foot[3] + h * self.integrate(3, q, t, back[3], 0.0, foot)
                    } else {
                        let y = ((self.x + q) as f64 - c * t) / (1.0 - c) - x;
                        let mut foot = self.on_diagonal(y);
                        foot[3] = foot[2] / ratio;
                        foot[3] + h * self.integrate(3, q, t, back[3], y, foot)
                    };
                    v
                })
                .collect();
            out.push(col);
        }
        // Closure on the diagonal replaces the integrated slow right mover.
        for col in out.iter_mut().skip(1) {
            col[0][3] = col[0][2] / ratio;
        }
        out
    }
}

/// Iterate the sideways integral equations, starting from zero, until successive iterates differ by at most `tol`.
pub fn picard_sideways(
    grid: &Grid,
    beta: &CoefficientProfile,
    data: &SidewaysData,
    tol: f64,
    max_iter: usize,
) -> Result<WaveField> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let x = data.column();
    if beta.is_empty() {
        return Err(Error::InvalidParameter("empty twist profile".into()));
    }
    let end = x + beta.len() - 1;
    if end > grid.sensing_columns() {
        return Err(Error::Geometry(format!("segment ends beyond column {}", grid.sensing_columns())));
    }
    check_profile(grid, beta, x, end)?;
    let cols = (x..=end).map(|i| vec![[0.0; 4]; grid.column_top(i) - i + 1]).collect();
    let mut it = Iterate { cols, beta: beta.samples(), x, c: grid.c() };
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = it.apply(data, grid.h());
        residual = next
            .iter()
            .flatten()
            .zip(it.cols.iter().flatten())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        it.cols = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            let mut field = WaveField::new(Layout::Columns, grid.h(), x);
            for (q, col) in it.cols.iter().enumerate() {
                field.push_line(x + q, col);
            }
            return Ok(field);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(ModelParams::new(0.5, 1.0).unwrap(), 16).unwrap();
        let beta = CoefficientProfile::from_fn(0.0, 5.0 * g.h(), g.h(), |z| 2.0 * z).unwrap();
        let f = picard_sideways(&g, &beta, &SidewaysData::zeros(&g, 0).unwrap(), 1e-12, 5).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }
}

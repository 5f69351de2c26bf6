//! Successive approximation of the forward problem's integral equations.
//!
//! Every component at a node is the boundary value where its characteristic
//! enters the triangle plus the integral of `r = beta B v` along that
//! characteristic. Integrals use the trapezoid rule on the t-levels the
//! characteristic crosses, with linear interpolation in `z`. No marching is
//! shared with [`super::solve_forward`].

use crate::error::{Error, Result};
use crate::field::{Layout, WaveField};
use crate::interp::{self, Interpolation};
use crate::model::{b_row, char_boundary_values, CoefficientProfile, Grid};
use crate::Vec4;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub field: WaveField,
    pub iterations: usize,
    pub residual: f64,
}

struct Iterate<'a> {
    levels: Vec<Vec<Vec4>>,
    beta: &'a [f64],
    c: f64,
    h: f64,
    n: usize,
}

impl Iterate<'_> {
    fn beta_at(&self, pos: f64) -> f64 {
        interp::interpolate(self.beta, pos, Interpolation::Linear)
    }

    fn on_level(&self, s: usize, pos: f64) -> Vec4 {
        interp::interpolate_vec4(&self.levels[s], pos, Interpolation::Linear)
    }

    /// Point `(d, d)` on the diagonal, fractional `d`.
    fn on_diagonal(&self, d: f64) -> Vec4 {
        let lo = (d.floor() as usize).min(self.n);
        let hi = (lo + 1).min(self.n);
        let w = d - lo as f64;
        let (a, b) = (self.levels[lo][lo], self.levels[hi][hi]);
        std::array::from_fn(|k| (1.0 - w) * a[k] + w * b[k])
    }

    /// Point `(0, s)` on the boundary, fractional `s`.
    fn on_boundary(&self, s: f64) -> Vec4 {
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(2 * self.n);
        let w = s - lo as f64;
        let (a, b) = (self.levels[lo][0], self.levels[hi][0]);
        std::array::from_fn(|k| (1.0 - w) * a[k] + w * b[k])
    }

    fn r(&self, k: usize, v: &Vec4, pos: f64) -> f64 {
        self.beta_at(pos) * b_row(v, self.c, k)
    }

    /// Integral of `r_k` back along the path `z(s) = i + slope (j - s)`
    /// from level `j` to the entry time `s_end`, ending at `end` (value and
    /// z position).
    fn integrate(&self, k: usize, i: usize, j: usize, slope: f64, s_end: f64, end: (Vec4, f64)) -> f64 {
        let mut total = 0.0;
        let mut s_prev = j as f64;
        let mut f_prev = self.r(k, &self.levels[j][i], i as f64);
        let mut s = j;
        while s > 0 && (s - 1) as f64 > s_end + 1e-12 {
            s -= 1;
            let pos = i as f64 + slope * (j - s) as f64;
            let f = self.r(k, &self.on_level(s, pos), pos);
            total += 0.5 * (s_prev - s as f64) * (f_prev + f);
            s_prev = s as f64;
            f_prev = f;
        }
        let f_end = self.r(k, &end.0, end.1);
        self.h * (total + 0.5 * (s_prev - s_end) * (f_prev + f_end))
    }

    fn apply(&self, grid: &Grid) -> Vec<Vec<Vec4>> {
        let c = self.c;
        let mut out = Vec::with_capacity(self.levels.len());
        for j in 0..=2 * self.n {
            let mut line = vec![[0.0; 4]; grid.level_last(j) + 1];
            for (i, v) in line.iter_mut().enumerate() {
                let (zi, tj) = (i as f64, j as f64);

                // m1: back along z + t - s to the diagonal.
                let d = 0.5 * (zi + tj);
                v[0] = self.integrate(0, i, j, 1.0, d, (self.on_diagonal(d), d));

                // m2: back along z + s - t to z = 0.
                let s = tj - zi;
                v[1] = self.integrate(1, i, j, -1.0, s, (self.on_boundary(s), 0.0));

                // m3: back along z + c(t - s) to the diagonal.
                let d = (zi + c * tj) / (1.0 + c);
                let b3 = char_boundary_values(self.beta_at(d), c).1;
                v[2] = b3 + self.integrate(2, i, j, c, d, (self.on_diagonal(d), d));

                // m4: back along z - c(t - s), to z = 0 or to the diagonal.
                v[3] = if zi <= c * tj {
                    let s = tj - zi / c;
                    self.integrate(3, i, j, -c, s, (self.on_boundary(s), 0.0))
                } else {
                    let d = (zi - c * tj) / (1.0 - c);
                    let b4 = char_boundary_values(self.beta_at(d), c).2;
                    b4 + self.integrate(3, i, j, -c, d, (self.on_diagonal(d), d))
                };
            }
            out.push(line);
        }
        out
    }
}

/// Iterate the integral equations from zero until successive iterates
/// differ by at most `tol` in max norm.
pub fn picard_forward(
    grid: &Grid,
    beta: &CoefficientProfile,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    super::check_profile(grid, beta, 0, grid.n())?;
    let n = grid.n();
    let zero: Vec<Vec<Vec4>> = (0..=2 * n).map(|j| vec![[0.0; 4]; grid.level_last(j) + 1]).collect();
    let mut it = Iterate { levels: zero, beta: beta.samples(), c: grid.c(), h: grid.h(), n };
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let next = it.apply(grid);
        residual = next
            .iter()
            .flatten()
            .zip(it.levels.iter().flatten())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        it.levels = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            let mut field = WaveField::new(Layout::Levels, grid.h(), 0);
            for line in &it.levels {
                field.push_line(0, line);
            }
            return Ok(PicardResult { field, iterations: iteration, residual });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_twist_converges_immediately() {
        let g = Grid::new(ModelParams::new(0.5, FRAC_PI_2).unwrap(), 8).unwrap();
        let r = picard_forward(&g, &CoefficientProfile::zeros(0.0, g.h(), 9), 1e-12, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.field.max_abs(), 0.0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let g = Grid::new(ModelParams::new(0.5, 1.0).unwrap(), 4).unwrap();
        assert!(picard_forward(&g, &CoefficientProfile::zeros(0.0, g.h(), 5), 0.0, 10).is_err());
    }
}

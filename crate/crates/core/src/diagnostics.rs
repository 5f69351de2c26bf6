//! Executable versions of the energy identities and estimates behind the
//! method: divergence identity, boundary energy balance, the sideways
//! energy bound, the linearized reflection law and the stability ratio.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{trapezoid, WaveField};
use crate::forward::{forward_trace, SolverOptions};
use crate::model::{apply_a, apply_b, diagonal_ratio, eps_star, CoefficientProfile, Grid};
use crate::Vec4;

/// Sideways energy `J(p, z)` at each column of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyProfile {
    pub z: Vec<f64>,
    pub j: Vec<f64>,
    pub epsilon: f64,
}

/// `J(p, z) = int (p1^2 + p2^2 + c p3^2 + c eps p4^2) dt` over
/// `z <= t <= 2Z - z/c` on column `column`, by the trapezoid rule.
pub fn energy_j(field: &WaveField, grid: &Grid, column: usize, eps: f64) -> Result<f64> {
    let c = grid.c();
    let f = (column..=grid.column_top(column))
        .map(|j| {
            let p = field
                .get(column, j)
                .ok_or_else(|| Error::Geometry(format!("no node at ({column}, {j})")))?;
            Ok(p[0] * p[0] + p[1] * p[1] + c * p[2] * p[2] + c * eps * p[3] * p[3])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(&f, grid.h()))
}

/// `J` on every column of a sideways field.
pub fn energy_profile(field: &WaveField, grid: &Grid, eps: f64) -> Result<EnergyProfile> {
    let cols = field.first_line()..=field.last_line();
    let j = cols.clone().map(|i| energy_j(field, grid, i, eps)).collect::<Result<Vec<_>>>()?;
    Ok(EnergyProfile { z: cols.map(|i| i as f64 * grid.h()).collect(), j, epsilon: eps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub profile: EnergyProfile,
    /// `exp(4 sqrt(Y ||beta||) / (c eps))`; may be infinite.
    pub growth_bound: f64,
    /// Largest `(J(z) + int_OC p3^2) / J(0)` over the columns (0 for a zero field).
    pub worst_ratio: f64,
    /// Largest ratio divided by the allowed `growth_bound (1 + C h)`.
    pub worst_margin: f64,
    pub pass: bool,
}

/// Margin constant `C` in the allowance `(1 + C h)` for quadrature error.
pub const ENERGY_MARGIN: f64 = 10.0;

/// Check `J(p, z) + int_OC p3^2 <= exp(4 sqrt(Y ||beta||)/(c eps)) J(p, 0)` on
/// every column of a homogeneous sideways solution, with `eps = eps*`.
pub fn check_energy_inequality(
    field: &WaveField,
    beta: &CoefficientProfile,
    grid: &Grid,
) -> Result<EnergyReport> {
    let c = grid.c();
    let ratio = diagonal_ratio(c);
    for i in field.first_line()..=field.last_line() {
        if let Some(p) = field.get(i, i) {
            let tol = 1e-9 * p[2].abs().max(p[3].abs()).max(1e-300);
            if (p[2] - ratio * p[3]).abs() > tol && i > field.first_line() {
                return Err(Error::HypothesisViolated(format!(
                    "diagonal ratio fails at column {i}: p3 = {:e}, p4 = {:e}",
                    p[2], p[3]
                )));
            }
        }
    }
    let eps = eps_star(c);
    let profile = energy_profile(field, grid, eps)?;
    let y = grid.params().sensing_depth();
    let growth_bound = (4.0 * (y * beta.l2_norm()).sqrt() / (c * eps)).exp();
    let allowed = growth_bound * (1.0 + ENERGY_MARGIN * grid.h());
    let j0 = profile.j[0];

    let first = field.first_line();
    let diag_p3: Vec<f64> = (first..=field.last_line())
        .map(|i| field.get(i, i).map_or(0.0, |p| p[2] * p[2]))
        .collect();
    let mut worst_ratio = 0.0f64;
    let mut pass = true;
    for (q, &j) in profile.j.iter().enumerate() {
        let lhs = j + trapezoid(&diag_p3[..=q], grid.h());
        if lhs == 0.0 {
            continue;
        }
        let r = if j0 > 0.0 { lhs / j0 } else { f64::INFINITY };
        worst_ratio = worst_ratio.max(r);
        pass &= r <= allowed;
    }
    let worst_margin = if worst_ratio == 0.0 { 0.0 } else { worst_ratio / allowed };
    Ok(EnergyReport { profile, growth_bound, worst_ratio, worst_margin, pass })
}

/// Largest residual of
/// `u^T (L v) + (L u)^T v = (u^T v)_t - (u^T A v)_z`, `L = d_t - A d_z - beta B`,
/// with centred differences on nodes whose four neighbours are in both fields.
pub fn check_divergence_identity(
    u: &WaveField,
    v: &WaveField,
    beta: &CoefficientProfile,
    grid: &Grid,
) -> f64 {
    let c = grid.c();
    let h = grid.h();
    let two_h = 2.0 * h;
    let nb = |f: &WaveField, i: usize, j: usize| -> Option<[Vec4; 4]> {
        Some([*f.get(i + 1, j)?, *f.get(i - 1, j)?, *f.get(i, j + 1)?, *f.get(i, j - 1)?])
    };
    let dot = |a: &Vec4, b: &Vec4| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut worst = 0.0f64;
    for (i, j, uc) in u.nodes() {
        if i == 0 || j == 0 {
            continue;
        }
        let (Some(un), Some(vn), Some(vc)) = (nb(u, i, j), nb(v, i, j), v.get(i, j)) else {
            continue;
        };
        let Some(&b) = beta.samples().get(i) else { continue };
        let op = |n: &[Vec4; 4], m: &Vec4| -> Vec4 {
            let dz: Vec4 = std::array::from_fn(|k| (n[0][k] - n[1][k]) / two_h);
            let dt: Vec4 = std::array::from_fn(|k| (n[2][k] - n[3][k]) / two_h);
            let adz = apply_a(&dz, c);
            let bm = apply_b(m, c);
            std::array::from_fn(|k| dt[k] - adz[k] - b * bm[k])
        };
        let lhs = dot(uc, &op(&vn, vc)) + dot(&op(&un, uc), vc);
        let prod_t = (dot(&un[2], &vn[2]) - dot(&un[3], &vn[3])) / two_h;
        let prod_z = (dot(&un[0], &apply_a(&vn[0], c)) - dot(&un[1], &apply_a(&vn[1], c))) / two_h;
        worst = worst.max((lhs - (prod_t - prod_z)).abs());
    }
    worst
}

/// Terms of the energy balance over the forward triangle
/// `O = (0,0)`, `E = (Z,Z)`, `B = (0,2Z)`:
///
/// ```text
/// int_OE (2 m1^2 + (1+c) m3^2 + (1-c) m4^2) dz
///   = int_EB (2 m2^2 + (1-c) m3^2 + (1+c) m4^2) dz + int_OB (m1^2 + c m3^2) dt
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub diagonal: f64,
    pub top: f64,
    pub boundary: f64,
    /// `|diagonal - top - boundary|`.
    pub residual: f64,
}

/// Boundary energy balance of a forward field (levels layout).
pub fn boundary_energy_balance(field: &WaveField, grid: &Grid) -> Result<EnergyBalance> {
    let c = grid.c();
    let n = grid.n();
    let h = grid.h();
    let node = |i: usize, j: usize| {
        field.get(i, j).copied().ok_or_else(|| Error::Geometry(format!("no node at ({i}, {j})")))
    };
    let mut oe = Vec::with_capacity(n + 1);
    let mut eb = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let m = node(i, i)?;
        oe.push(2.0 * m[0] * m[0] + (1.0 + c) * m[2] * m[2] + (1.0 - c) * m[3] * m[3]);
        let m = node(i, 2 * n - i)?;
        eb.push(2.0 * m[1] * m[1] + (1.0 - c) * m[2] * m[2] + (1.0 + c) * m[3] * m[3]);
    }
    let ob = (0..=2 * n)
        .map(|j| node(0, j).map(|m| m[0] * m[0] + c * m[2] * m[2]))
        .collect::<Result<Vec<_>>>()?;
    let (diagonal, top, boundary) = (trapezoid(&oe, h), trapezoid(&eb, h), trapezoid(&ob, h));
    Ok(EnergyBalance { diagonal, top, boundary, residual: (diagonal - top - boundary).abs() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationPoint {
    pub eta: f64,
    /// `max_t |m3(0,t) - (c-1)/(2(c+1)) eta phi(ct/(1+c))|`.
    pub dev: f64,
    pub max_m1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationReport {
    pub points: Vec<LinearizationPoint>,
    /// Least-squares slope of `log dev` against `log eta`; `None` when
    /// every deviation is exactly zero.
    pub slope: Option<f64>,
    pub m1_slope: Option<f64>,
    pub pass: bool,
}

/// Minimum accepted slope for a quadratic remainder.
pub const LINEARIZATION_SLOPE: f64 = 1.8;

/// Compare the reflected slow signal for `beta = eta phi` with its
/// first-order prediction `m3(0,t) = (c-1)/(2(c+1)) eta phi(ct/(1+c))`, and
/// check that the remainder and `m1(0,.)` are quadratic in `eta`.
pub fn check_linearization(
    phi: &Expr,
    grid: &Grid,
    scales: &[f64],
    opts: &SolverOptions,
) -> Result<LinearizationReport> {
    if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("scales must be positive".into()));
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("scales must be decreasing".into()));
    }
    let c = grid.c();
    let h = grid.h();
    let base = CoefficientProfile::from_expr_tree(phi, 0.0, grid.params().z_max(), h)?;
    let k = (c - 1.0) / (2.0 * (c + 1.0));
    let predicted = (0..grid.levels())
        .map(|j| phi.eval(c * j as f64 * h / (1.0 + c)))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut points = Vec::with_capacity(scales.len());
    for &eta in scales {
        let mut beta = base.clone();
        beta.samples_mut().iter_mut().for_each(|v| *v *= eta);
        let trace = forward_trace(grid, &beta, opts)?;
        let dev = trace
            .m3()
            .iter()
            .zip(&predicted)
            .map(|(m3, p)| (m3 - k * eta * p).abs())
            .fold(0.0, f64::max);
        let max_m1 = trace.m1().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        points.push(LinearizationPoint { eta, dev, max_m1 });
    }
    let slope = log_slope(points.iter().map(|p| (p.eta, p.dev)));
    let m1_slope = log_slope(points.iter().map(|p| (p.eta, p.max_m1)));
    let ok = |s: Option<f64>| s.map_or(true, |s| s >= LINEARIZATION_SLOPE);
    let pass = ok(slope) && ok(m1_slope);
    Ok(LinearizationReport { points, slope, m1_slope, pass })
}

/// Least-squares slope through `(log x, log y)`; `None` if every `y` is zero.
fn log_slope(pts: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pts.filter(|p| p.1 > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `||beta1 - beta2||^2_[0,Y] / (||dm1||^2 + ||dm3||^2)_[0,2Z]` for the
/// forward traces of two twists on `[0, Z]`.
///
/// Returns 0 when the twists agree to `1e-20` in squared norm.
pub fn check_stability_ratio(
    beta1: &CoefficientProfile,
    beta2: &CoefficientProfile,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<f64> {
    let n_y = grid.sensing_columns();
    if beta1.len() != grid.n() + 1 || beta2.len() != grid.n() + 1 {
        return Err(Error::DimensionMismatch { expected: grid.n() + 1, found: beta1.len().min(beta2.len()) });
    }
    let num = beta1.slice(0, n_y).l2_distance(&beta2.slice(0, n_y)).powi(2);
    if num < 1e-20 {
        return Ok(0.0);
    }
    let t1 = forward_trace(grid, beta1, opts)?;
    let t2 = forward_trace(grid, beta2, opts)?;
    let den = t1.l2_distance_sq(&t2);
    if t1.max_abs_diff(&t2) <= 1e-14 && num.sqrt() > 1e-10 {
        return Err(Error::DegenerateDenominator(num.sqrt()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Layout;
    use crate::forward::solve_forward;
    use crate::model::ModelParams;
    use std::f64::consts::FRAC_PI_2;

    fn grid(n: usize) -> Grid {
        Grid::new(ModelParams::new(0.5, FRAC_PI_2).unwrap(), n).unwrap()
    }

    fn constant_columns(g: &Grid, v: Vec4) -> WaveField {
        let mut f = WaveField::new(Layout::Columns, g.h(), 0);
        for i in 0..=g.sensing_columns() {
            f.push_line(i, &vec![v; g.column_top(i) - i + 1]);
        }
        f
    }

    #[test]
    fn energy_of_constant_fields() {
        let g = grid(64);
        let len = g.column_top(0) as f64 * g.h();
        let f = constant_columns(&g, [1.0, 0.0, 0.0, 0.0]);
        assert!((energy_j(&f, &g, 0, 1.0).unwrap() - len).abs() < 1e-12);
        let f = constant_columns(&g, [0.0, 0.0, 0.0, 1.0]);
        let eps = eps_star(0.5);
        assert!((energy_j(&f, &g, 0, eps).unwrap() - 0.5 * eps * len).abs() < 1e-14);
        let zero = constant_columns(&g, [0.0; 4]);
        assert_eq!(energy_j(&zero, &g, 3, eps).unwrap(), 0.0);
        let beta = CoefficientProfile::zeros(0.0, g.h(), g.sensing_columns() + 1);
        let r = check_energy_inequality(&zero, &beta, &g).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_margin, 0.0);
    }

    #[test]
    fn energy_is_quadratic() {
        let g = grid(32);
        let f = constant_columns(&g, [0.3, -0.2, 0.7, 0.1]);
        let a = energy_j(&f, &g, 2, 0.4).unwrap();
        let b = energy_j(&f.scaled(3.0), &g, 2, 0.4).unwrap();
        assert!((b - 9.0 * a).abs() <= 1e-13 * b);
    }

    #[test]
    fn energy_check_rejects_broken_closure() {
        let g = grid(32);
        let f = constant_columns(&g, [0.0, 0.0, 1.0, 1.0]);
        let beta = CoefficientProfile::zeros(0.0, g.h(), g.sensing_columns() + 1);
        assert!(matches!(check_energy_inequality(&f, &beta, &g), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn divergence_identity_vanishes_for_trivial_fields() {
        let g = grid(16);
        let beta = CoefficientProfile::zeros(0.0, g.h(), 17);
        let zero = constant_columns(&g, [0.0; 4]);
        assert_eq!(check_divergence_identity(&zero, &zero, &beta, &g), 0.0);
        let u = constant_columns(&g, [1.0, 2.0, 3.0, 4.0]);
        let v = constant_columns(&g, [-1.0, 0.5, 2.0, 1.0]);
        assert_eq!(check_divergence_identity(&u, &v, &beta, &g), 0.0);
    }

    #[test]
    fn balance_of_zero_field() {
        let g = grid(16);
        let sol = solve_forward(&g, &CoefficientProfile::zeros(0.0, g.h(), 17), &Default::default())
            .unwrap();
        let b = boundary_energy_balance(&sol.field, &g).unwrap();
        assert_eq!(b.residual, 0.0);
    }

    #[test]
    fn linearization_of_zero_is_exact() {
        let g = grid(16);
        let phi = crate::expr::parse("0").unwrap();
        let r = check_linearization(&phi, &g, &[1e-2, 1e-3], &Default::default()).unwrap();
        assert!(r.pass && r.slope.is_none());
        assert!(check_linearization(&phi, &g, &[1e-3, 1e-2], &Default::default()).is_err());
    }

    #[test]
    fn stability_ratio_conventions() {
        let g = grid(16);
        let b = CoefficientProfile::from_fn(0.0, FRAC_PI_2, g.h(), |z| z * z).unwrap();
        assert_eq!(check_stability_ratio(&b, &b, &g, &Default::default()).unwrap(), 0.0);
        let zero = CoefficientProfile::zeros(0.0, g.h(), 17);
        let r = check_stability_ratio(&zero, &b, &g, &Default::default()).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn slope_fit() {
        let s = log_slope([(1e-2, 1e-4), (1e-3, 1e-6), (1e-4, 1e-8)].into_iter()).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        assert_eq!(log_slope([(1.0, 0.0), (0.1, 0.0)].into_iter()), None);
    }
}

//! Implicit trapezoidal (Crank-Nicolson) update of one node.
//!
//! Each component is either prescribed, tied to another component by a
//! fixed factor, or carried along its characteristic:
//!
//! ```text
//! m_k(P) = explicit_k + weight_k * beta(P) * (B m(P))_k
//! ```
//!
//! where `explicit_k` already contains the foot value and the foot half of
//! the trapezoid rule. The coupling is resolved by Gauss-Seidel sweeps; if
//! they stall (strong twist on a coarse grid) the 4x4 system is solved
//! directly.

use crate::model::b_row;
use crate::Vec4;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Update {
    Fixed(f64),
    Char { explicit: f64, weight: f64 },
    Tied { to: usize, factor: f64 },
}

impl Update {
    /// Characteristic update from a foot value.
    ///
    /// `weight` multiplies `beta * (B m)_k` at both ends of the step.
    pub(crate) fn along(k: usize, foot: &Vec4, beta_foot: f64, weight: f64, c: f64) -> Update {
        Update::Char { explicit: foot[k] + weight * beta_foot * b_row(foot, c, k), weight }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Sweeps {
    pub tol: f64,
    pub max: usize,
}

impl Default for Sweeps {
    fn default() -> Self {
        Sweeps { tol: 1e-12, max: 50 }
    }
}

pub(crate) fn solve_node(updates: &[Update; 4], beta: f64, c: f64, sweeps: Sweeps) -> Vec4 {
    let mut m = [0.0; 4];
    for (k, u) in updates.iter().enumerate() {
        m[k] = match *u {
            Update::Fixed(v) => v,
            Update::Char { explicit, .. } => explicit,
            Update::Tied { .. } => 0.0,
        };
    }
    for (k, u) in updates.iter().enumerate() {
        if let Update::Tied { to, factor } = *u {
            m[k] = factor * m[to];
        }
    }
    if beta == 0.0 {
        return m;
    }
    for _ in 0..sweeps.max {
        let mut change = 0.0f64;
        for k in 0..4 {
            let next = match updates[k] {
                Update::Fixed(v) => v,
                Update::Char { explicit, weight } => explicit + weight * beta * b_row(&m, c, k),
                Update::Tied { to, factor } => factor * m[to],
            };
            change = change.max((next - m[k]).abs());
            m[k] = next;
        }
        let scale = m.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if change <= sweeps.tol * scale {
            return m;
        }
    }
    solve_direct(updates, beta, c).unwrap_or(m)
}

fn solve_direct(updates: &[Update; 4], beta: f64, c: f64) -> Option<Vec4> {
    let mut a = [[0.0f64; 5]; 4];
    for (k, u) in updates.iter().enumerate() {
        a[k][k] = 1.0;
        match *u {
            Update::Fixed(v) => a[k][4] = v,
            Update::Char { explicit, weight } => {
                for col in 0..4 {
                    let mut e = [0.0; 4];
                    e[col] = 1.0;
                    a[k][col] -= weight * beta * b_row(&e, c, k);
                }
                a[k][4] = explicit;
            }
            Update::Tied { to, factor } => a[k][to] -= factor,
        }
    }
    for col in 0..4 {
        let piv = (col..4).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for row in 0..4 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..5 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut m = [0.0; 4];
    for k in 0..4 {
        m[k] = a[k][4] / a[k][k];
    }
    Some(m)
}

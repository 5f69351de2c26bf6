//! Storage for four-component fields on triangular subsets of the grid.

use crate::error::{Error, Result};
use crate::interp::{self, Interpolation};
use crate::Vec4;

/// How a field's nodes are grouped into contiguous lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Lines are t-levels `j`; each holds a run of z indices.
    Levels,
    /// Lines are z-columns `i`; each holds a run of t indices.
    Columns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    layout: Layout,
    h: f64,
    first_line: usize,
    /// First index along each line.
    starts: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<Vec4>,
}

impl WaveField {
    pub fn new(layout: Layout, h: f64, first_line: usize) -> Self {
        WaveField { layout, h, first_line, starts: Vec::new(), offsets: vec![0], values: Vec::new() }
    }

    /// Append the next line, whose nodes start at index `start` along it.
    pub fn push_line(&mut self, start: usize, line: &[Vec4]) {
        self.starts.push(start);
        self.values.extend_from_slice(line);
        self.offsets.push(self.values.len());
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn first_line(&self) -> usize {
        self.first_line
    }

    pub fn line_count(&self) -> usize {
        self.starts.len()
    }

    pub fn last_line(&self) -> usize {
        self.first_line + self.starts.len() - 1
    }

    /// Nodes of line `l` (absolute index) and the index of its first node.
    pub fn line(&self, l: usize) -> Option<(usize, &[Vec4])> {
        let k = l.checked_sub(self.first_line)?;
        if k >= self.starts.len() {
            return None;
        }
        Some((self.starts[k], &self.values[self.offsets[k]..self.offsets[k + 1]]))
    }

    /// Value at node `(i, j)` = `(z, t)` indices.
    pub fn get(&self, i: usize, j: usize) -> Option<&Vec4> {
        let (line, along) = match self.layout {
            Layout::Levels => (j, i),
            Layout::Columns => (i, j),
        };
        let (start, vals) = self.line(line)?;
        vals.get(along.checked_sub(start)?)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Vec4] {
        &self.values
    }

    /// All nodes as `(i, j, value)`, line by line.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, &Vec4)> + '_ {
        (0..self.starts.len()).flat_map(move |k| {
            let line = self.first_line + k;
            let start = self.starts[k];
            self.values[self.offsets[k]..self.offsets[k + 1]].iter().enumerate().map(
                move |(m, v)| match self.layout {
                    Layout::Levels => (start + m, line, v),
                    Layout::Columns => (line, start + m, v),
                },
            )
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Interpolate along line `l` at fractional position `pos` (absolute index).
    pub fn sample_line(&self, l: usize, pos: f64, order: Interpolation) -> Option<Vec4> {
        let (start, vals) = self.line(l)?;
        Some(interp::interpolate_vec4(vals, pos - start as f64, order))
    }

    /// Largest nodal difference over nodes present in both fields.
    pub fn max_abs_diff(&self, other: &WaveField) -> f64 {
        self.nodes()
            .filter_map(|(i, j, v)| other.get(i, j).map(|w| (v, w)))
            .flat_map(|(v, w)| v.iter().zip(w).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> WaveField {
        let mut out = self.clone();
        for v in out.values.iter_mut().flatten() {
            *v *= factor;
        }
        out
    }
}

/// Reflection data `(m1(0,t), m3(0,t))` at `t = k h`, `k = 0..=2N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    h: f64,
    m1: Vec<f64>,
    m3: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(h: f64, m1: Vec<f64>, m3: Vec<f64>) -> Result<Self> {
        if m1.len() != m3.len() {
            return Err(Error::DimensionMismatch { expected: m1.len(), found: m3.len() });
        }
        if m1.len() < 3 || m1.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "trace length {} is not of the form 2N+1",
                m1.len()
            )));
        }
        if m1.iter().chain(&m3).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite trace sample".into()));
        }
        Ok(BoundaryTrace { h, m1, m3 })
    }

    pub fn zeros(h: f64, n: usize) -> Self {
        BoundaryTrace { h, m1: vec![0.0; 2 * n + 1], m3: vec![0.0; 2 * n + 1] }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.m1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m1.is_empty()
    }

    /// Number of subdivisions `N` of `[0, Z]` implied by the length.
    pub fn n(&self) -> usize {
        (self.m1.len() - 1) / 2
    }

    pub fn t_at(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn m1(&self) -> &[f64] {
        &self.m1
    }

    pub fn m3(&self) -> &[f64] {
        &self.m3
    }

    /// Keep every `factor`-th sample (fine-grid data onto a coarser grid).
    pub fn decimate(&self, factor: usize) -> Result<BoundaryTrace> {
        if factor == 0 || (self.m1.len() - 1) % (2 * factor) != 0 {
            return Err(Error::InvalidParameter(format!(
                "cannot restrict a trace with N = {} by a factor {factor}",
                self.n()
            )));
        }
        let pick = |v: &[f64]| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        Ok(BoundaryTrace { h: self.h * factor as f64, m1: pick(&self.m1), m3: pick(&self.m3) })
    }

    /// `int_0^{2Z} (dm1^2 + dm3^2) dt` by the trapezoid rule.
    pub fn l2_distance_sq(&self, other: &BoundaryTrace) -> f64 {
        let f: Vec<f64> = (0..self.len())
            .map(|k| (self.m1[k] - other.m1[k]).powi(2) + (self.m3[k] - other.m3[k]).powi(2))
            .collect();
        trapezoid(&f, self.h)
    }

    pub fn max_abs_diff(&self, other: &BoundaryTrace) -> f64 {
        self.m1
            .iter()
            .zip(&other.m1)
            .chain(self.m3.iter().zip(&other.m3))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Composite trapezoid rule over uniformly spaced values.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (f[0] + f[n - 1]) + f[1..n - 1].iter().sum::<f64>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_indexing_by_layout() {
        let mut f = WaveField::new(Layout::Levels, 0.1, 0);
        f.push_line(0, &[[1.0; 4]]);
        f.push_line(0, &[[2.0; 4], [3.0; 4]]);
        assert_eq!(f.get(1, 1), Some(&[3.0; 4]));
        assert_eq!(f.get(2, 1), None);
        assert_eq!(f.nodes().count(), 3);
        let mut g = WaveField::new(Layout::Columns, 0.1, 2);
        g.push_line(2, &[[1.0; 4], [2.0; 4]]);
        assert_eq!(g.get(2, 3), Some(&[2.0; 4]));
        assert_eq!(g.get(2, 1), None);
        assert_eq!(g.get(1, 2), None);
    }

    #[test]
    fn trace_shape_rules() {
        assert!(BoundaryTrace::new(0.1, vec![0.0; 4], vec![0.0; 4]).is_err());
        assert!(BoundaryTrace::new(0.1, vec![0.0; 5], vec![0.0; 3]).is_err());
        let t = BoundaryTrace::new(0.1, (0..9).map(f64::from).collect(), vec![0.0; 9]).unwrap();
        assert_eq!(t.n(), 4);
        let d = t.decimate(2).unwrap();
        assert_eq!(d.m1(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert!(t.decimate(3).is_err());
    }

    #[test]
    fn trapezoid_exact_for_lines() {
        let f: Vec<f64> = (0..11).map(|k| 2.0 * k as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(&f, 0.1) - 2.0).abs() < 1e-14);
    }
}

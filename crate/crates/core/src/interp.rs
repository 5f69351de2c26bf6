//! Lagrange interpolation on uniformly spaced samples.

use crate::Vec4;

/// Interpolation order used at off-grid characteristic feet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
}

impl Interpolation {
    pub(crate) fn points(self) -> usize {
        match self {
            Interpolation::Linear => 2,
            Interpolation::Cubic => 4,
        }
    }
}

impl std::str::FromStr for Interpolation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Interpolation::Linear),
            "cubic" => Ok(Interpolation::Cubic),
            other => Err(format!("unknown interpolation `{other}` (expected linear|cubic)")),
        }
    }
}

/// Stencil for evaluating at fractional index `pos` over samples `0..len`.
///
/// The stencil is shifted inward near the ends so it never reads outside
/// the samples; a `pos` slightly outside `[0, len-1]` extrapolates.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub start: usize,
    pub weights: [f64; 4],
    pub len: usize,
}

impl Stencil {
    pub fn new(len: usize, pos: f64, order: Interpolation) -> Stencil {
        assert!(len > 0, "interpolation over an empty line");
        let npts = order.points().min(len);
        // Snap positions that are a rounding error away from a node.
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 && nearest >= 0.0 && (nearest as usize) < len {
            let mut weights = [0.0; 4];
            weights[0] = 1.0;
            return Stencil { start: nearest as usize, weights, len: 1 };
        }
        let left = pos.floor() as isize - (npts as isize / 2 - 1);
        let start = left.clamp(0, (len - npts) as isize) as usize;
        let mut weights = [0.0; 4];
        for (k, w) in weights.iter_mut().enumerate().take(npts) {
            let xk = (start + k) as f64;
            let mut l = 1.0;
            for m in 0..npts {
                if m != k {
                    let xm = (start + m) as f64;
                    l *= (pos - xm) / (xk - xm);
                }
            }
            *w = l;
        }
        Stencil { start, weights, len: npts }
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        (0..self.len).map(|k| self.weights[k] * values[self.start + k]).sum()
    }

    pub fn apply_vec4(&self, values: &[Vec4]) -> Vec4 {
        let mut out = [0.0; 4];
        for k in 0..self.len {
            let w = self.weights[k];
            let v = &values[self.start + k];
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        out
    }
}

pub fn interpolate(values: &[f64], pos: f64, order: Interpolation) -> f64 {
    Stencil::new(values.len(), pos, order).apply(values)
}

pub fn interpolate_vec4(values: &[Vec4], pos: f64, order: Interpolation) -> Vec4 {
    Stencil::new(values.len(), pos, order).apply_vec4(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_reproduces_lines_and_nodes() {
        let v: Vec<f64> = (0..5).map(|k| 2.0 * k as f64 - 1.0).collect();
        assert_eq!(interpolate(&v, 2.0, Interpolation::Linear), 3.0);
        assert!((interpolate(&v, 2.25, Interpolation::Linear) - 3.5).abs() < 1e-15);
        assert!((interpolate(&v, 4.5, Interpolation::Linear) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_is_exact_on_cubics() {
        let f = |x: f64| 0.5 * x * x * x - x * x + 3.0;
        let v: Vec<f64> = (0..7).map(|k| f(k as f64)).collect();
        for pos in [0.3, 1.5, 3.7, 5.9, 6.0] {
            assert!((interpolate(&v, pos, Interpolation::Cubic) - f(pos)).abs() < 1e-12);
        }
    }

    #[test]
    fn short_lines_reduce_order() {
        assert_eq!(interpolate(&[4.0], 0.0, Interpolation::Cubic), 4.0);
        assert!((interpolate(&[0.0, 1.0], 0.5, Interpolation::Cubic) - 0.5).abs() < 1e-15);
    }
}

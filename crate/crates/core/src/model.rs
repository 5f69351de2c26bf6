//! Model constants, grids, twist profiles and the pointwise formulas of the
//! fiber system `m_t = A m_z + beta B m`.
//!
//! Components are ordered `(m1, m2, m3, m4)`: left and right movers of the
//! fast channel (speed 1), then left and right movers of the slow channel
//! (speed `c`).

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::interp::{self, Interpolation};
use crate::Vec4;

/// Slow speed `c` and observation half-time `Z` (fast speed is 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    c: f64,
    z_max: f64,
}

impl ModelParams {
    pub fn new(c: f64, z_max: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter(format!("slow speed c = {c} must lie in (0, 1)")));
        }
        if !(z_max > 0.0 && z_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("depth Z = {z_max} must be positive")));
        }
        Ok(ModelParams { c, z_max })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    /// Sensing depth `2cZ/(1+c)`: the deepest point whose slow echo returns
    /// by time `2Z`.
    pub fn sensing_depth(&self) -> f64 {
        2.0 * self.c * self.z_max / (1.0 + self.c)
    }

    /// Largest energy weight for which the sideways energy is monotone:
    /// `c(1-c)^3/(1+c)^4`.
    pub fn eps_star(&self) -> f64 {
        eps_star(self.c)
    }
}

pub fn eps_star(c: f64) -> f64 {
    c * (1.0 - c).powi(3) / (1.0 + c).powi(4)
}

/// Ratio `(c-1)^2/(c+1)^2` tying `m3` to `m4` on the line `t = z`.
pub fn diagonal_ratio(c: f64) -> f64 {
    ((c - 1.0) / (c + 1.0)).powi(2)
}

/// `A v` with `A = diag(1, -1, c, -c)`.
pub fn apply_a(v: &Vec4, c: f64) -> Vec4 {
    [v[0], -v[1], c * v[2], -c * v[3]]
}

/// `B v` for the twist coupling matrix
///
/// ```text
///       1 [  0     0    -1-c  -1+c ]
///  B =  - [  0     0     1-c   1+c ]
///       2 [ 1+c  -1+c    0     0   ]
///         [ 1-c  -1-c    0     0   ]
/// ```
///
/// `B` is antisymmetric.
pub fn apply_b(v: &Vec4, c: f64) -> Vec4 {
    let (p, q) = (1.0 + c, 1.0 - c);
    [
        0.5 * (-p * v[2] - q * v[3]),
        0.5 * (q * v[2] + p * v[3]),
        0.5 * (p * v[0] - q * v[1]),
        0.5 * (q * v[0] - p * v[1]),
    ]
}

/// Single component `(B v)_k`.
#[inline]
pub fn b_row(v: &Vec4, c: f64, k: usize) -> f64 {
    let (p, q) = (1.0 + c, 1.0 - c);
    match k {
        0 => 0.5 * (-p * v[2] - q * v[3]),
        1 => 0.5 * (q * v[2] + p * v[3]),
        2 => 0.5 * (p * v[0] - q * v[1]),
        _ => 0.5 * (q * v[0] - p * v[1]),
    }
}

/// Values `(m1, m3, m4)` forced on the line `t = z` by the twist there.
pub fn char_boundary_values(beta: f64, c: f64) -> (f64, f64, f64) {
    // `+ 0.0` turns the -0.0 of a negative factor times a zero twist into +0.0.
    (0.0, (c - 1.0) / (2.0 * (c + 1.0)) * beta + 0.0, (c + 1.0) / (2.0 * (c - 1.0)) * beta + 0.0)
}

/// Electric field components and their first derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldJet {
    pub e1: f64,
    pub e2: f64,
    pub e1_z: f64,
    pub e1_t: f64,
    pub e2_z: f64,
    pub e2_t: f64,
}

/// Channel speed `c0 / sqrt(1 + alpha)` from the vacuum speed and the
/// channel's polarizability.
pub fn channel_speed(c0: f64, alpha: f64) -> f64 {
    c0 / (1.0 + alpha).sqrt()
}

/// Split the two polarization fields into left and right movers.
pub fn transform_e_to_m(jet: &FieldJet, beta: f64, c1: f64, c2: f64) -> Vec4 {
    let g1 = jet.e1_z - beta * jet.e2;
    let g2 = jet.e2_z + beta * jet.e1;
    [
        0.5 * (g1 + jet.e1_t / c1),
        0.5 * (g1 - jet.e1_t / c1),
        0.5 * (g2 + jet.e2_t / c2),
        0.5 * (g2 - jet.e2_t / c2),
    ]
}

/// Uniform space-time grid with equal steps `h = Z/N` in `z` and `t`.
///
/// Node `(i, j)` sits at `(z, t) = (i h, j h)`. The forward domain is the
/// triangle `i <= j <= 2N - i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    params: ModelParams,
    n: usize,
}

impl Grid {
    pub fn new(params: ModelParams, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be a positive integer".into()));
        }
        Ok(Grid { params, n })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.params.z_max / self.n as f64
    }

    /// Grid with twice as many subdivisions.
    pub fn refined(&self) -> Grid {
        Grid { params: self.params, n: 2 * self.n }
    }

    /// Number of t-levels of the forward triangle, `2N + 1`.
    pub fn levels(&self) -> usize {
        2 * self.n + 1
    }

    /// Largest z index on t-level `j`.
    pub fn level_last(&self, j: usize) -> usize {
        j.min(2 * self.n - j)
    }

    /// Last z column inside the sensing region, `floor(Y/h)`.
    pub fn sensing_columns(&self) -> usize {
        (self.params.sensing_depth() / self.h() + 1e-9).floor() as usize
    }

    /// Largest t index on sideways column `i`, `floor(2N - i/c)`.
    pub fn column_top(&self, i: usize) -> usize {
        (2.0 * self.n as f64 - i as f64 / self.params.c + 1e-9).floor() as usize
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i <= j && i + j <= 2 * self.n
    }
}

/// Twist samples at `z0 + k h`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    z0: f64,
    h: f64,
    samples: Vec<f64>,
    source: Option<String>,
}

impl CoefficientProfile {
    pub fn from_samples(z0: f64, h: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("profile needs at least one sample".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("sample spacing {h} must be positive")));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample at index {k}")));
        }
        Ok(CoefficientProfile { z0, h, samples, source: None })
    }

    /// Sample `f` on `[z0, z1]` at spacing `h`; `round((z1-z0)/h) + 1` nodes.
    pub fn from_fn(z0: f64, z1: f64, h: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let count = ((z1 - z0) / h).round() as usize + 1;
        Self::from_samples(z0, h, (0..count).map(|k| f(z0 + k as f64 * h)).collect())
    }

    pub fn from_expr(text: &str, z0: f64, z1: f64, h: f64) -> Result<Self> {
        let e = expr::parse(text)?;
        let mut p = Self::from_expr_tree(&e, z0, z1, h)?;
        p.source = Some(text.to_string());
        Ok(p)
    }

    pub fn from_expr_tree(e: &Expr, z0: f64, z1: f64, h: f64) -> Result<Self> {
        let count = ((z1 - z0) / h).round() as usize + 1;
        let samples = (0..count)
            .map(|k| e.eval(z0 + k as f64 * h))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_samples(z0, h, samples)
    }

    pub fn zeros(z0: f64, h: f64, len: usize) -> Self {
        CoefficientProfile { z0, h, samples: vec![0.0; len.max(1)], source: None }
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn z1(&self) -> f64 {
        self.z0 + (self.samples.len() - 1) as f64 * self.h
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn z_at(&self, k: usize) -> f64 {
        self.z0 + k as f64 * self.h
    }

    /// Value at arbitrary `z`, interpolated from the samples.
    pub fn value_at(&self, z: f64, order: Interpolation) -> f64 {
        interp::interpolate(&self.samples, (z - self.z0) / self.h, order)
    }

    /// Sub-profile covering sample indices `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> CoefficientProfile {
        CoefficientProfile {
            z0: self.z_at(first),
            h: self.h,
            samples: self.samples[first..=last].to_vec(),
            source: self.source.clone(),
        }
    }

    /// Every `factor`-th sample, for moving a fine-grid profile to a coarser grid.
    pub fn decimate(&self, factor: usize) -> CoefficientProfile {
        CoefficientProfile {
            z0: self.z0,
            h: self.h * factor as f64,
            samples: self.samples.iter().step_by(factor).copied().collect(),
            source: self.source.clone(),
        }
    }

    /// Squared L2 norm by the right-endpoint sum `h * sum_{k>=1} v_k^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.h * self.samples.iter().skip(1).map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `||self - other||` on common nodes.
    pub fn l2_distance(&self, other: &CoefficientProfile) -> f64 {
        let s: f64 =
            self.samples.iter().zip(&other.samples).skip(1).map(|(a, b)| (a - b).powi(2)).sum();
        (self.h * s).sqrt()
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BetaWarning {
    NonzeroAtOrigin(f64),
    NonzeroSlopeAtOrigin(f64),
}

impl std::fmt::Display for BetaWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaWarning::NonzeroAtOrigin(v) => write!(f, "β(0) ≠ 0 (β(0) = {v:e})"),
            BetaWarning::NonzeroSlopeAtOrigin(s) => write!(f, "β'(0) ≠ 0 (slope ≈ {s:e})"),
        }
    }
}

/// Check the untwisted-end conditions `beta(0) = 0`, `beta'(0) = 0`.
///
/// Violations are reported, not rejected: initial guesses such as `z` break
/// them on purpose. The slope is the one-sided difference over the first
/// step and is flagged when it exceeds `10 h`.
pub fn validate_beta(profile: &CoefficientProfile) -> Vec<BetaWarning> {
    let mut warnings = Vec::new();
    let h = profile.h();
    let s = profile.samples();
    let scale = s.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if s[0].abs() > 1e-12 * scale {
        warnings.push(BetaWarning::NonzeroAtOrigin(s[0]));
    }
    if s.len() > 1 {
        let slope = (s[1] - s[0]) / h;
        if slope.abs() > 10.0 * h {
            warnings.push(BetaWarning::NonzeroSlopeAtOrigin(slope));
        }
    }
    warnings
}

//! Wave propagation in a twisted two-speed birefringent fiber and
//! reconstruction of the twist from single-ended reflection data.
//!
//! The signal `m = (m1, m2, m3, m4)` obeys `m_t = A m_z + beta(z) B m`, with
//! fast (speed 1) and slow (speed `c < 1`) channels. [`forward`] computes the
//! reflected traces `m1(0,t)`, `m3(0,t)` for a given twist; [`invert`]
//! recovers the twist on the sensing depth `[0, 2cZ/(1+c)]` from those
//! traces by iterating a contraction built on the [`sideways`] solver.
//! [`diagnostics`] turns the energy identities behind the method into
//! numerical checks.

mod cn;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod field;
pub mod forward;
pub mod interp;
pub mod io;
pub mod invert;
pub mod model;
pub mod sideways;

pub use error::{Error, Result};
pub use field::{BoundaryTrace, Layout, WaveField};
pub use interp::Interpolation;
pub use forward::SolverOptions;
pub use model::{CoefficientProfile, Grid, ModelParams};

/// One node's four components `(m1, m2, m3, m4)`.
pub type Vec4 = [f64; 4];

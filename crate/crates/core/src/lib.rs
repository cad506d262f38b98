//! Singular convolution operators `K[k, mu](x) = ∫ k(x - y) mu(y) dσ_y` on closed
//! C^{1,1} curves in the plane, together with the machinery needed to check their
//! `omega_1`-Hölder regularity numerically: generalized moduli of continuity,
//! tubular collars built from a smoothed normal field, geometric boundary constants
//! and near-boundary gradient scans.
//!
//! The crate is organised bottom-up:
//!
//! * [`modulus`]: the moduli `omega_theta` and discrete Hölder seminorms.
//! * [`boundary`]: parametrized curves, quadrature grids, the field `a`, the map
//!   `Psi(x, t) = x + t a(x)` and coordinate cylinders.
//! * [`kernels`]: odd positively homogeneous kernels of degree -1.
//! * [`potential`]: off-boundary evaluation of `K[k, mu]` and its gradient, the
//!   gradient scan and the split-integral diagnostics.
//! * [`geoconst`]: the four boundary constants `c'`, `c''`, `c'''`, `c^iv`.
//! * [`harness`]: experiment configuration, reports and the `all` pipeline that the
//!   command-line tool drives.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod boundary;
pub mod error;
pub mod geoconst;
pub mod harness;
pub mod kernels;
pub mod modulus;
pub mod potential;
pub mod quadrature;
pub mod vec2;

pub use boundary::{Boundary, BoundaryGrid, CoordinateCylinder, Shape, TubularField};
pub use error::{Error, Result};
pub use kernels::{HomogeneousKernel, KernelNorm};
pub use modulus::{Modulus, SampledFunction, SeminormEstimate};
pub use potential::{Density, DensityKind, GradientScan, PotentialValue, SplitDiagnostics};
pub use vec2::Vec2;

//! Darboux-type transformations of the axisymmetric cylindrical
//! Schrödinger/Helmholtz operator
//!
//! ```text
//! (∂²_r + (1/r) ∂_r + ∂²_z − u(r, z)) Y = 0
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`]: a small symbolic core (parse, differentiate, fold, evaluate).
//! * [`axisym`]: the cylindrical operator, the exponent/potential relation and
//!   the one-form defining the nonlocal variable `Q`.
//! * [`moutard`]: the generalized Moutard branch and its twofold superposition.
//! * [`darboux`]: the general nonlocal Darboux operator, its nonlinear
//!   admissibility system, and the radial ansatz family.
//! * [`quadrature`]: primitives of closed one-forms by composite Gauss–Legendre.
//! * [`catalog`]: every explicit closed form, shipped as a text data file.
//! * [`verify`]: sampled residual reports, finite-difference oracles and
//!   singularity scans, plus the full catalog suite.
//!
//! Evaluation, quadrature and grid fields are generic over [`Real`]; the
//! aliases below fix the common choices.

pub mod axisym;
pub mod catalog;
pub mod darboux;
pub mod expr;
pub mod identity;
pub mod moutard;
pub mod quadrature;
pub mod record;
mod scalar;
pub mod verify;

pub use expr::{Expr, ExprError, Params, Point};
pub use identity::Identity;
pub use quadrature::{Domain, Exclusion, Field, OneForm, PathSpec};
pub use scalar::Real;

/// Exact rational used for literals and constant folding.
pub type Rational = num_rational::BigRational;

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;

//! Complete and involutive normal forms for local dynamical systems.
//!
//! The pipeline takes a system in primary normal form — a drift field, a set
//! of characteristic fields scaled by free multipliers, and algebraic
//! constraints — and:
//!
//! * stabilizes the constraints stage by stage, solving for the multipliers
//!   the constraints determine and recording the new constraints they spawn,
//!   until the system is complete ([`stabilization`]);
//! * classifies constraints as tangential or transverse and splits the
//!   characteristic fields into the part that preserves the final surface and
//!   the part that does not ([`stabilization`]);
//! * synthesizes the gauge symmetries generated by the surviving free
//!   multipliers, organized by the jet order of the symmetry parameter
//!   ([`gauge`]);
//! * assembles an involutive form whose field system closes under brackets
//!   modulo the constraints, with explicit closure coefficients
//!   ([`involutive`]);
//! * cross-checks every exact certificate numerically with an integrator and
//!   finite-difference probes ([`oracle`]).
//!
//! All symbolic computation is exact over ℚ ([`algebra`], [`linear`],
//! [`geometry`]); floating point appears only in the numeric oracle. The
//! data-parallel hot loops go through [`exec`], which uses rayon under the
//! default `parallel` feature and plain iterators without it.

pub mod algebra;
pub mod exec;
pub mod gauge;
pub mod geometry;
pub mod linear;
pub mod reduction;
pub mod stabilization;

pub use algebra::{ConstraintIdeal, Poly, RatFunc, Var, VarRegistry};

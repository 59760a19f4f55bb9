//! Computational tools for the metric theory of the inequality
//! `|a^n x + b^m y - c^p| < psi(h_{a,b})` with `h_{a,b} = max(a^n, b^m)`.
//!
//! - [`arith`]: sieved Möbius / totient / divisor tables and the coprime-counting
//!   and summatory identities used to count restricted pairs.
//! - [`forms`]: exponent triples, approximating functions, regime
//!   classification, Lebesgue/Hausdorff volume sums and dimension formulas.
//! - [`enumerate`]: exact enumeration of pairs by height, the restricted cone
//!   set, dyadic class counts and per-point solution search.
//! - [`geometry`]: strips, balls, exact strip/disk areas, angle regimes and
//!   Monte Carlo quasi-independence diagnostics.
//! - [`fractal`]: box counting of strip covers and critical exponents of the
//!   Hausdorff sums.
//! - [`pde`]: resonance scans for wave-type operators with periodic data.
//! - [`cli`]: the command-line front end.

pub mod arith;
pub mod cli;
pub mod enumerate;
pub mod error;
pub mod forms;
pub mod fractal;
pub mod geometry;
pub mod num;
pub mod pde;

pub use error::{Error, Result};
pub use forms::{ApproxFunction, DimensionFunction, Exponents, Height};

//! Core library: exact exterior algebra, cohomology ring presentations,
//! the graded-algebra embedding obstruction engine, intersection-form
//! classification of simply connected 4-manifolds, and two numerical labs
//! for quasiregular map families.
//!
//! The algebraic layer is generic over the coefficient [`scalar::Scalar`];
//! exact work runs over [`Rational`], numeric work over `f64`. Concrete
//! aliases for both modes live at the crate root.

pub mod error;
pub mod scalar;

pub mod cohomology;
pub mod exterior;
pub mod fourfold;
pub mod linalg;
pub mod measure;
pub mod obstruction;
pub mod pullback;
pub mod quad;
pub mod rotation;

pub use error::{Error, Result};
pub use scalar::{ratio, Rational, Scalar};

/// Exact-mode multivector (obstruction certificates, ring arithmetic).
pub type MultivectorQ = exterior::Multivector<Rational>;
/// Numeric-mode multivector (embedding search, witnesses).
pub type Multivector64 = exterior::Multivector<f64>;
/// Exact-mode ring presentation (validation, obstruction checks).
pub type RingQ = cohomology::RingPresentation<Rational>;
/// Numeric-mode ring presentation (embedding search input).
pub type Ring64 = cohomology::RingPresentation<f64>;

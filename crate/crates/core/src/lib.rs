//! Exact laws, couplings and Stein-method bounds for additive arithmetic
//! functions under uniform, harmonic and multiplicatively weighted laws on
//! `{1, …, n}`.
//!
//! Laws are generic over the probability scalar ([`Scalar`]): exact
//! `BigRational` for identity checks, `f64` (or `f32`) for large `n`.

pub mod additive;
pub mod bounds;
pub mod conditioned;
pub mod coupling;
pub mod error;
pub mod gaussian;
pub mod laws;
pub mod metrics;
pub mod poisson_embed;
pub mod primes;
pub mod rng;
pub mod scalar;
pub mod stein;

pub use additive::{AdditiveFunction, HypothesisConstants};
pub use error::{Error, Result};
pub use laws::DiscreteLaw;
pub use num_rational::BigRational;
pub use primes::SieveTables;
pub use scalar::Scalar;

/// Law with exact rational probabilities.
pub type ExactLaw = DiscreteLaw<BigRational>;
/// Law with double-precision probabilities.
pub type FloatLaw = DiscreteLaw<f64>;

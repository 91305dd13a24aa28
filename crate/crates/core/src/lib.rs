//! Worst-case spectral risk of a payout `b(X1, …, Xd)` over all joint laws
//! with fixed one-dimensional marginals.
//!
//! For compatible payouts the maximizer is a comonotone coupling with some
//! variables reversed ([`comonotone`]). The general discrete problem is a
//! multi-marginal transport with surplus `x0·b(x)` solved exactly by LP
//! ([`mmot`]), which also serves as the oracle for the closed form.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

pub mod comonotone;
pub mod error;
mod linalg;
pub mod marginals;
pub mod mmot;
pub mod multirisk;
pub mod payout;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Marginal64 = marginals::Marginal<f64>;
pub type Marginal32 = marginals::Marginal<f32>;
pub type DiscreteMarginal64 = marginals::DiscreteMarginal<f64>;
pub type DiscreteMarginal32 = marginals::DiscreteMarginal<f32>;
pub type SpectralFunction64 = spectral::SpectralFunction<f64>;
pub type SpectralFunction32 = spectral::SpectralFunction<f32>;
pub type Coupling64 = mmot::Coupling<f64>;
pub type LpSolution64 = mmot::LpSolution<f64>;
pub type ComonotoneSolution64 = comonotone::ComonotoneSolution<f64>;

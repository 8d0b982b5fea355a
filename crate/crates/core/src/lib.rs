//! Large-deviation rate functions for lacunary sums `S_n = f(a_1 U) + ... + f(a_n U)`.
//!
//! The crate is organised around the objects needed to compute and cross-check
//! rate functions of `S_n / n`:
//!
//! * [`fnmodel`]: 1-periodic real functions, Fourier coefficients, trigonometric
//!   approximation.
//! * [`iid_cgf`]: the cumulant generating function `log ∫ exp(θ f)` that governs
//!   the large-gap (independent-like) regime.
//! * [`legendre`]: Legendre–Fenchel transforms and Gärtner–Ellis rate curves.
//! * [`transfer_op`]: the weighted transfer operator of `ω ↦ qω mod 1` whose
//!   dominant eigenvalue gives the CGF for geometric gap sequences.
//! * [`empirical`]: direct (quadrature and Monte-Carlo) evaluation of
//!   `E[exp(θ S_n)]` and tail probabilities for arbitrary gap sequences.
//! * [`numtheory`]: exact counting of solutions to `Σ j_k a_k = 0` and the
//!   product-integral identity for trigonometric polynomials.

pub mod empirical;
pub mod error;
pub mod fnmodel;
pub mod iid_cgf;
pub mod legendre;
pub mod numtheory;
pub mod quadrature;
pub mod sequence;
pub mod transfer_op;

pub use error::{Error, Result};
pub use fnmodel::{Builtin, FourierCoefficients, PeriodicFunctionSpec, TrigPolynomial};
pub use sequence::GapSequence;

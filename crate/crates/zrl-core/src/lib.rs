//! Numerical laboratory for extreme values of the Riemann zeta function.
//!
//! The crate implements, at desk scale, the machinery behind resonance-method
//! lower bounds for `|zeta(sigma + it)|` on and near the 1-line:
//!
//! * [`primes`] — segmented sieve with prefix prime-counting and Chebyshev
//!   data, Mertens products with explicit Rosser–Schoenfeld brackets, and
//!   prime power sums over intervals.
//! * [`zeta`] — Euler–Maclaurin evaluation of `zeta(s)`, truncated Euler
//!   products `zeta(s; y)`, and the reference constants used by the report
//!   overlays (including the probabilistic-model constant built from the
//!   modified Bessel function `I0`).
//! * [`quad`] — adaptive Gauss–Kronrod quadrature with deterministic,
//!   order-fixed reductions.
//! * [`resonator`] — the friable (smooth-supported) resonator on the 1-line,
//!   its moment integrals, and the full measurement pipeline.
//! * [`galsums`] — Gál-type GCD sums, the spectral norm of GCD matrices,
//!   the multiplicative block construction with its cardinality and sifting
//!   bounds, and brute-force oracles.
//! * [`strip`] — the binned resonator, the Fejér-type kernel and its
//!   convolution identity, and the strip measurement pipeline.
//! * [`report`] — structured run reports with pass/fail records, CSV series
//!   emission, and a determinism hash.

pub mod error;
pub mod galsums;
pub mod primes;
pub mod quad;
pub mod report;
pub mod resonator;
pub mod strip;
pub mod util;
pub mod zeta;

pub use error::{Result, ZrlError};
pub use report::{CheckRecord, Measured, Relation, RunReport};

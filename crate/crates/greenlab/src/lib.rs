//! Numerical laboratory for holomorphic dynamics on complex projective space.
//!
//! The library studies degree-`d >= 2` endomorphisms of P^1 and P^2 given by
//! homogeneous polynomial lifts. It provides:
//!
//! * Fubini-Study geometry: projective points, distances, orthonormal charts
//!   ([`projective`]);
//! * endomorphisms, chart differentials and log-scale derivative cocycles
//!   ([`endomorphism`]);
//! * the escape-rate Green function and equilibrium-measure sampling by
//!   backward iteration ([`green`]);
//! * Lyapunov spectra with standard errors and the lower-bound / minimality
//!   diagnostics ([`lyapunov`]);
//! * linearization-domain memberships, mass curves, distortion profiles and
//!   the sqrt(d)-renormalization test ([`linearization`]);
//! * a Hausdorff-dimension upper bound and a correlation-dimension estimator
//!   ([`dimension`]);
//! * a zoo of reference maps with expected values ([`zoo`]).
//!
//! All randomized routines take explicit seeds and are reproducible.

pub mod dimension;
pub mod endomorphism;
pub mod error;
pub mod green;
pub mod linalg;
pub mod linearization;
pub mod lyapunov;
pub mod poly;
pub mod projective;
pub mod quasi;
pub mod stats;
pub mod util;
pub mod zoo;

pub use error::{Error, Result};

//! Exact-arithmetic toolkit for Maslov-type index iteration and
//! closed-geodesic audits on compact space forms.
//!
//! The crate is organized around a handful of small layers:
//!
//! * [`exact_scalar`]: rotation numbers as exact rationals or quadratic
//!   irrationals, with floor/ceiling/fractional-part operations that are
//!   never subject to rounding.
//! * [`normal_form`]: basic normal form decompositions of linearized
//!   Poincaré maps: nullities, splitting numbers, ellipticity classes.
//! * [`iteration`]: the precise index iteration formula, mean indices,
//!   analytical periods and growth bounds.
//! * [`loop_homology`]: equivariant Betti tables, Morse-type numbers,
//!   Morse-inequality audits and the resonance identity.
//! * [`jump`]: search for and verification of common-index-jump
//!   certificates over collections of geodesic models.
//! * [`katok`]: generator for Katok-style irrationally elliptic systems,
//!   the standard witnesses that make every audit tight.
//! * [`multiplicity`]: the counting argument combining all of the above
//!   into a multiplicity verdict.
//! * [`model`]: versioned JSON schema for systems and certificates.
//!
//! Everything is plain value semantics; all computations are deterministic
//! and safe to run from multiple threads.

pub mod exact_scalar;
pub mod iteration;
pub mod jump;
pub mod katok;
pub mod loop_homology;
pub mod model;
pub mod multiplicity;
pub mod normal_form;

pub use exact_scalar::{CertifiedCmp, ExactScalar, FieldSum, ScalarError};
pub use iteration::{GeodesicModel, GeodesicSystem};
pub use jump::{JumpCertificate, SearchParams, VerificationRecord};
pub use normal_form::{NormalFormBlock, NormalFormDecomposition};

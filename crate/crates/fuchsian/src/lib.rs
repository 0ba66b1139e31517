//! Decide whether two finitely generated Fuchsian groups, given by their
//! signatures, are isomorphic, and when they are not, construct a finite
//! group that is a quotient of exactly one of them together with a
//! machine-checkable certificate of that fact.
//!
//! A signature `(g; p; m1, ..., mk)` records the genus `g`, the puncture
//! count `p`, and the multiset of cone orders `m`. Two signatures present
//! isomorphic groups exactly when their normal forms agree, so the
//! interesting work is the converse direction: for non-isomorphic pairs we
//! produce a distinguishing quotient by comparing abelianizations, Betti
//! numbers of torsion-free kernels, and degrees of smoothness of carefully
//! chosen finite representations.
//!
//! The crate is organized bottom-up:
//!
//! * [`arith`]: exact integer and rational utilities (factorization,
//!   valuations, Mobius and totient functions, CRT).
//! * [`signatures`]: parsing, normalization, Euler characteristics.
//! * [`abelianization`]: abelian invariants of a signature.
//! * [`scrapes`]: divisor-multiset operations that locate a scale at which
//!   two cone multisets differ.
//! * [`scrape_matrices`]: the exact linear algebra certifying that scrape
//!   data determines signatures.
//! * [`finite_groups`]: concrete finite groups (cyclic, dihedral,
//!   `PSL(2,q)`, degree-4 permutations) and homomorphism enumeration.
//! * [`smooth_reps`]: smooth representations (dihedral and `PSL(2,q)`),
//!   degrees of smoothness, and kernel signatures.
//! * [`distinguisher`]: the top-level decision procedure and certificate
//!   construction/verification.
//!
//! All arithmetic is exact; there is no floating point anywhere in the
//! decision path.

pub mod abelianization;
pub mod arith;
pub mod distinguisher;
pub mod finite_groups;
pub mod scrape_matrices;
pub mod scrapes;
pub mod signatures;
pub mod smooth_reps;

use thiserror::Error;

/// Errors shared across the crate.
///
/// Precondition violations (bad input, non-prime moduli and the like) are
/// distinguished from capacity limits (search caps, group-size ceilings) and
/// from internal contradictions, which indicate that a guaranteed search
/// failed and therefore a bug or an impossible input slipped through.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A parameter that must be prime was not.
    #[error("{0} is not prime")]
    NotPrime(u64),
    /// A congruence system had moduli sharing a common factor.
    #[error("moduli {0} and {1} are not coprime")]
    NonCoprimeModuli(u128, u128),
    /// An argument was required to divide another quantity but did not.
    #[error("{0} does not divide {1}")]
    NotADivisor(u64, u64),
    /// A documented precondition of the called operation failed.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A malformed signature string.
    #[error("cannot parse signature: {0}")]
    Parse(String),
    /// The signature does not present a Fuchsian group (`chi >= 0`).
    #[error("signature {0} is not Fuchsian (orbifold Euler characteristic is nonnegative)")]
    NotFuchsian(String),
    /// The two input groups are isomorphic, so no distinguishing quotient exists.
    #[error("the two groups are isomorphic; no distinguishing quotient exists")]
    Isomorphic,
    /// The named group is not a homomorphic image of the signature group.
    #[error("{group} is not a quotient of {signature}")]
    NotAQuotient { group: String, signature: String },
    /// A search exceeded its configured cap.
    #[error("prime power scan exceeded the cap {cap}")]
    ScanCapExceeded { cap: u64 },
    /// A group was too large for the requested exhaustive operation.
    #[error("group of order {order} exceeds the limit {limit} for this operation")]
    GroupTooLarge { order: u128, limit: u128 },
    /// A generator-image enumeration would visit too many assignments.
    #[error("enumerating {assignments} generator assignments exceeds the budget {limit}")]
    EnumerationTooLarge { assignments: u128, limit: u128 },
    /// A search that theory guarantees to succeed came up empty.
    #[error("internal contradiction: {0}")]
    Internal(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

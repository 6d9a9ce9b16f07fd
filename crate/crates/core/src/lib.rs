//! Byzantine-resilient coded gradient aggregation.
//!
//! A parameter server receives one compressed vector per worker. Workers are
//! split into `q` groups of `r = 2s + r_c` members; every member of a group
//! sums the same gradients and sends a Vandermonde-weighted projection of that
//! sum that is `r_c` times shorter than a gradient. The decoder locates up to
//! `s` corrupted workers per group with a random probe and a rational
//! interpolant, then rebuilds each group sum from `r_c` trusted columns.
//!
//! ```text
//!  G (d x P) --allocate--> ybar_j (per group) --encode--> Z (d_c x P)
//!                                                         |
//!                                  R = Z + N  <--inject---+
//!                                  |
//!                   locate (phi) --+--> block decode (psi) --> u = G 1_P
//! ```
//!
//! Modules:
//! - [`codec`]: configuration gate, allocation, weights and the encoder.
//! - [`decoder`]: probe vectors, adversary location and block recovery.
//! - [`adversary`]: attack models and noise injection.
//! - [`oracle`]: dense encoder and subset-enumeration decoder used as references.
//! - [`digitcodec`]: decimal digit interleaving (lossless compression of
//!   integer blocks, irregular encoder demonstration).
//! - [`sim`]: deterministic parameter-server SGD simulation.

pub mod adversary;
pub mod codec;
pub mod decoder;
pub mod digitcodec;
pub mod exec;
mod linalg;
pub mod oracle;
mod rng;
pub mod sim;
pub mod trials;

pub use adversary::{inject, AdversarySelection, AttackKind, AttackSpec, InjectContext};
pub use codec::{
    build_allocation, encode_all, encode_worker, make_weights, validate_config, vandermonde,
    AllocationMatrix, CodecError, EncodedMatrix, GradientMatrix, MechanismConfig, WeightScheme,
    WeightSet,
};
pub use decoder::{
    decode, decode_with, derive_probes, DecodeError, DecodeReport, DecoderOptions,
    GroupDiagnostics, LocatorSolution, ProbeVector,
};
pub use exec::Exec;

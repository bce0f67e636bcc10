//! Simulation library for LDPC min-sum decoders whose stop condition is
//! guarded by a key.
//!
//! The crate covers the full pipeline at desk scale: quasi-cyclic
//! parity-check construction, binary-symmetric-channel transmission, scaled
//! min-sum decoding (standard and secret-offset variants), key-controlled
//! stop conditions with stop-set censuses, functional models of
//! oracle-guided key-recovery attacks, and a deterministic Monte-Carlo
//! harness that measures frame error rates and iteration counts under
//! correct, wrong, and faulted configurations.
//!
//! The `ldpc-lock` binary exposes the same machinery as subcommands; see the
//! README for the CLI catalogue and the code-definition file format.

pub mod attacks;
pub mod channel;
pub mod decoder;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod locking;
pub mod qc;
pub mod stats;

pub use error::{Error, Result};
pub use gf2::BitVec;
pub use qc::QcParityMatrix;

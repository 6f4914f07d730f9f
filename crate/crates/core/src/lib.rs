//! Coarse-grained kinetic Monte Carlo for 1-D adsorption/desorption
//! lattice dynamics.
//!
//! The crate implements the full hierarchy of spin-flip processes on a
//! periodic lattice — microscopic (`q = 1`), block-spin coarse-grained
//! (`1 < q ≤ N`) and the synthetic site-resolution process driven by
//! coarse rates — together with a brute-force oracle (exact Gibbs
//! measures, generator matrices, detailed-balance audits) and the
//! observable/error toolkit used to compare levels of the hierarchy.

pub mod analysis;
pub mod error;
pub mod field;
pub mod kmc;
pub mod lattice;
pub mod oracle;
pub mod rng;

pub use error::{AnalysisError, KmcError, ModelError, OracleError};
pub use field::{ExternalField, FieldMode};
pub use lattice::{CoarseConfig, LatticeSpec, MicroConfig, PotentialModel, Shape};

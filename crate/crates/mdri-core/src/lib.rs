//! Norms of random vectors in multidimensional rearrangement-invariant
//! probability spaces, with the exponential and polynomial tail bounds they
//! induce, certified against Monte Carlo simulation.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//!   generating functions (ψ, φ, ν)  ──►  norms over direction sets
//!          │                                   │
//!          ▼                                   ▼
//!   numeric conjugation (Legendre)      covering numbers / entropy
//!          │                                   │
//!          └────────►  tail bounds  ◄──────────┘
//!                          │
//!                          ▼
//!            Monte Carlo dominance certification
//! ```
//!
//! Every "sup over a continuous parameter" is a user-supplied grid sweep plus
//! one golden-section refinement pass, so results are deterministic and
//! testable against finer-grid oracles. All hot loops run data-parallel under
//! the `parallel` feature (default) with a bit-identical sequential fallback.

pub mod chaining;
pub mod convex_geometry;
pub mod error;
pub mod exec;
pub mod fenchel;
pub mod grids;
pub mod linalg;
pub mod mdri_norm;
pub mod simulate;
pub mod space_functions;
pub mod sums;
pub mod tail_bounds;

pub use error::{MdriError, Result};

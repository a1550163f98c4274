//! Dyadic lattices, martingale decompositions and certified `L^2(mu)` bounds for singular
//! integral operators on finite quasi-metric measure spaces with non-doubling measures.
//!
//! The crate is organised bottom-up:
//!
//! * [`space`]: the finite space, balls, and the regularity/growth/capture checks.
//! * [`lattice`]: random dyadic lattices, skeletons, terminal/transit and good/bad cubes.
//! * [`projections`]: averages and martingale differences.
//! * [`montecarlo`]: ensemble estimates over independent random lattices.
//! * [`kernel`]: kernels, the induced operators and kernel hypotheses.
//! * [`certify`]: the interaction decomposition and the per-estimate checks that assemble a
//!   certified operator-norm bound.
//! * [`harness`]: example generators, scenarios and end-to-end runs.
//! * [`io`]: JSON formats.

pub mod certify;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod montecarlo;
pub mod projections;
pub mod space;
pub mod util;

pub use error::{Error, Result};

//! Simulation and numerical analysis of critical branching random walks.
//!
//! The crate covers two routes to the law of the rescaled occupation count
//! `Z^(n)(-inf, sqrt(n) x] / n` conditioned on survival to generation `n`:
//!
//! * exact Monte Carlo through the conditioned reduced tree
//!   ([`sampler::sample_conditioned`]), checked against a rejection sampler;
//! * deterministic evaluation of the limiting moments `mu_r(x)` by nested
//!   Gaussian quadrature ([`moments::build_moment_grid`]).
//!
//! Spine (many-to-one / many-to-two) formulas in [`spine`] give exact finite-`n`
//! moments, and [`bbm`] simulates the limiting binary branching Brownian
//! motion. [`harness`] ties the routes together for the command-line tool.

pub mod bbm;
pub mod config;
pub mod displacement;
pub mod error;
pub mod exec;
pub mod harness;
pub mod moments;
pub mod normal;
pub mod offspring;
pub mod quadrature;
pub mod reduced;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod spine;
pub mod stats;
pub mod tree;

pub use displacement::DisplacementLaw;
pub use error::{Error, Result};
pub use moments::{MomentGrid, QuadratureSpec};
pub use offspring::{ExtinctionTable, OffspringLaw};
pub use reduced::{ReducedLaws, ReducedOffspringLaw};
pub use tree::{OccupationSample, SpatialTree};

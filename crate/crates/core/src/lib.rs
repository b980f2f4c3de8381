//! Quasi-reversibility reconstruction of parabolic sources and coefficients.
//!
//! The pieces, bottom up:
//!
//! * [`grid`] and [`fields`]: the space-time grid, lineup indexing and the
//!   sampled functions living on it.
//! * [`sparse`]: CSR matrices, Gram products and SPD solvers.
//! * [`forward`]: Crank-Nicolson simulation of the direct problems and the
//!   boundary flux they produce.
//! * [`noise`]: seeded multiplicative noise for synthetic measurements.
//! * [`qr`]: assembly and solution of the regularized least-squares system
//!   that recovers the source factor `p(x)`.
//! * [`cip`]: the linearization iteration for the coefficient `c(x)`.
//! * [`phantoms`]: the synthetic truths used to manufacture data.

pub mod cip;
pub mod error;
pub mod fields;
pub mod forward;
pub mod grid;
pub mod noise;
pub mod phantoms;
pub mod qr;
pub mod sparse;

pub use error::{Error, Result};
pub use fields::{BoundaryFluxSeries, BoundaryKind, BoundarySeries, SpaceTimeField, SpatialField};
pub use grid::{BoundaryNode, GridSpec, NodeIndex, Side};
pub use noise::{apply_noise, NoiseSpec};
pub use sparse::SparseMatrixCsr;

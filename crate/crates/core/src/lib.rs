//! Multiscale solver for the nonlinear Darcy-Forchheimer flow model on
//! heterogeneous porous media.
//!
//! The fine-grid reference discretization is a multipoint flux mixed finite
//! element method (BDM1 velocity, piecewise constant pressure, corner
//! quadrature), which reduces every linearized step to a cell-centred SPD
//! pressure system. Coarse pressure spaces are built with a generalized
//! multiscale method: spectral offline spaces from local snapshots, residual
//! driven offline updates and online enrichment.

pub mod error;
pub mod fields;
pub mod fine_solver;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod mfmfe;
pub mod offline;
pub mod online;
pub mod schur;

pub use error::{Error, Result};

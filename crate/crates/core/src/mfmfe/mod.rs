//! Multipoint flux mixed finite element discretization on quadrilaterals:
//! the BDM1 reference element, Piola mapping, corner (trapezoidal)
//! quadrature and the global vertex-block / divergence assembly.

mod assembly;
mod boundary;
mod element;
mod reference;

pub use assembly::{
    assemble_divergence, assemble_velocity_matrix, corner_speeds, corner_velocities, corner_velocity,
    BlockFactor, CoefficientAtCorners, DivergenceMatrix, VertexBlockMatrix,
};
pub use boundary::{assemble_rhs, BcKind, BoundaryConditions, BoundaryValue, Rhs};
pub use element::{
    corner_block, corner_block_physical, corner_load, corner_velocity_local, piola, piola_at,
};
pub use reference::{all_reference_basis, reference_basis, reference_normal, Bdm1Function};

//! Interaction kernel and confining potentials.

mod assumptions;
mod catalog;
pub mod kernel;

pub use assumptions::{check_assumptions, AssumptionReport, Check};
pub use catalog::{
    catalog, make_potential, ConfiningPotential, GrowthClass, PotentialSpec, Shape, DEFAULT_K_MAX,
    DEFAULT_REG_RADIUS,
};
pub use kernel::InteractionKernel;

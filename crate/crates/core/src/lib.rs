//! Larc simulation: Fock-space algebra, larc reductions, scenarios,
//! statistics, and the `.larc` scenario format.

pub mod cli;
pub mod dsl;
pub mod fock;
pub mod larc;
pub mod product;
pub mod scenario;
pub mod stats;
pub mod verify;

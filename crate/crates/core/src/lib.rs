pub mod cli;
pub mod error;
pub mod families;
pub mod homotopy;
pub mod invariants;
pub mod io;
pub mod linalg;
pub mod mps_core;
pub mod tolerances;
pub mod transfer;

pub mod error;
pub mod field;
pub mod lattice;
pub mod par;
pub mod shortest_path;

pub use error::{Error, Result};
pub mod front;
pub mod io;
pub mod stable_norm;
pub mod hamiltonian;
pub mod geodesic;
pub mod cli;

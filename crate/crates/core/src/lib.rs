//! Compressible Navier-Stokes with potential temperature transport in the
//! variables `(u, rho, Z)`, `Z = rho * theta`, on a uniform 2D grid.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod io;
pub mod lame;
pub mod linalg;
pub mod march;
pub mod momentum;
pub mod picard;
pub mod transport;

pub use error::{Error, Result};

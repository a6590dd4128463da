//! Analysis toolkit for the cyclically symmetric Thomas system
//! `x' = sin y − b x`, `y' = sin z − b y`, `z' = sin x − b z`.

pub mod cli;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod io;
pub mod model;
pub mod metrics;
pub mod numeric;
pub mod schema;
pub mod sections;
pub mod walk;

pub use error::{Error, Result};
pub use model::{Damping, EigenTriple, State3};

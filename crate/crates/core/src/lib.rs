//! Numerical geometry of Lagrangian submanifolds in the homogeneous nearly Kähler S³×S³.

pub mod builder;
pub mod catalog;
pub mod connection;
pub mod error;
pub mod immersion;
pub mod invariants;
pub mod io;
pub mod jet;
pub mod nkspace;
pub mod quat;
pub mod suites;
pub mod transforms;

pub use error::{NkError, Result};

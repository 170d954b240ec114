//! Desk-scale laboratory for the small-field parabolic block-spin renormalization
//! group of a lattice Bose gas.

pub mod error;
pub mod flow;
pub mod action;
pub mod background;
pub mod cli;
pub mod lattice_ops;
pub mod linalg;
pub mod norms;
pub mod spectral;
pub mod symbols;
pub mod torus;

pub use error::{RgError, RgResult};

pub mod ainfty;
pub mod cli;
pub mod cover;
pub mod dyadic;
pub mod error;
pub mod measure;
pub mod oscillate;
pub mod pde;
pub mod potential;
pub mod suite;

pub use error::{Error, Result};

pub mod cli;
pub mod config;
pub mod error;
pub mod germ;
pub mod ito_algebra;
pub mod linalg;
pub mod semigroup;
pub mod unraveling;

pub use error::{Error, Result};

pub mod benchmarks;
pub mod cli;
pub mod drro;
pub mod eval;
pub mod error;
pub mod io;
pub mod linalg;
pub mod ratapprox;
pub mod realize;
pub mod spectral;
pub mod sysmodel;

pub use error::{Error, ErrorClass, Result};

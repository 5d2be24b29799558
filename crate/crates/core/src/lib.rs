pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod interp;
pub mod io;
pub mod kinetic;
pub mod spectral;
pub mod verify;

pub use error::{NsvError, Result};

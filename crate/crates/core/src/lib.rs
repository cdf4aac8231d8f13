pub mod aa_theory;
pub mod anderson;
pub mod constitutive;
pub mod error;
pub mod fem;
pub mod poromech;
pub mod runner;
pub mod schemes;

pub use error::{Error, Result};

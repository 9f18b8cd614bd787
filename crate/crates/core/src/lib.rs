pub mod chart;
pub mod ddesolver;
pub mod delays;
pub mod error;
pub mod funcspace;
pub mod functionals;
pub mod harness;
pub mod rfde;
pub mod roots;
pub mod transversal;

pub use error::{Error, Result};
pub use funcspace::{C0Fn, C1Fn, FnData, Grid, GridSpec};

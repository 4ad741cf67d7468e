pub mod acquisition;
pub mod bounds;
pub mod cluster;
pub mod error;
pub mod gp;
pub mod gradient;
pub mod harness;
pub mod kernel;
pub mod inputs;
pub mod linalg;
pub mod optimize;
pub mod qn;
pub mod sensitivity;
pub mod sobol;
pub mod support;
pub mod testbed;

pub use error::{Error, Result};

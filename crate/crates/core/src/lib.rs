//! Model-free output tracking for discrete-time linear systems.

pub mod error;
pub mod learner;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod reconstruction;
pub mod system;

pub use error::{Error, Result};

pub mod config;
pub mod corpus;
pub mod error;
pub mod frequency;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod onephase;
pub mod oracle;
pub mod plot;
pub mod regularity;
pub mod signorini;
pub mod suite;

pub use error::{LabError, Result};

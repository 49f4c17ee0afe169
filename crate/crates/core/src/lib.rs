pub mod array;
pub mod error;
pub mod field;
pub mod metric;
pub mod poset;

pub use error::{Error, Result};
pub mod acceptance;
pub mod bounds;
pub mod code;
pub mod construct;
pub mod search;

pub mod ars;
mod binfmt;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod ppo;
pub mod registry;
pub mod rewards;
pub mod seeds;
pub mod sim;
pub mod task;

pub use error::{Error, Result};

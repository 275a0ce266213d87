pub mod baselines;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod net;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

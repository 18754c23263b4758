//! Posted-price auctions where the buyer sees only a mask of the item.

pub mod env;
pub mod error;
pub mod etc_finite;
pub mod etc_simhash;
pub mod exp4vc;
pub mod harness;
pub mod oracle;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};

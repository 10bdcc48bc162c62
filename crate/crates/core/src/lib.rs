pub mod error;
pub mod eval;
pub mod geometry;
pub mod keypoint;
pub mod model;
pub mod nn;
pub mod seed;
pub mod synthdata;
pub mod tracker;
pub mod trajectory;
pub mod train;
pub mod verify;
pub mod encode;

pub use error::{Error, Result};

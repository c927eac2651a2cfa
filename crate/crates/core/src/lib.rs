#![no_std]
extern crate alloc;

pub mod api;
pub mod bits;
pub mod circuit;
pub mod crypto;
pub mod elwm;
pub mod error;
pub mod linalg;
pub mod pe;
pub mod pirates;
pub mod quantum;
pub mod spectral;
pub mod wmprf;

pub use error::{Error, Result};

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bpst;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod math;
pub mod mesh;
pub mod optim;
pub mod robust;
pub mod select;
pub mod simulate;
pub mod usplines;

pub use error::{Error, Result};

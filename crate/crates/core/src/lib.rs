// SPDX-License-Identifier: Apache-2.0

pub mod analysis;
pub mod environment;
pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use numerics::{Sign, SignedLog};

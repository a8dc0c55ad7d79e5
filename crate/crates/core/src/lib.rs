//! View-guided skeleton CNN for arbitrary-view action recognition.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. It holds the skeleton data model, the synthetic multi-view
//! generator, the image encoder, the view-group predictor, the four
//! view-guided channels, weighted fusion, the training procedures and the
//! evaluation protocols. File formats and the command line live in the
//! `vscnn` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channels;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod nn;
pub mod optim;
pub mod skeleton;
pub mod synth;
pub mod train;
pub mod view_groups;

pub use error::{Error, Result};

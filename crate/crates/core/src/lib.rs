//! Simulation of relativistic quantum bit commitment over a noisy channel.
//!
//! A commits to a bit by sending `N * k` single photons whose spatio-temporal
//! amplitude consists of two well separated humps. While only the leading hump
//! has reached B, the two polarizations encoding 0 and 1 cannot be told apart
//! better than a fair coin on half the outcomes; once the whole packet has
//! arrived they can. The crate models every piece of that story:
//!
//! - [`siggrid`]: sampled amplitudes on a uniform tau grid.
//! - [`states`]: the double-hump input states.
//! - [`channel`]: the channel instrument, its validation and its covariant
//!   extension to delayed inputs.
//! - [`measure`]: windowed measurements, the optimal polarization POVM and the
//!   outcome sampler.
//! - [`coding`]: block-parity encoding and the combinatorial error formulas.
//! - [`attacks`]: early measurement by B, delayed and flipped commitments by A.
//! - [`protocol`]: the two-party run with verification.
//! - [`config`] and [`cli`]: the `relbc` command-line front end.

pub mod attacks;
pub mod channel;
pub mod cli;
pub mod coding;
pub mod config;
pub mod error;
pub mod measure;
pub mod protocol;
pub mod rng;
pub mod siggrid;
pub mod states;
pub mod stats;

pub use error::{Error, Result};

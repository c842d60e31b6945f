//! Tolerance-enforced strong simulation of multidimensional stochastic
//! differential equations.
//!
//! A Brownian motion on `[0, 1]` is generated lazily from its Haar
//! (Lévy–Ciesielski) coefficients. Almost-sure bounds on the Hölder norm of
//! the path and on its Lévy area are certified by sampling the last record
//! breakers exactly, after which an Euler scheme on the certified dyadic
//! skeleton is guaranteed to lie within a user-chosen `ε` of the true solution
//! in the uniform norm.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod area_record_sampler;
pub mod dyadic_bm;
pub mod error;
pub mod error_constants;
pub mod gauss;
pub mod levy_area;
pub mod params;
pub mod record_breakers;
pub mod rng;
pub mod sde_engine;
pub mod tilting;

pub use error::TesError;
pub use params::Params;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, TesError>;

//! Bloch bands, cell correctors, and effective-wave factorization checks
//! for a 1-D Schrödinger equation with a `1/ε²`-scaled periodic potential
//! and scalar white-noise forcing.
//!
//! The pipeline has three layers:
//!
//! 1. **Cell spectrum** ([`periodic`], [`cell`], [`bands`]): plane-wave
//!    Galerkin discretization of the shifted spectral cell problem on the
//!    unit torus, dense Hermitian eigensolves ([`eigen`]), Bloch band sweeps
//!    and critical-point location.
//! 2. **Correctors and the effective model** ([`correctors`],
//!    [`effective`]): singular cell problems solved through the Fredholm
//!    alternative, band curvature extracted three independent ways, and the
//!    homogenized coefficients `σ*`, `d*(x)`, `g*`.
//! 3. **Stochastic integration and diagnostics** ([`wiener`], [`spde`],
//!    [`harness`]): Cayley-midpoint/Itô time stepping of the fast problem in
//!    the demodulated frame and of the homogenized problem on a shared
//!    Wiener path, factorization-error measurement, two-scale pairings, and
//!    ε-sweeps with Monte Carlo averaging.
//!
//! Configuration, persistence and plotting live in [`config`], [`report`]
//! and [`plot`]; the `effwave` binary exposes the stages as subcommands.

pub mod bands;
pub mod cell;
pub mod config;
pub mod correctors;
pub mod effective;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod periodic;
pub mod plot;
pub mod profile;
pub mod report;
pub mod spde;
pub mod wiener;

pub use error::{Error, Result};

/// Map an indexed computation over a slice of inputs, in parallel when the
/// `parallel` feature is enabled. Output order always matches input order,
/// so reductions downstream are deterministic at any thread count.
pub(crate) fn map_indexed<T, U, F>(inputs: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        inputs.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        inputs.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

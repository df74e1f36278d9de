//! Copula structure of one-dimensional diffusion processes.
//!
//! The crate is organised bottom-up:
//!
//! * [`special_fn`]: normal, gamma, Bessel and (noncentral) chi-square kernels,
//!   plus the quadrature and root-finding machinery they share.
//! * [`models`]: a catalog of diffusions with exact transition kernels.
//! * [`stt`]: space-time transformations and pushforwards of kernels and copulas.
//! * [`copula`]: copula surfaces of diffusions (closed forms and generic ones).
//! * [`uniformize`]: the uniformized process `F_t(X_t)`: coefficients, PDE
//!   residuals, exact simulation and empirical copulas.
//! * [`recombine`]: new diffusions from a source copula and target marginals.
//! * [`validate`]: the invariant suites run by `diffcop validate`.
//! * [`cli`]: argument parsing and subcommand dispatch.

// `!(x > 0.0)` deliberately rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod copula;
pub mod error;
pub mod models;
pub mod recombine;
pub mod special_fn;
pub mod stats;
pub mod stt;
pub mod uniformize;
pub mod validate;

pub use error::{Error, Result};

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
//! Heat kernels, spectra and Brownian motion on compact metric graphs.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: graph model and path metric, closed-form and path-sum heat
//! kernels, a secular-determinant eigensolver used as an independent oracle,
//! Dirichlet-killed kernels and locality certificates, the heat trace of the
//! two-particle symmetric product, Monte Carlo diffusion with first-exit
//! splicing, and the difference-quotient energy forms `E_r`.
//!
//! File formats, the command line and parallel orchestration live in the
//! `hklab` crate.
//!
//! Conventions: the Laplacian is `-d²/ds²` on every edge and the heat kernel
//! on the real line is `exp(-d²/4t)/sqrt(4πt)`, so Brownian motion has
//! variance `2t` at time `t`.

extern crate alloc;

pub mod dirichlet;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod locality;
pub mod math;
pub mod mc;
pub mod quadrature;
pub mod spectral;
pub mod two_particle;
pub mod walks;

pub use crate::error::{Error, Result};
pub use crate::graph::{
    EdgeIx, GraphPoint, HalfEdge, MetricGraph, ScatteringMatrix, Side, VertexCondition, VertexIx,
};
pub use crate::kernel::KernelEval;

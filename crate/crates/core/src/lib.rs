//! Low displacement rank (LDR) matrices and neural-network layers built on them.
//!
//! - [`operator`] and [`displacement`]: displacement operators, Stein/Sylvester
//!   displacement, numerical displacement rank, compression and decompression.
//! - [`structured`]: circulant, Toeplitz, Hankel, Vandermonde and Cauchy matrices
//!   with FFT-accelerated products where available ([`fourier`]).
//! - [`construct`]: embedding any vector as a column of a displacement-rank-1
//!   matrix, and the one-neuron network built from it.
//! - [`layer`] and [`network`]: the LDR fully connected layer with generator
//!   gradients, stacked under a linear readout.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod construct;
pub mod displacement;
pub mod error;
pub mod fourier;
pub mod layer;
pub mod linalg;
pub mod network;
pub mod operator;
pub mod structured;

pub use activation::Activation;
pub use construct::{
    construct_with_column, embed_as_network, find_selector, solve_generator, ColumnEmbedder,
    ColumnEmbedding, OneHotNetwork, Selector,
};
pub use displacement::{
    compress, displacement_rank, displacement_rank_with, reconstruct, stein_displacement,
    sylvester_displacement, DisplacementForm, DisplacementRep, OperatorPair, Transform, RANK_TOL,
};
pub use error::{LdrError, Result};
pub use fourier::FourierPlan;
pub use layer::{BatchCache, LayerCache, LayerGradients, LdrLayer, ParameterCount};
pub use linalg::{Matrix, Vector};
pub use network::{NetworkBatchCache, NetworkCache, NetworkGradients, NetworkModel};
pub use operator::{check_potency, eigendecompose, EigenDecomp, OperatorKind, OperatorMatrix, Potency};
pub use structured::{Family, MatvecKernel, StructuredMatrix};

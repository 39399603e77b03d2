//! Secret-key content of tripartite distributions and of their coherent and
//! incoherent quantum embeddings.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// index loops over parallel arrays; negated comparisons reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod classify;
pub mod common;
pub mod dequantize;
pub mod dist;
pub mod embed;
pub mod entangle;
pub mod error;
pub mod keyrate;
pub mod qlinalg;
pub mod reproduce;
pub mod scalar;

pub use error::{Error, Result, Violation};
pub use scalar::Real;

pub type Dist2 = dist::Dist2<f64>;
pub type Dist3 = dist::Dist3<f64>;
pub type JointPmf = dist::JointPmf<f64>;
pub type Channel = dist::Channel<f64>;
pub type CMatrix = qlinalg::CMatrix<f64>;
pub type QState = qlinalg::QState<f64>;
pub type PureState = qlinalg::PureState<f64>;
pub type PhaseAssignment = embed::PhaseAssignment<f64>;
pub type InstrumentTree = dequantize::InstrumentTree<f64>;
pub type ClassicalProtocol = dequantize::ClassicalProtocol<f64>;

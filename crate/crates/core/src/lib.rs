//! Chart-level tensor calculus for degenerate (light-like) metrics.
//!
//! A light-like chart carries a symmetric (0,2) tensor field `g` whose
//! pointwise matrix is singular with constant co-rank `r`. Given a frame
//! `ξ₁..ξ_r` of the radical (the null distribution of `g`) and a coframe
//! `τ₁..τ_r` with `τᵢ(ξⱼ) = δᵢⱼ`, the augmented metric
//! `ḡ = g + Σ τ_k ⊗ τ_k` is non-degenerate, and for any prescribed torsion
//! `T` and non-metricity `Q` there is a unique linear connection on the chart
//! with torsion `T`, non-metricity `Q` and all `τᵢ` parallel — provided two
//! compatibility conditions between `T`, `Q`, the coframe and the radical
//! frame hold. This crate constructs that connection and certifies every
//! condition numerically over a seeded sample cloud.
//!
//! Everything is formulated on a single coordinate chart with a declared
//! domain box. Component functions are closed-form expressions in the chart
//! coordinates (see [`expr`]) or opaque callbacks differentiated by central
//! finite differences.
//!
//! The crate is `no_std`-compatible (`alloc` required): disable the default
//! `std` feature and enable `libm` instead.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("lightlike-core needs either the `std` feature or the `libm` feature");

extern crate alloc;

mod float;
pub mod linalg;

pub mod bundle;
pub mod connection;
pub mod expr;
pub mod tensor;
pub mod verify;

pub use bundle::{AugmentedMetric, DegenerateMetricBundle};
pub use connection::ConnectionField;
pub use expr::{parse_expression, ScalarExpression};
pub use tensor::{ChartPoint, DomainBox, TensorField, TensorValue, Variance};
pub use verify::{ConditionId, ConditionReport, PipelineReport, VerificationConfig};

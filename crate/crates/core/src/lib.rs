//! Path signatures and their recovery from controlled differential equation
//! solutions driven by random vector fields.
//!
//! The pieces: truncated signatures of piecewise linear paths ([`signature`]),
//! vector field models with exact jets ([`fields`], [`jet`]), labeled trees
//! and word operators ([`trees`], [`word`]), numerical rank certificates
//! ([`independence`]), a controlled ODE solver ([`cde`]) and the
//! reconstruction pipeline ([`reconstruct`]).

pub mod cde;
pub mod error;
pub mod fields;
pub mod independence;
pub mod jet;
pub mod linalg;
pub mod reconstruct;
pub mod rng;
pub mod signature;
pub mod testfn;
pub mod trees;
pub mod word;

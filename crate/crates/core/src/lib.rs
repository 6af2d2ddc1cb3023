//! Numerical edge pseudodifferential calculus on a truncated grid: group
//! actions, wedge Sobolev norms, operator-valued symbols, τ-quantization,
//! symbolic expansions and Schatten-class diagnostics.

pub mod analysis;
pub mod calculus;
pub mod error;
pub mod grid;
pub mod group_action;
pub mod jet;
pub mod linalg;
pub mod littlewood_paley;
pub mod quantization;
pub mod symbols;

pub use error::{Error, Result};

//! Toolkit for size-sensitive structure in finite set systems: separated
//! packings and their unit-distance graphs, multilevel chain decompositions,
//! constrained-random-walk partial colorings with size-aware budgets, a
//! bounded-degree coloring variant, and small representative samples obtained
//! by iterated halving.

pub mod bits;
pub mod chaining;
pub mod cli;
pub mod criteria;
pub mod epsapprox;
pub mod error;
pub mod geomgen;
pub mod packing;
pub mod partialcolor;
pub mod rng;
pub mod setsystem;
pub mod sizesens;

pub use error::{DiscError, Result};

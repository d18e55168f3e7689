//! Computational toolkit for rational Newton maps: channel diagrams, Newton graphs,
//! truncated puzzles, polynomial-like restrictions and critical-orbit injections.
// Negated float comparisons are deliberate: NaN must fall on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basin;
pub mod error;
pub mod fsi;
pub mod graph;
pub mod io;
pub mod lift;
pub mod newton;
pub mod newton_graph;
pub mod orbits;
pub mod poly;
pub mod puzzle;
pub mod rational;
pub mod render;
pub mod renorm;
pub mod report;
pub mod roots;
pub mod sphere;
pub mod tolerances;

pub use error::{Error, Result};
pub use newton::{head_check, newton_map, NewtonMapDescriptor};
pub use poly::ComplexPolynomial;
pub use rational::RationalMap;
pub use sphere::{Point, C64};
pub use tolerances::Tolerances;

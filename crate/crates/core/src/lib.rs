//! Static analysis of quantum while-programs over subspace abstract domains.
//!
//! The crate executes programs on partial density operators ([`concrete`]),
//! abstracts sets of states by subspaces or tuples of local subspaces
//! ([`domain`]), and checks Hoare and incorrectness triples with replayable
//! derivations ([`logic`]).

pub mod concrete;
pub mod domain;
pub mod lang;
pub mod linalg;
pub mod logic;
pub mod random;
pub mod subspace;

pub use linalg::{ComplexMatrix, QubitLayout, Tolerances, C64};
pub use subspace::Subspace;

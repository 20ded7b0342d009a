//! Finite-domain tools for polymorphism clones of relational structures:
//! homomorphisms and cores, pp-constructions, reflections, free structures
//! and colorings, height-1 conditions and Maltsev-condition tests.

pub mod budget;
pub mod clone;
pub mod constructions;
pub mod error;
pub mod fixtures;
pub mod free;
pub mod hom;
pub mod identities;
pub mod maltsev;
pub mod report;
pub mod structures;

mod search;

pub use budget::{Decision, Limits, SearchBudget};
pub use clone::{compose, preserves, preserves_all, projection, CloneGenSet, OperationTable};
pub use error::{Error, Result};
pub use hom::{HomMap, Core};
pub use structures::{parse_structure, power_structure, Elem, RelStructure, Relation, Signature, TupleCoding};

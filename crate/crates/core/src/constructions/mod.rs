//! Relational and algebraic constructions: pp-formulas, pp-powers,
//! pp-definability, reflections and pp-interpretations.

mod definability;
mod interpretation;
mod power;
mod pp;
mod reflection;

pub use definability::{DEFAULT_CAP, is_pp_definable, is_pp_definable_with_cap, Definability};
pub use interpretation::{check_pp_interpretation, PpInterpretation};
pub use power::{
    bounded_pp_search, check_pp_constructible, pp_power, pp_power_with, PPPowerSpec, PpBounds, PpConstruction,
    PpSearchOutcome,
};
pub use pp::{evaluate_pp, parse_pp_definitions, parse_pp_formula, Atom, PPFormula};
pub use reflection::{reflect_assignment, reflect_operation, reflect_operations, ReflectionMaps};

//! A finite-domain CSP workbench.
//!
//! Relations, pp-formulas and partial polymorphisms, the R^B-extension and
//! saturation machinery, constant- and linear-variable reductions between CSPs,
//! and exhaustive and branching solvers with node accounting.

pub mod clones;
pub mod error;
pub mod extensions;
pub mod formula;
pub mod harness;
pub mod instance;
pub mod language;
pub mod par;
pub mod reductions;
pub mod relation;
pub mod search;
pub mod solvers;
pub mod text;

pub use error::{CspError, Result};
pub use formula::{Atom, AtomRel, FormulaClass, PPFormula};
pub use instance::{Assignment, Constraint, Instance};
pub use language::ConstraintLanguage;
pub use relation::Relation;

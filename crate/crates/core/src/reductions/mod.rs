//! Instance transformations between CSPs. Every step returns the output
//! instance together with a [`ReductionReport`].
//!
//! Steps that detect unsatisfiability emit the canonical unsatisfiable
//! instance: one constraint over the empty relation of the target arity.

mod choice;
mod easiest;
mod inline;
mod interp;
mod lift;
mod quantifiers;
mod report;
mod unary;
mod work;

pub use choice::{add_2choice_args, dedup_3choice, drop_3choice_args};
pub use easiest::{discover_rb_extension, reduce_easiest, Discovery};
pub use inline::qfpp_inline;
pub use interp::{samples, build_rb_from_interpretation, lv_reduce_3sat, refine_two_tuple, Interpretation};
pub use lift::{lift_rd, permute_onto};
pub use quantifiers::{eliminate_quantifiers_pair, qfpp_extension};
pub use report::{LvParams, Reduction, ReductionReport};
pub use unary::eliminate_unary;

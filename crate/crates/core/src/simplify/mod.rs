//! Equality saturation over matrix expressions. Removes the inverse of the
//! system matrix from `V·G·A⁻¹ − V·A⁻¹` and compiles the result into
//! programs for `V·M`, `V·G` and `V S(M) Vᵀ`.

mod cost;
mod engine;
mod expr;
mod lang;
mod program;
mod rules;
mod step;
mod translate;
mod verify;

pub use cost::{Cost, MatCost, DENSE_INVERSE_WEIGHT};
pub use engine::{
    check_no_inverse_of, expr_cost, extract, saturate, Extraction, Limits, Saturated,
    SaturationReport, SaturationStatus,
};
pub use expr::{LeafEntry, LeafTable, MatExpr, INPUT_LEAF};
pub use lang::{
    check_dimensions, ClassData, EyeDim, LeafInfo, MatAnalysis, MatEGraph, MatLang, ZeroDim,
};
pub use program::CompiledProgram;
pub use rules::{rewrites_for, ruleset, Guard, Rhs, RuleSpec, RULES};
pub use step::{
    check_fixed_point, derive_step_programs, SegmentReport, StepOptions, StepPrograms,
    FIXED_POINT_CHECK_MAX_DIM,
};
pub use translate::{build_cancellation_expr, graph_to_expr};
pub use verify::{verify_ruleset, RulesetCheck};

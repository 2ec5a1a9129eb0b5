//! Phase-1 information constraints and their assembly into per-subject
//! constraint vectors for each estimator variant.

mod assemble;
mod functions;

pub use assemble::{
    assemble_constraints, rank_check, BlockLabel, ConstraintConfig, ConstraintEngine, ConstraintSet, EtaLayout,
    ParamMode, RankReport, RowsEval, SubjectScope, Variant, RANK_RTOL,
};
pub use functions::{h_star, u_constraint, v_constraint};

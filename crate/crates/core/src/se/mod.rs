//! State evolution: scalar predictions of the turbo iterations, their fixed
//! points across rounds, and the learning-loss bound built on them.

mod bound;
mod exact;
mod recursion;

pub use bound::{
    kappa, loss_bound, verify_bound_empirically, BoundCheck, BoundProblem, BoundReport, ConvexityConstants,
};
pub use exact::{single_round_mmse, two_round_mmse};
pub use recursion::{
    check_theorem1, check_theorem2, g_curve, mmse_mc, se_f, se_population, se_recursion, write_se_csv,
    McEstimate, MmseOracle, PopulationEntry, SeConfig, SePrior, SeRow, SeTrace, TheoremReport,
};

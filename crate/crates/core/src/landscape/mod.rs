//! Landscape tooling: non-increasing paths, condition checks, rank
//! certificates and polynomial feature maps.

pub mod conditions;
pub mod features;
pub mod paths;

pub use conditions::{
    activation_admissible, check_assumptions, check_conditions, full_rank_trial,
    hidden_rank_certificate, Admissibility, AssumptionReport, ConditionReport, FullRankTrial,
};
pub use features::{feature_dim, intrinsic_dim_bound, monomial_exponents, PolyFeatureMap};
pub use paths::{
    block_least_squares_optimum, property_p_path_cond1, property_p_path_cond3, separated_loss,
    zero_path_transform, PathSample, PathSegment, PathTrace, SeparatedLoss, ZeroPathTransform,
    PATH_SAMPLES,
};

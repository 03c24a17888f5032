//! Hypothesis tests and variance analysis for comparing architectures and
//! allocation schemes.

pub mod anova;
pub mod special;
pub mod tukey;
pub mod welch;

pub use anova::{
    one_way_anova, two_way_anova, two_way_anova_balanced, two_way_anova_type2, AnovaRow,
    AnovaTable, Group,
};
pub use special::{
    f_cdf, f_sf, normal_cdf, regularized_incomplete_beta, student_t_cdf, student_t_sf,
};
pub use tukey::{
    rank_table, studentized_range_inverse, studentized_range_sf, tukey_hsd, PairwiseComparison,
    RankTable, TukeyGrouping,
};
pub use welch::{pooled_t, two_sided_p, welch_one_sided, SampleSummary, TTestResult};

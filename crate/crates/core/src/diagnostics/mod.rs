//! Balance, effect estimation, permutation significance and mediation.

mod balance;
mod effect;
mod mediation;
mod permutation;

pub(crate) use balance::balance_rows;
pub use balance::{balance_report, standardized_mean_difference, BalanceReport, BalanceRow};
pub use effect::{absolute_mean_difference, eate, median, median_ratio_effect, EffectStatistic, MedianRatioEffect};
pub use mediation::{mediation_on_matches, sobel_test, sobel_z, two_sided_p, MediationReport};
pub use permutation::{permutation_test, PermutationMode, PermutationResult};

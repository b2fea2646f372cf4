//! Monte Carlo checks of the deviation principles and the exact oracles behind them.
//!
//! Paths are processed in fixed blocks whose partial sums are combined in
//! block order, so every estimate is bit-identical for any worker count.

pub mod covcheck;
pub mod special;
pub mod tail;

pub use covcheck::{covariance_check, CovarianceCheck};
pub use special::{chi_square_oracle, log_chi_square_oracle, Direction};
pub use tail::{
    empirical_rate_curve, estimate_tail_naive, estimate_tail_tilted, half_space_dominating_point,
    predicted_rate, DominatingPoint, Event, RatePoint, Scale, Statistic, TailEstimate, TailQuery,
};

pub(crate) const BLOCK: usize = 1024;

/// [start, end) index ranges of at most `BLOCK` paths.
pub(crate) fn block_ranges(paths: usize) -> Vec<(usize, usize)> {
    (0..paths.div_ceil(BLOCK))
        .map(|b| (b * BLOCK, ((b + 1) * BLOCK).min(paths)))
        .collect()
}

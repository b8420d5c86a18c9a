//! Energy bookkeeping, one-sided bounds, weighted norms and empirical
//! Young-measure moments.

mod ledger;
mod moments;
mod stats;

pub use ledger::{update_ledger, EnergyLedger, LedgerRow};
pub use moments::{
    pointwise_defect, q_kappa, q_kappa_prime, window_moments, DefectProfile, KappaDefect, Snapshot, WindowMoments,
    WindowSpec,
};
pub use stats::{lp_weighted, lp_weighted_with, oleinik_stats, oleinik_fit, OleinikFit};

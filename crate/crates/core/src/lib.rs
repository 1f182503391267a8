//! Percentile-based double-rank research indicators.
//!
//! World and entity publications are ranked by citations; an entity's
//! fractional count `N(x)` inside each world top-`x` percentile is fitted to
//! `N(x) = N (x/100)^alpha`. From the exponent follow the e_p index
//! (`10^-alpha`), the probability of a paper reaching the top `x0` percentile
//! (`(x0/100)^alpha`) and the expected number of such papers (`N P(x0)`).
//!
//! Modules:
//! - [`corpus`]: records, ingestion, entity definitions and counting scopes.
//! - [`double_rank`]: world ranking, percentile thresholds, proportional tie counts.
//! - [`fitting`]: log-log least squares and the direct `N(1)/N(10)` ratio.
//! - [`indicators`]: probabilities, tables, time series, plot data, exports.
//! - [`synth`]: synthetic worlds with planted exponents and brute-force oracles.
//! - [`cli`]: the `eprank` command-line surface.

pub mod cli;
pub mod corpus;
pub mod double_rank;
pub mod error;
pub mod fitting;
pub mod indicators;
pub mod synth;

pub use corpus::{Corpus, EntityDefinition, PublicationRecord, Scope, ScopeFilter};
pub use double_rank::{CountSeries, PercentileThreshold, RankRounding, RankedCorpus};
pub use error::{Error, Result};
pub use fitting::{InterceptMode, PowerLawFit};
pub use indicators::{AnalysisConfig, Cohort, IndicatorRow};

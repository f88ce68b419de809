//! Bayesian inference for the Mallows rank model.
//!
//! The crate covers the whole pipeline for rank data under right-invariant
//! distances (footrule, Spearman, Kendall):
//!
//! * [`rank`]: permutations, distances and pairwise preference constraints.
//! * [`partition`]: the normalizing constant `Z_n(alpha)`, computed in closed
//!   form (Kendall), by exhaustive enumeration, or by importance sampling, and
//!   persisted as polynomial-fitted tables.
//! * [`sampler`]: Metropolis-Hastings with the leap-and-shift proposal for the
//!   consensus ranking and a Gaussian walk for the scale parameter.
//! * [`augment`]: data augmentation for partial rankings, pairwise
//!   preferences and ties.
//! * [`mixture`]: finite mixtures of Mallows models and supervised
//!   classification.
//! * [`dynamics`]: rankings that evolve over discrete time.
//! * [`summary`]: posterior summaries (heat matrices, CP ordering, HPDI,
//!   top-t probabilities, dominance, predictive preferences).
//! * [`io`] and [`cli`]: file formats and the `mallows` command line tool.
//!
//! ```
//! use mallows::rank::{Metric, Ranking};
//!
//! let a = Ranking::new(vec![1, 2, 3]).unwrap();
//! let b = Ranking::new(vec![3, 2, 1]).unwrap();
//! assert_eq!(Metric::Footrule.distance(&a, &b).unwrap(), 4);
//! assert_eq!(Metric::Spearman.distance(&a, &b).unwrap(), 8);
//! assert_eq!(Metric::Kendall.distance(&a, &b).unwrap(), 3);
//! ```
#![warn(missing_debug_implementations, rust_2018_idioms)]
// index loops read more clearly than zipped iterators in the matrix code
#![allow(clippy::needless_range_loop)]

pub mod augment;
pub mod cli;
pub mod datasets;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod mixture;
pub(crate) mod numeric;
pub mod partition;
pub mod rank;
pub mod rng;
pub mod sampler;
pub mod summary;

pub use error::Error;
pub use partition::{LogPartition, LogPartitionTable};
pub use rank::{ItemCatalog, Metric, Ranking};

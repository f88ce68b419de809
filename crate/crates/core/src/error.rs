//! Crate-level error type and process exit codes.

use thiserror::Error;

use crate::augment::AugmentError;
use crate::io::IoError;
use crate::partition::PartitionError;
use crate::rank::RankError;
use crate::sampler::SamplerError;
use crate::summary::SummaryError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Config(String),
}

impl Error {
    /// `2` for invalid input or configuration, `3` for numerical failures
    /// and out-of-range evaluations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Partition(e) | Self::Sampler(SamplerError::Partition(e)) => partition_code(e),
            Self::Sampler(SamplerError::InitialAlpha(_, e)) => partition_code(e),
            _ => 2,
        }
    }
}

fn partition_code(e: &PartitionError) -> i32 {
    use PartitionError::*;
    match e {
        OutOfRange { .. } | NonFinite(_) | Fit(_) | NotDecreasing(..) | BadOrigin { .. } | InvalidAlpha(_) => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::Metric;

    #[test]
    fn exit_codes() {
        assert_eq!(Error::from(RankError::EmptyCatalog).exit_code(), 2);
        assert_eq!(Error::from(PartitionError::OutOfRange { alpha: 30.0, min: 0.0, max: 20.0 }).exit_code(), 3);
        assert_eq!(
            Error::from(PartitionError::MetricMismatch { expected: Metric::Kendall, found: Metric::Footrule })
                .exit_code(),
            2
        );
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
    }
}

//! Difficulty classification along incidence rate, reasoning-chain length and
//! relevance to classic diseases.

use serde::{Deserialize, Serialize};

use crate::case::{CaseRecord, ClassicRelevance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DifficultyLevel {
    Low,
    Medium,
    High,
}

impl DifficultyLevel {
    pub const ALL: [DifficultyLevel; 3] = [Self::Low, Self::Medium, Self::High];

    /// 1 for Low, 2 for Medium, 3 for High.
    pub fn rank(self) -> u8 {
        match self {
            Self::Low => 1,
            Self::Medium => 2,
            Self::High => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimensionValue {
    /// Cases per 100,000 per year.
    Incidence(f64),
    /// Reasoning steps.
    Chain(u32),
    Relevance(ClassicRelevance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DifficultyProfile {
    pub incidence: DifficultyLevel,
    pub chain: DifficultyLevel,
    pub relevance: DifficultyLevel,
    /// Sum of the three ranks, always in 3..=9.
    pub aggregate: u8,
}

impl DifficultyProfile {
    pub fn from_levels(incidence: DifficultyLevel, chain: DifficultyLevel, relevance: DifficultyLevel) -> Self {
        Self { incidence, chain, relevance, aggregate: incidence.rank() + chain.rank() + relevance.rank() }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("incidence rate must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("chain length must be at least 1")]
    ZeroChain,
}

/// Maps one dimension value to its level. Rates of exactly 10 and 100 per
/// 100,000 fall in the Medium band.
pub fn classify_dimension(value: DimensionValue) -> Result<DifficultyLevel, DomainError> {
    use DifficultyLevel::*;
    Ok(match value {
        DimensionValue::Incidence(rate) => {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(DomainError::NonPositiveRate(rate));
            }
            if rate > 100.0 {
                Low
            } else if rate >= 10.0 {
                Medium
            } else {
                High
            }
        }
        DimensionValue::Chain(0) => return Err(DomainError::ZeroChain),
        DimensionValue::Chain(1..=3) => Low,
        DimensionValue::Chain(4..=7) => Medium,
        DimensionValue::Chain(_) => High,
        DimensionValue::Relevance(ClassicRelevance::DirectlyRelated) => Low,
        DimensionValue::Relevance(ClassicRelevance::SomewhatRelated) => Medium,
        DimensionValue::Relevance(ClassicRelevance::NotRelated) => High,
    })
}

pub fn profile_case(record: &CaseRecord) -> Result<DifficultyProfile, DomainError> {
    let attrs = &record.difficulty;
    Ok(DifficultyProfile::from_levels(
        classify_dimension(DimensionValue::Incidence(attrs.incidence_per_100k))?,
        classify_dimension(DimensionValue::Chain(attrs.chain_length))?,
        classify_dimension(DimensionValue::Relevance(attrs.classic_relevance))?,
    ))
}

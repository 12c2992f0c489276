//! Finite action, observation and reward alphabets.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlphabetError {
    #[error("an environment needs at least two actions, got {0}")]
    TooFewActions(usize),
    #[error("an environment needs at least one observation")]
    NoObservations,
    #[error("reward levels must be nonempty and strictly increasing")]
    BadRewardLevels,
    #[error("reward bounds [{min}, {max}] must satisfy min < max and cover every reward level")]
    BadBounds { min: f64, max: f64 },
    #[error("raw reward {raw} lies outside the declared bounds [{min}, {max}]")]
    RewardOutOfBounds { raw: f64, min: f64, max: f64 },
}

/// The symbol sets an environment talks in.
///
/// Rewards are kept as raw values (whatever the environment pays out) plus
/// the bounds used to map them linearly onto `[0, 1]`. The bit stream only
/// ever carries the *index* of a reward level.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabets {
    action_count: usize,
    observation_count: usize,
    reward_levels: Vec<f64>,
    reward_min: f64,
    reward_max: f64,
    normalized: Vec<f64>,
}

impl Alphabets {
    /// Alphabets whose reward bounds are the extreme reward levels.
    pub fn new(
        action_count: usize,
        observation_count: usize,
        reward_levels: Vec<f64>,
    ) -> Result<Self, AlphabetError> {
        let min = reward_levels.first().copied().unwrap_or(0.0);
        let max = reward_levels.last().copied().unwrap_or(0.0);
        Self::with_bounds(action_count, observation_count, reward_levels, min, max)
    }

    pub fn with_bounds(
        action_count: usize,
        observation_count: usize,
        reward_levels: Vec<f64>,
        reward_min: f64,
        reward_max: f64,
    ) -> Result<Self, AlphabetError> {
        if action_count < 2 {
            return Err(AlphabetError::TooFewActions(action_count));
        }
        if observation_count < 1 {
            return Err(AlphabetError::NoObservations);
        }
        if reward_levels.is_empty()
            || reward_levels.iter().any(|r| !r.is_finite())
            || reward_levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(AlphabetError::BadRewardLevels);
        }
        let lo = reward_levels[0];
        let hi = reward_levels[reward_levels.len() - 1];
        if reward_min.partial_cmp(&reward_max) != Some(std::cmp::Ordering::Less) || reward_min > lo || reward_max < hi {
            return Err(AlphabetError::BadBounds {
                min: reward_min,
                max: reward_max,
            });
        }
        let normalized = reward_levels
            .iter()
            .map(|&r| (r - reward_min) / (reward_max - reward_min))
            .collect();
        Ok(Self {
            action_count,
            observation_count,
            reward_levels,
            reward_min,
            reward_max,
            normalized,
        })
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn observation_count(&self) -> usize {
        self.observation_count
    }

    pub fn reward_levels(&self) -> &[f64] {
        &self.reward_levels
    }

    pub fn reward_count(&self) -> usize {
        self.reward_levels.len()
    }

    pub fn reward_bounds(&self) -> (f64, f64) {
        (self.reward_min, self.reward_max)
    }

    /// Map a raw reward onto `[0, 1]`.
    pub fn normalize_reward(&self, raw: f64) -> Result<f64, AlphabetError> {
        if !(self.reward_min <= raw && raw <= self.reward_max) {
            return Err(AlphabetError::RewardOutOfBounds {
                raw,
                min: self.reward_min,
                max: self.reward_max,
            });
        }
        Ok((raw - self.reward_min) / (self.reward_max - self.reward_min))
    }

    /// Normalized value of reward level `index`.
    ///
    /// Panics if `index` is not a reward level.
    pub fn normalized_level(&self, index: usize) -> f64 {
        self.normalized[index]
    }

    pub fn normalized_levels(&self) -> &[f64] {
        &self.normalized
    }

    /// Raw value of reward level `index`.
    pub fn raw_level(&self, index: usize) -> f64 {
        self.reward_levels[index]
    }

    pub fn reward_index(&self, raw: f64) -> Option<usize> {
        self.reward_levels.iter().position(|&r| r == raw)
    }
}

/// Free-function form of [`Alphabets::normalize_reward`].
pub fn normalize_reward(raw: f64, alphabets: &Alphabets) -> Result<f64, AlphabetError> {
    alphabets.normalize_reward(raw)
}

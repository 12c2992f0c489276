//! A desk-scale laboratory for model-free universal reinforcement learning.
//!
//! The central agent, AIQI-CTW ([`agent::AiqiAgent`]), never models its
//! environment. It predicts the distribution of its own discretized
//! `H`-step return with a bank of context-tree-weighting predictors fed
//! periodically augmented histories ([`qinduction`]), and acts greedily on
//! the expected return with ε-greedy exploration.
//!
//! Alongside it live an MC-AIXI-CTW baseline ([`baseline`]), the benchmark
//! environments ([`envs`]) and brute-force reference computations on small
//! instances ([`oracle`]).

pub mod agent;
pub mod alphabet;
pub mod baseline;
pub mod codec;
pub mod ctw;
pub mod envs;
pub mod history;
pub mod oracle;
pub mod par;
pub mod policies;
pub mod qinduction;
pub mod rng;
pub mod wire;

pub use alphabet::{normalize_reward, AlphabetError, Alphabets};
pub use codec::{decode_symbol, encode_symbol, BitCodec, BitString, CodecError, SymbolKind};
pub use ctw::{Checkpoint, ContextTree, CtwError};
pub use history::{EnvStep, History, HistoryError, Step};
pub use num_rational::Rational64;
pub use rng::Rng;

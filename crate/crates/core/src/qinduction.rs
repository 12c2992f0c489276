//! From raw histories to predicted action-values.
//!
//! The return at time `i` is `R_{i,H} = (1-γ) Σ_{k<H} γ^k r_{i+k}`,
//! discretized onto `M` levels. It is not known until `H - 1` steps later,
//! so it cannot simply be interleaved after every action. Instead each of
//! `N ≥ H` *phases* keeps its own stream in which only the positions
//! `i ≡ n (mod N)` carry a return block, placed between `a_i` and `e_i`:
//!
//! ```text
//! … a_{i-1} e_{i-1} a_i z_i e_i a_{i+1} e_{i+1} … a_{i+N} z_{i+N} e_{i+N} …
//! ```
//!
//! Time `t` is served by phase `t mod N`, whose stream up to `a_t` is fully
//! determined by `h_{<t}`. Each phase is a [`ContextTree`] that learns only
//! the return bits; everything else is context.

use thiserror::Error;

use crate::alphabet::Alphabets;
use crate::codec::{bit_width, bits_msb_first, BitCodec, SymbolKind};
use crate::ctw::{ContextTree, CtwError};
use crate::history::Step;
use crate::wire::{ByteReader, ByteWriter, WireError};

/// Grid points closer than this (relative to one level) snap upwards, so
/// that float round-off in a return sum never drops a whole level.
const SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("discount factor must lie in (0, 1), got {0}")]
    Gamma(f64),
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("eta must be positive, got {0}")]
    Eta(f64),
    #[error("discretization needs at least one level")]
    Levels,
    #[error("augmentation period {period} is shorter than the horizon {horizon}")]
    Period { period: usize, horizon: usize },
    #[error("phase {phase} cannot be augmented at time {t}: a periodic return still lacks rewards")]
    InvalidPhase { t: usize, phase: usize },
    #[error("time {t} needs a history of length {expected}, got {got}")]
    HistoryLength { t: usize, expected: usize, got: usize },
    #[error("phase {phase} already ingested {cursor} steps but only {available} are available")]
    Rewind {
        phase: usize,
        cursor: usize,
        available: usize,
    },
    #[error("action {action} out of range ({count} actions)")]
    Action { action: usize, count: usize },
    #[error(transparent)]
    Ctw(#[from] CtwError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Smallest `H ≥ 1` with `γ^H ≤ η`, i.e. with discounted tail mass
/// `(1-γ) Σ_{k≥H} γ^k` at most `η`.
///
/// Powers are built by repeated multiplication so that exact boundary cases
/// such as `γ = η = 0.5` land on the right side.
pub fn effective_horizon(eta: f64, gamma: f64) -> usize {
    assert!(eta > 0.0, "eta must be positive");
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    let mut horizon = 1;
    let mut tail = gamma;
    while tail > eta {
        tail *= gamma;
        horizon += 1;
    }
    horizon
}

/// `(1-γ) Σ_k γ^k r_k` over the given normalized rewards.
pub fn h_step_return(rewards: &[f64], gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut sum = 0.0;
    for &r in rewards {
        sum += weight * r;
        weight *= gamma;
    }
    (1.0 - gamma) * sum
}

/// Index of the `levels`-discretization of `r ∈ [0, 1]`:
/// `min(⌊levels · r⌋, levels - 1)`.
pub fn discretize(r: f64, levels: usize) -> usize {
    debug_assert!(levels >= 1);
    let x = levels as f64 * r;
    let mut k = x.floor();
    if x - k > 1.0 - SNAP {
        k += 1.0;
    }
    (k.max(0.0) as usize).min(levels - 1)
}

/// `Σ_z z · ψ(z)` over the grid `{0, 1/M, …, (M-1)/M}`.
pub fn expected_return(distribution: &[f64]) -> f64 {
    let m = distribution.len() as f64;
    distribution
        .iter()
        .enumerate()
        .map(|(i, p)| i as f64 / m * p)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountConfig {
    gamma: f64,
    horizon: usize,
    eta: Option<f64>,
}

impl DiscountConfig {
    pub fn new(gamma: f64, horizon: usize) -> Result<Self, QError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(QError::Gamma(gamma));
        }
        if horizon == 0 {
            return Err(QError::Horizon);
        }
        Ok(Self {
            gamma,
            horizon,
            eta: None,
        })
    }

    /// Horizon derived as the `eta`-effective horizon.
    pub fn from_eta(gamma: f64, eta: f64) -> Result<Self, QError> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(QError::Gamma(gamma));
        }
        if eta.is_nan() || eta <= 0.0 {
            return Err(QError::Eta(eta));
        }
        Ok(Self {
            gamma,
            horizon: effective_horizon(eta, gamma),
            eta: Some(eta),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    /// `γ^H`, the most the `H`-step return can miss of the full return.
    pub fn truncation_bound(&self) -> f64 {
        self.gamma.powi(self.horizon as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discretizer {
    levels: usize,
    width: u32,
}

impl Discretizer {
    pub fn new(levels: usize) -> Result<Self, QError> {
        if levels == 0 {
            return Err(QError::Levels);
        }
        Ok(Self {
            levels,
            width: bit_width(levels),
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn code_width(&self) -> u32 {
        self.width
    }

    pub fn index(&self, r: f64) -> usize {
        discretize(r, self.levels)
    }

    pub fn value(&self, index: usize) -> f64 {
        index as f64 / self.levels as f64
    }

    pub fn codes(&self) -> Vec<u64> {
        (0..self.levels as u64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentationScheme {
    period: usize,
    horizon: usize,
}

impl AugmentationScheme {
    pub fn new(period: usize, horizon: usize) -> Result<Self, QError> {
        if horizon == 0 {
            return Err(QError::Horizon);
        }
        if period < horizon {
            return Err(QError::Period { period, horizon });
        }
        Ok(Self { period, horizon })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Does position `i` (1-based) carry a return in phase `n`?
    pub fn is_periodic(&self, i: usize, n: usize) -> bool {
        i >= 1 && i % self.period == n
    }
}

/// Whether every return phase `n` must insert before time `t` is already
/// computable from `h_{<t}`: `(t-1-n) mod N ≥ H-1`, or no periodic position
/// precedes `t` at all.
pub fn phase_valid(t: usize, n: usize, scheme: &AugmentationScheme) -> bool {
    debug_assert!(t >= 1 && n < scheme.period);
    let offset = (t as i64 - 1 - n as i64).rem_euclid(scheme.period as i64);
    let latest = t as i64 - 1 - offset;
    latest < 1 || offset as usize >= scheme.horizon - 1
}

/// Everything a phase stream needs to turn steps into bits.
#[derive(Debug, Clone)]
struct StreamSpec {
    codec: BitCodec,
    discretizer: Discretizer,
    scheme: AugmentationScheme,
    gamma: f64,
    rewards: Vec<f64>,
}

impl StreamSpec {
    fn return_index(&self, steps: &[Step], position: usize) -> usize {
        let h = self.scheme.horizon;
        let mut weight = 1.0;
        let mut sum = 0.0;
        for s in &steps[position - 1..position - 1 + h] {
            sum += weight * self.rewards[s.reward];
            weight *= self.gamma;
        }
        self.discretizer.index((1.0 - self.gamma) * sum)
    }
}

/// A return inserted into a phase stream, for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Insertion {
    /// Raw position `i` whose return was inserted.
    pub position: usize,
    /// History length at the moment of insertion.
    pub available: usize,
    /// Discretized return index.
    pub index: usize,
}

/// One phase's augmented stream and its CTW predictor.
///
/// `cursor` counts raw positions fully ingested. When the next periodic
/// position's return is not yet computable the stream stops right after
/// that position's action and records it as `pending`.
#[derive(Debug, Clone)]
pub struct PhaseStream {
    phase: usize,
    cursor: usize,
    pending: Option<usize>,
    tree: ContextTree,
    inserted: u64,
    learning: bool,
    trace: Option<Vec<Insertion>>,
}

impl PhaseStream {
    pub fn new(phase: usize, depth: usize) -> Result<Self, QError> {
        Ok(Self {
            phase,
            cursor: 0,
            pending: None,
            tree: ContextTree::new(depth)?,
            inserted: 0,
            learning: true,
            trace: None,
        })
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn pending(&self) -> Option<usize> {
        self.pending
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn returns_inserted(&self) -> u64 {
        self.inserted
    }

    /// Start recording every return insertion.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[Insertion] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn push_symbol(&mut self, value: usize, width: u32, learn: bool) {
        for b in bits_msb_first(value as u64, width) {
            self.tree.update(b, learn);
        }
    }

    fn push_percept(&mut self, spec: &StreamSpec, step: &Step) {
        self.push_symbol(step.observation, spec.codec.width(SymbolKind::Observation), false);
        self.push_symbol(step.reward, spec.codec.width(SymbolKind::Reward), false);
    }

    fn push_return(&mut self, spec: &StreamSpec, steps: &[Step], position: usize) {
        let index = spec.return_index(steps, position);
        self.push_symbol(index, spec.discretizer.code_width(), self.learning);
        self.inserted += 1;
        if let Some(trace) = &mut self.trace {
            trace.push(Insertion {
                position,
                available: steps.len(),
                index,
            });
        }
    }

    /// Ingest as much of `steps` as can be placed in augmented order.
    fn ingest(&mut self, spec: &StreamSpec, steps: &[Step]) {
        let horizon = spec.scheme.horizon;
        loop {
            if let Some(i) = self.pending {
                if i + horizon - 1 > steps.len() {
                    return;
                }
                self.push_return(spec, steps, i);
                self.pending = None;
                self.push_percept(spec, &steps[i - 1]);
                self.cursor = i;
            }
            let i = self.cursor + 1;
            if i > steps.len() {
                return;
            }
            let step = steps[i - 1];
            self.push_symbol(step.action, spec.codec.width(SymbolKind::Action), false);
            if spec.scheme.is_periodic(i, self.phase) {
                self.pending = Some(i);
                continue;
            }
            self.push_percept(spec, &step);
            self.cursor = i;
        }
    }

    /// Bring the stream up to `aug_n(h_{<now})`. Fails if phase `n` is not
    /// valid at `now`, i.e. some return it needs is still missing rewards.
    fn advance(&mut self, spec: &StreamSpec, steps: &[Step], now: usize) -> Result<(), QError> {
        if now == 0 || steps.len() + 1 < now {
            return Err(QError::HistoryLength {
                t: now,
                expected: now.saturating_sub(1),
                got: steps.len(),
            });
        }
        if !phase_valid(now, self.phase, &spec.scheme) {
            return Err(QError::InvalidPhase {
                t: now,
                phase: self.phase,
            });
        }
        let visible = &steps[..now - 1];
        let consumed = self.cursor + self.pending.is_some() as usize;
        if consumed > visible.len() {
            return Err(QError::Rewind {
                phase: self.phase,
                cursor: consumed,
                available: visible.len(),
            });
        }
        self.ingest(spec, visible);
        debug_assert!(self.pending.is_none() && self.cursor == visible.len());
        Ok(())
    }

    fn conditional_distribution(&mut self, spec: &StreamSpec, action: usize) -> Vec<f64> {
        let token = self.tree.checkpoint();
        self.push_symbol(action, spec.codec.width(SymbolKind::Action), false);
        let dist = self
            .tree
            .block_distribution(&spec.discretizer.codes(), spec.discretizer.code_width());
        self.tree.revert(token).expect("own checkpoint");
        dist
    }

    fn write(&self, w: &mut ByteWriter) {
        w.put_u64(self.phase as u64);
        w.put_u64(self.cursor as u64);
        w.put_u64(self.pending.map_or(0, |p| p as u64 + 1));
        w.put_u64(self.inserted);
        w.put_u8(self.learning as u8);
        self.tree.write(w);
    }

    fn read(r: &mut ByteReader<'_>) -> Result<Self, QError> {
        let phase = r.get_u64()? as usize;
        let cursor = r.get_u64()? as usize;
        let pending = match r.get_u64()? {
            0 => None,
            p => Some(p as usize - 1),
        };
        let inserted = r.get_u64()?;
        let learning = r.get_u8()? != 0;
        let tree = ContextTree::read(r)?;
        Ok(Self {
            phase,
            cursor,
            pending,
            tree,
            inserted,
            learning,
            trace: None,
        })
    }
}

/// `ψ(z | h_{<t} a) := ψ_{t mod N}(z | aug_{t mod N}(h_{<t}) a)`.
#[derive(Debug, Clone)]
pub struct UnifiedPredictor {
    spec: StreamSpec,
    discount: DiscountConfig,
    phases: Vec<PhaseStream>,
}

impl UnifiedPredictor {
    pub fn new(
        alphabets: &Alphabets,
        discount: DiscountConfig,
        levels: usize,
        period: usize,
        depth: usize,
    ) -> Result<Self, QError> {
        let discretizer = Discretizer::new(levels)?;
        let scheme = AugmentationScheme::new(period, discount.horizon())?;
        let phases = (0..period)
            .map(|n| PhaseStream::new(n, depth))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            spec: StreamSpec {
                codec: BitCodec::new(alphabets, levels),
                discretizer,
                scheme,
                gamma: discount.gamma(),
                rewards: alphabets.normalized_levels().to_vec(),
            },
            discount,
            phases,
        })
    }

    pub fn discount(&self) -> &DiscountConfig {
        &self.discount
    }

    pub fn discretizer(&self) -> &Discretizer {
        &self.spec.discretizer
    }

    pub fn scheme(&self) -> &AugmentationScheme {
        &self.spec.scheme
    }

    pub fn codec(&self) -> &BitCodec {
        &self.spec.codec
    }

    pub fn action_count(&self) -> usize {
        self.spec.codec.count(SymbolKind::Action)
    }

    pub fn phases(&self) -> &[PhaseStream] {
        &self.phases
    }

    pub fn phase_mut(&mut self, n: usize) -> &mut PhaseStream {
        &mut self.phases[n]
    }

    /// Whether inserted returns update the statistics or are context only.
    pub fn set_learning(&mut self, learning: bool) {
        for p in &mut self.phases {
            p.learning = learning;
        }
    }

    /// Phase serving time `t`.
    pub fn phase_for(&self, t: usize) -> usize {
        t % self.spec.scheme.period
    }

    /// Advance phase `n` to `aug_n(h_{<now})`.
    pub fn advance_phase(&mut self, n: usize, history: &[Step], now: usize) -> Result<(), QError> {
        let Self { spec, phases, .. } = self;
        phases[n].advance(spec, history, now)
    }

    /// Feed whatever of `history` phase `n` can place, leaving a pending
    /// return if its rewards have not all arrived.
    pub fn ingest_phase(&mut self, n: usize, history: &[Step]) {
        let Self { spec, phases, .. } = self;
        phases[n].ingest(spec, history);
    }

    /// Ingest `history` into every phase as far as its returns are known.
    /// What gets ingested does not depend on when, so while learning is on
    /// this only moves work earlier.
    pub fn ingest_all(&mut self, history: &[Step]) {
        let Self { spec, phases, .. } = self;
        for phase in phases.iter_mut() {
            phase.ingest(spec, history);
        }
    }

    fn check_time(&self, history: &[Step], t: usize) -> Result<(), QError> {
        if t == 0 || history.len() != t - 1 {
            return Err(QError::HistoryLength {
                t,
                expected: t.saturating_sub(1),
                got: history.len(),
            });
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<(), QError> {
        let count = self.action_count();
        if action >= count {
            return Err(QError::Action { action, count });
        }
        Ok(())
    }

    /// `ψ(· | h_{<t} a)` over the `M` return levels.
    pub fn predict_return_distribution(
        &mut self,
        history: &[Step],
        t: usize,
        action: usize,
    ) -> Result<Vec<f64>, QError> {
        self.check_time(history, t)?;
        self.check_action(action)?;
        let n = self.phase_for(t);
        self.advance_phase(n, history, t)?;
        let Self { spec, phases, .. } = self;
        Ok(phases[n].conditional_distribution(spec, action))
    }

    /// `Q̂(h_{<t}, a) = Σ_z z ψ(z | h_{<t} a)`.
    pub fn q_hat(&mut self, history: &[Step], t: usize, action: usize) -> Result<f64, QError> {
        Ok(expected_return(
            &self.predict_return_distribution(history, t, action)?,
        ))
    }

    /// Return distributions for every action at `t = |history| + 1`.
    pub fn return_distributions(&mut self, history: &[Step]) -> Result<Vec<Vec<f64>>, QError> {
        let t = history.len() + 1;
        let n = self.phase_for(t);
        self.advance_phase(n, history, t)?;
        let Self { spec, phases, .. } = self;
        let phase = &mut phases[n];
        Ok((0..spec.codec.count(SymbolKind::Action))
            .map(|a| phase.conditional_distribution(spec, a))
            .collect())
    }

    /// `Q̂` for every action at `t = |history| + 1`.
    pub fn q_values(&mut self, history: &[Step]) -> Result<Vec<f64>, QError> {
        Ok(self
            .return_distributions(history)?
            .iter()
            .map(|d| expected_return(d))
            .collect())
    }

    /// Like [`return_distributions`](Self::return_distributions) but leaves
    /// every phase exactly as it was, so `history` may be a hypothetical
    /// continuation of what has been observed.
    pub fn probe_return_distributions(&mut self, history: &[Step]) -> Result<Vec<Vec<f64>>, QError> {
        let n = self.phase_for(history.len() + 1);
        let phase = &mut self.phases[n];
        let (cursor, pending, inserted) = (phase.cursor, phase.pending, phase.inserted);
        let token = phase.tree.checkpoint();
        let result = self.return_distributions(history);
        let phase = &mut self.phases[n];
        phase.tree.revert(token)?;
        phase.cursor = cursor;
        phase.pending = pending;
        phase.inserted = inserted;
        result
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.put_u64(self.phases.len() as u64);
        for p in &self.phases {
            p.write(w);
        }
    }

    /// Restore phase streams written by [`write`](Self::write) into a
    /// predictor built with the same configuration.
    pub fn read_phases(&mut self, r: &mut ByteReader<'_>) -> Result<(), QError> {
        let count = r.get_u64()? as usize;
        if count != self.phases.len() {
            return Err(WireError::Corrupt(format!(
                "snapshot has {count} phases, predictor has {}",
                self.phases.len()
            ))
            .into());
        }
        for n in 0..count {
            let p = PhaseStream::read(r)?;
            if p.phase != n {
                return Err(WireError::Corrupt("phase order".into()).into());
            }
            self.phases[n] = p;
        }
        Ok(())
    }
}

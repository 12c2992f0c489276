//! Kuhn poker against a fixed Nash-equilibrium opponent.
//!
//! Three cards J < Q < K, each player antes one chip. The opponent acts
//! first; the agent sees its own card and the opponent's action, then
//! passes or bets. A step resolves the current hand and deals the next, so
//! the percept returned by a step is the reward of the hand just played
//! together with the observation for the next one. The agent's very first
//! action is taken before it has seen any hand.
//!
//! Observation `card · 2 + opponent action` (pass 0, bet 1), six values.
//! Actions pass 0, bet 1. Raw reward is the chip delta plus 2, in `0..=4`.
//!
//! The opponent plays the first-player equilibrium family with bluffing
//! parameter `α`: bet J with probability `α`, never bet Q, bet K with
//! probability `3α`; facing a bet after passing, fold J, call Q with
//! probability `α + 1/3`, call K.

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use super::Environment;
use crate::alphabet::Alphabets;
use crate::history::EnvStep;
use crate::rng::Rng;
use crate::wire::{ByteReader, ByteWriter, WireError};

pub const PASS: usize = 0;
pub const BET: usize = 1;

/// The opponent's bluffing parameter, anywhere in `[0, 1/3]`.
pub const KUHN_ALPHA: (i64, i64) = (1, 6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Card {
    Jack = 0,
    Queen = 1,
    King = 2,
}

impl Card {
    fn from_index(i: usize) -> Self {
        match i {
            0 => Card::Jack,
            1 => Card::Queen,
            _ => Card::King,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Hand {
    agent: Card,
    opponent: Card,
    opening: usize,
}

impl Hand {
    fn observation(&self) -> usize {
        self.agent as usize * 2 + self.opening
    }
}

#[derive(Debug, Clone)]
pub struct KuhnPoker {
    alphabets: Alphabets,
    alpha: Rational64,
    hand: Option<Hand>,
}

impl Default for KuhnPoker {
    fn default() -> Self {
        Self::new()
    }
}

impl KuhnPoker {
    pub fn new() -> Self {
        Self::with_alpha(Rational64::new(KUHN_ALPHA.0, KUHN_ALPHA.1))
    }

    pub fn with_alpha(alpha: Rational64) -> Self {
        assert!(alpha >= Rational64::zero() && alpha <= Rational64::new(1, 3));
        Self {
            alphabets: Alphabets::new(2, 6, vec![0.0, 1.0, 2.0, 3.0, 4.0]).expect("static"),
            alpha,
            hand: None,
        }
    }

    /// Probability that the opponent opens with a bet holding `card`.
    pub fn opening_bet(&self, card: Card) -> Rational64 {
        match card {
            Card::Jack => self.alpha,
            Card::Queen => Rational64::zero(),
            Card::King => self.alpha * 3,
        }
    }

    /// Probability that the opponent calls after passing and facing a bet.
    pub fn call(&self, card: Card) -> Rational64 {
        match card {
            Card::Jack => Rational64::zero(),
            Card::Queen => self.alpha + Rational64::new(1, 3),
            Card::King => Rational64::one(),
        }
    }

    /// Distribution of the agent's chip delta for a hand and action.
    fn payoff(&self, hand: Hand, action: usize) -> Vec<(i64, Rational64)> {
        let win = if hand.agent > hand.opponent { 1 } else { -1 };
        match (hand.opening, action) {
            (BET, PASS) => vec![(-1, Rational64::one())],
            (BET, _) => vec![(2 * win, Rational64::one())],
            (_, PASS) => vec![(win, Rational64::one())],
            _ => {
                let call = self.call(hand.opponent);
                vec![(2 * win, call), (1, Rational64::one() - call)]
            }
        }
    }

    /// All hands with their probabilities.
    fn deals(&self) -> Vec<(Hand, Rational64)> {
        let mut out = Vec::new();
        for a in 0..3 {
            for o in (0..3).filter(|&o| o != a) {
                let (agent, opponent) = (Card::from_index(a), Card::from_index(o));
                let bet = self.opening_bet(opponent);
                for (opening, p) in [(PASS, Rational64::one() - bet), (BET, bet)] {
                    if !p.is_zero() {
                        out.push((
                            Hand {
                                agent,
                                opponent,
                                opening,
                            },
                            p / 6,
                        ));
                    }
                }
            }
        }
        out
    }

    fn deal(&self, rng: &mut Rng) -> Hand {
        let a = rng.below(3);
        let mut o = rng.below(2);
        if o >= a {
            o += 1;
        }
        let opponent = Card::from_index(o);
        let bet = self.opening_bet(opponent).to_f64().unwrap_or(0.0);
        let opening = if rng.uniform() < bet { BET } else { PASS };
        Hand {
            agent: Card::from_index(a),
            opponent,
            opening,
        }
    }

    /// Exact percept distribution, merged by percept.
    pub fn distribution_exact(&self, action: usize) -> Vec<(EnvStep, Rational64)> {
        let current: Vec<(Hand, Rational64)> = match self.hand {
            Some(h) => vec![(h, Rational64::one())],
            None => self.deals(),
        };
        let mut rewards = [Rational64::zero(); 5];
        for (hand, p) in current {
            for (delta, q) in self.payoff(hand, action) {
                rewards[(delta + 2) as usize] += p * q;
            }
        }
        let mut observations = [Rational64::zero(); 6];
        for (hand, p) in self.deals() {
            observations[hand.observation()] += p;
        }
        let mut out = Vec::new();
        for (o, po) in observations.iter().enumerate() {
            for (r, pr) in rewards.iter().enumerate() {
                let p = *po * *pr;
                if !p.is_zero() {
                    out.push((EnvStep::new(o, r), p));
                }
            }
        }
        out
    }
}

impl Environment for KuhnPoker {
    fn name(&self) -> &'static str {
        "kuhn"
    }

    fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    fn distribution(&self, action: usize) -> Vec<(EnvStep, f64)> {
        self.distribution_exact(action)
            .into_iter()
            .map(|(e, p)| (e, p.to_f64().unwrap_or(0.0)))
            .collect()
    }

    fn step(&mut self, action: usize, rng: &mut Rng) -> EnvStep {
        let hand = match self.hand {
            Some(h) => h,
            None => self.deal(rng),
        };
        let outcomes = self.payoff(hand, action);
        let delta = if outcomes.len() == 1 {
            outcomes[0].0
        } else {
            let call = outcomes[0].1.to_f64().unwrap_or(0.0);
            if rng.uniform() < call {
                outcomes[0].0
            } else {
                outcomes[1].0
            }
        };
        let next = self.deal(rng);
        self.hand = Some(next);
        EnvStep::new(next.observation(), (delta + 2) as usize)
    }

    fn reset(&mut self) {
        self.hand = None;
    }

    fn save_state(&self, w: &mut ByteWriter) {
        match self.hand {
            None => w.put_u8(0),
            Some(h) => {
                w.put_u8(1);
                w.put_u8(h.agent as u8);
                w.put_u8(h.opponent as u8);
                w.put_u8(h.opening as u8);
            }
        }
    }

    fn load_state(&mut self, r: &mut ByteReader<'_>) -> Result<(), WireError> {
        self.hand = match r.get_u8()? {
            0 => None,
            1 => {
                let agent = r.get_u8()? as usize;
                let opponent = r.get_u8()? as usize;
                let opening = r.get_u8()? as usize;
                if agent > 2 || opponent > 2 || agent == opponent || opening > 1 {
                    return Err(WireError::Corrupt("kuhn hand".into()));
                }
                Some(Hand {
                    agent: Card::from_index(agent),
                    opponent: Card::from_index(opponent),
                    opening,
                })
            }
            _ => return Err(WireError::Corrupt("kuhn hand tag".into())),
        };
        Ok(())
    }
}

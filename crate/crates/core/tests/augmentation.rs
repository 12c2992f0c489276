//! Periodic augmentation: which phases may be advanced, and that every
//! inserted return was computed from rewards that had already arrived.

use aiqi::qinduction::{h_step_return, discretize, DiscountConfig, QError, UnifiedPredictor};
use aiqi::{Alphabets, EnvStep, Rng, Step};
use proptest::prelude::*;

fn alphabets() -> Alphabets {
    Alphabets::new(2, 2, vec![0.0, 0.5, 1.0]).unwrap()
}

fn random_history(len: usize, seed: u64) -> Vec<Step> {
    let mut rng = Rng::new(seed);
    (0..len)
        .map(|_| Step::new(rng.below(2), EnvStep::new(rng.below(2), rng.below(3))))
        .collect()
}

/// Periodic positions of phase `n` strictly before `t`.
fn periodic_before(t: usize, n: usize, period: usize) -> Vec<usize> {
    (1..t).filter(|i| i % period == n).collect()
}

#[test]
fn advance_succeeds_exactly_when_every_needed_return_is_computable() {
    let history = random_history(200, 7);
    for period in 1..=8 {
        for horizon in 1..=period {
            let discount = DiscountConfig::new(0.5, horizon).unwrap();
            let mut p = UnifiedPredictor::new(&alphabets(), discount, 5, period, 3).unwrap();
            for n in 0..period {
                p.phase_mut(n).enable_trace();
            }
            for t in 1..=200 {
                for n in 0..period {
                    let needed = periodic_before(t, n, period);
                    let formula = (t as i64 - 1 - n as i64).rem_euclid(period as i64) as usize >= horizon - 1;
                    let computable = needed.iter().all(|&i| i + horizon - 1 < t);
                    let result = p.advance_phase(n, &history[..t - 1], t);
                    if needed.is_empty() {
                        assert!(result.is_ok());
                    } else {
                        assert_eq!(result.is_ok(), formula, "t={t} N={period} H={horizon} n={n}");
                        assert_eq!(formula, computable);
                    }
                    if result.is_err() {
                        assert!(matches!(result, Err(QError::InvalidPhase { .. })));
                    }
                }
            }
            for n in 0..period {
                let trace = p.phases()[n].trace();
                assert!(!trace.is_empty() || period >= 200);
                for ins in trace {
                    assert!(ins.position + horizon - 1 <= ins.available);
                    assert_eq!(ins.position % period, n);
                }
            }
        }
    }
}

#[test]
fn inserted_returns_are_the_discretized_h_step_returns() {
    let a = alphabets();
    let history = random_history(120, 3);
    let (period, horizon, levels, gamma) = (5, 3, 7, 0.6);
    let mut p = UnifiedPredictor::new(&a, DiscountConfig::new(gamma, horizon).unwrap(), levels, period, 4).unwrap();
    for n in 0..period {
        p.phase_mut(n).enable_trace();
        p.ingest_phase(n, &history);
    }
    for n in 0..period {
        let positions: Vec<usize> = p.phases()[n].trace().iter().map(|i| i.position).collect();
        let expected: Vec<usize> = (1..=history.len() + 1 - horizon).filter(|i| i % period == n).collect();
        assert_eq!(positions, expected);
        for ins in p.phases()[n].trace() {
            let rewards: Vec<f64> = history[ins.position - 1..ins.position - 1 + horizon]
                .iter()
                .map(|s| a.normalized_level(s.reward))
                .collect();
            assert_eq!(ins.index, discretize(h_step_return(&rewards, gamma), levels));
        }
    }
}

proptest! {
    #[test]
    fn the_serving_phase_is_always_valid(period in 1usize..9, h in 1usize..9, len in 0usize..60, seed in any::<u64>()) {
        let horizon = h.min(period);
        let history = random_history(len, seed);
        let mut p = UnifiedPredictor::new(&alphabets(), DiscountConfig::new(0.5, horizon).unwrap(), 4, period, 3).unwrap();
        let d = p.return_distributions(&history).unwrap();
        prop_assert_eq!(d.len(), 2);
        for dist in d {
            prop_assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lazy_and_stepwise_ingestion_agree(period in 1usize..6, h in 1usize..6, len in 0usize..50, seed in any::<u64>()) {
        let horizon = h.min(period);
        let history = random_history(len, seed);
        let build = || UnifiedPredictor::new(&alphabets(), DiscountConfig::new(0.7, horizon).unwrap(), 6, period, 5).unwrap();
        let (mut lazy, mut stepwise) = (build(), build());
        for n in 0..period {
            lazy.ingest_phase(n, &history);
            for k in 0..=len {
                stepwise.ingest_phase(n, &history[..k]);
            }
            prop_assert_eq!(lazy.phases()[n].tree().to_bytes(), stepwise.phases()[n].tree().to_bytes());
            prop_assert_eq!(lazy.phases()[n].pending(), stepwise.phases()[n].pending());
        }
    }

    #[test]
    fn catching_up_every_phase_matches_per_phase_ingestion(period in 1usize..6, len in 0usize..50, seed in any::<u64>()) {
        let history = random_history(len, seed);
        let build = || UnifiedPredictor::new(&alphabets(), DiscountConfig::new(0.7, period).unwrap(), 6, period, 5).unwrap();
        let (mut all, mut each) = (build(), build());
        all.ingest_all(&history);
        for n in 0..period {
            each.ingest_phase(n, &history);
            prop_assert_eq!(all.phases()[n].tree().to_bytes(), each.phases()[n].tree().to_bytes());
        }
    }
}

//! Latent parameterizations of the transition kernel and their inverse maps:
//! how a sampled latent Y turns back into the next state.

use crate::error::{Error, Result};
use crate::processes::Scheduler;
use crate::state::State;
use serde::{Deserialize, Serialize};

/// Which latent the kernel is factored through. The difference latent pairs
/// only with the dependent linear process; the next-state latent pairs with
/// the independent linear or full-history process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentKind {
    Difference,
    NextState,
}

/// y = x_T - x_0, elementwise.
pub fn difference_latent(x0: &State, x_big_t: &State) -> Result<State> {
    if !x0.same_shape(x_big_t) {
        return Err(Error::Shape("difference latent needs matching shapes".into()));
    }
    let data = x_big_t
        .as_slice()
        .iter()
        .zip(x0.as_slice())
        .map(|(b, a)| b - a)
        .collect();
    State::new(data, x0.n_tokens())
}

/// x_{t+1} = x_t + (r_{t+1} - r_t) y; the step factor collapses to 1/T on the
/// uniform grid and is the unique choice that telescopes to x_T on any grid.
pub fn dtm_reconstruct(x_t: &State, y: &State, sched: &Scheduler, t: usize) -> Result<State> {
    if !x_t.same_shape(y) {
        return Err(Error::Shape("state/latent shape mismatch".into()));
    }
    if t + 1 > sched.transitions {
        return Err(Error::Range(format!(
            "transition index {t} out of 0..{}",
            sched.transitions
        )));
    }
    let dr = sched.ratio(t + 1)? - sched.ratio(t)?;
    let data = x_t
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(x, y)| x + dr * y)
        .collect();
    State::new(data, x_t.n_tokens())
}

/// y = x_{t+1}: the latent is the next state itself.
pub fn next_state_latent(x_next: &State) -> State {
    x_next.clone()
}

/// The paired inverse of `next_state_latent` is the identity in y.
pub fn next_state_reconstruct(_x_t: &State, y: &State) -> State {
    y.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{independent_linear_pair, SchedulerKind};
    use crate::rng::rng_stream;
    use proptest::prelude::*;

    fn st(v: &[f64], n: usize) -> State {
        State::new(v.to_vec(), n).unwrap()
    }

    #[test]
    fn identical_endpoints_give_zero() {
        let x = st(&[1.0, -2.0], 2);
        assert_eq!(difference_latent(&x, &x).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn elementwise_subtraction() {
        let y = difference_latent(&st(&[0.0, 1.0], 2), &st(&[2.0, 1.0], 2)).unwrap();
        assert_eq!(y.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = st(&[0.0, 1.0], 2);
        let b = st(&[0.0, 1.0, 2.0], 3);
        assert!(matches!(difference_latent(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn single_transition_reconstruct_returns_target() {
        let sched = Scheduler::new(SchedulerKind::Uniform, 1).unwrap();
        let x0 = st(&[0.5, -0.5], 2);
        let x_t = st(&[2.0, 3.0], 2);
        let y = difference_latent(&x0, &x_t).unwrap();
        let out = dtm_reconstruct(&x0, &y, &sched, 0).unwrap();
        assert_eq!(out, x_t);
    }

    #[test]
    fn uniform_step_factor() {
        let sched = Scheduler::new(SchedulerKind::Uniform, 2).unwrap();
        let out = dtm_reconstruct(&st(&[1.0], 1), &st(&[0.5], 1), &sched, 0).unwrap();
        assert_eq!(out.as_slice(), &[1.25]);
    }

    #[test]
    fn zero_latent_keeps_state() {
        let sched = Scheduler::new(SchedulerKind::Exponential, 3).unwrap();
        let x = st(&[0.1, 0.2], 2);
        let out = dtm_reconstruct(&x, &State::zeros(2, 2), &sched, 1).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn telescoping_lands_on_target_any_grid() {
        for kind in [SchedulerKind::Uniform, SchedulerKind::Exponential] {
            let sched = Scheduler::new(kind, 5).unwrap();
            let x0 = st(&[0.3, -1.2, 0.0, 2.0], 2);
            let x_t = st(&[1.0, 1.0, -1.0, 0.5], 2);
            let y = difference_latent(&x0, &x_t).unwrap();
            let mut x = x0;
            for t in 0..5 {
                x = dtm_reconstruct(&x, &y, &sched, t).unwrap();
            }
            for (a, b) in x.as_slice().iter().zip(x_t.as_slice()) {
                assert!((a - b).abs() < 1e-12, "telescoping missed the target");
            }
        }
    }

    #[test]
    fn next_state_round_trip_is_bit_exact() {
        let sched = Scheduler::new(SchedulerKind::Uniform, 3).unwrap();
        let x_t = st(&[1.0, -1.0], 2);
        let mut rng = rng_stream(3, 3);
        let (a, b) = independent_linear_pair(&x_t, 1, &sched, &mut rng).unwrap();
        let y = next_state_latent(&b);
        assert_eq!(next_state_reconstruct(&a, &y), b);
    }

    #[test]
    fn next_state_reconstruct_ignores_current_state() {
        let y = st(&[9.0], 1);
        assert_eq!(next_state_reconstruct(&st(&[-4.0], 1), &y), y);
        assert_eq!(next_state_reconstruct(&st(&[7.0], 1), &y), y);
    }

    proptest! {
        #[test]
        fn difference_latent_translation_equivariant(
            base in proptest::collection::vec(-10.0f64..10.0, 4),
            c in -5.0f64..5.0,
        ) {
            let x0 = st(&base[..2], 2);
            let xt = st(&base[2..], 2);
            let shifted = |s: &State| {
                State::new(s.as_slice().iter().map(|v| v + c).collect(), 2).unwrap()
            };
            let y1 = difference_latent(&x0, &xt).unwrap();
            let y2 = difference_latent(&shifted(&x0), &shifted(&xt)).unwrap();
            for (a, b) in y1.as_slice().iter().zip(y2.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn dependent_law_identity_per_sample(
            target in proptest::collection::vec(-3.0f64..3.0, 2),
            t in 0usize..4,
            seed in 0u64..1000,
        ) {
            // On the dependent path, x_t + (r_{t+1}-r_t) y IS x_{t+1} exactly.
            let sched = Scheduler::new(SchedulerKind::Uniform, 4).unwrap();
            let x_t = st(&target, 2);
            let mut rng = rng_stream(seed, 0);
            let (x0, a, b) = crate::processes::linear_pair(&x_t, t, &sched, &mut rng).unwrap();
            let y = difference_latent(&x0, &x_t).unwrap();
            let rebuilt = dtm_reconstruct(&a, &y, &sched, t).unwrap();
            for (u, v) in rebuilt.as_slice().iter().zip(b.as_slice()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}

//! Supervising processes: the interpolation paths that manufacture training
//! pairs, and the transition-time schedulers that place the grid.
//!
//! All paths share the same construction x_r = (1-r) x_0 + r x_T with source
//! x_0 ~ N(0,I). The dependent variant reuses one x_0 for both ends of a
//! transition; the independent variant draws fresh noise per level, which
//! keeps every marginal identical but broadens the conditional of x_{t+1}
//! given x_t.

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::state::State;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    Uniform,
    Exponential,
}

/// Emits strictly increasing ratios r_0 = 0 < ... < r_T = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheduler {
    pub kind: SchedulerKind,
    pub transitions: usize,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, transitions: usize) -> Result<Scheduler> {
        if transitions < 1 {
            return Err(Error::Config("scheduler needs at least 1 transition".into()));
        }
        Ok(Scheduler { kind, transitions })
    }

    /// r at grid index 0..=T. Uniform: index/T. Exponential: 1 - 2^{-index}
    /// for index < T and exactly 1 at index = T (for T=3 this is the ladder
    /// {0, 0.5, 0.75, 1}); the general-T rule is an extrapolation of that
    /// ladder, flagged as a design decision.
    pub fn ratio(&self, index: usize) -> Result<f64> {
        let t = self.transitions;
        if index > t {
            return Err(Error::Range(format!("grid index {index} out of 0..={t}")));
        }
        Ok(match self.kind {
            SchedulerKind::Uniform => index as f64 / t as f64,
            SchedulerKind::Exponential => {
                if index == t {
                    1.0
                } else {
                    1.0 - (-(index as f64) * std::f64::consts::LN_2).exp()
                }
            }
        })
    }

    pub fn ratios(&self) -> Vec<f64> {
        (0..=self.transitions)
            .map(|i| self.ratio(i).expect("index in range"))
            .collect()
    }
}

/// One training tuple: the transition index, the state at that level, the
/// latent target, and (full-history only) the whole trajectory.
#[derive(Debug, Clone)]
pub struct ProcessSample {
    pub t: usize,
    pub x_t: State,
    pub y: State,
    pub history: Option<Vec<State>>,
}

fn draw_source(like: &State, rng: &mut CounterRng) -> State {
    let mut data = vec![0.0; like.dim()];
    rng.fill_normal(&mut data);
    State::new(data, like.n_tokens()).expect("finite by construction")
}

fn interpolate(x0: &State, x_t: &State, r: f64) -> State {
    let data = x0
        .as_slice()
        .iter()
        .zip(x_t.as_slice())
        .map(|(a, b)| (1.0 - r) * a + r * b)
        .collect();
    State::new(data, x_t.n_tokens()).expect("finite by construction")
}

/// Dependent coupling: one shared x_0 for both levels of the transition.
/// Returns (x_0, x_t, x_{t+1}).
pub fn linear_pair(
    x_big_t: &State,
    t: usize,
    sched: &Scheduler,
    rng: &mut CounterRng,
) -> Result<(State, State, State)> {
    let x0 = draw_source(x_big_t, rng);
    linear_pair_with_source(x_big_t, t, sched, x0)
}

/// Deterministic-source variant of `linear_pair` (zero-noise algebra tests
/// inject x_0 here; the production path always draws it).
pub fn linear_pair_with_source(
    x_big_t: &State,
    t: usize,
    sched: &Scheduler,
    x0: State,
) -> Result<(State, State, State)> {
    if t + 1 > sched.transitions {
        return Err(Error::Range(format!(
            "transition index {t} out of 0..{}",
            sched.transitions
        )));
    }
    if !x0.same_shape(x_big_t) {
        return Err(Error::Shape("source/target shape mismatch".into()));
    }
    let r_t = sched.ratio(t)?;
    let r_next = sched.ratio(t + 1)?;
    let x_t = interpolate(&x0, x_big_t, r_t);
    let x_next = interpolate(&x0, x_big_t, r_next);
    Ok((x0, x_t, x_next))
}

/// Independent coupling: fresh noise per level. Returns (x_t, x_{t+1}).
pub fn independent_linear_pair(
    x_big_t: &State,
    t: usize,
    sched: &Scheduler,
    rng: &mut CounterRng,
) -> Result<(State, State)> {
    if t + 1 > sched.transitions {
        return Err(Error::Range(format!(
            "transition index {t} out of 0..{}",
            sched.transitions
        )));
    }
    let r_t = sched.ratio(t)?;
    let r_next = sched.ratio(t + 1)?;
    let x0_t = draw_source(x_big_t, rng);
    let x0_next = draw_source(x_big_t, rng);
    Ok((
        interpolate(&x0_t, x_big_t, r_t),
        interpolate(&x0_next, x_big_t, r_next),
    ))
}

/// Continuous-time point on the dependent path: r anywhere in [0,1].
/// Returns (x_0, x_r).
pub fn linear_at_ratio(x_big_t: &State, r: f64, rng: &mut CounterRng) -> Result<(State, State)> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Range(format!("ratio {r} outside [0,1]")));
    }
    let x0 = draw_source(x_big_t, rng);
    let x_r = interpolate(&x0, x_big_t, r);
    Ok((x0, x_r))
}

/// Whole trajectory X_0..X_T with independent noise per level; the last entry
/// is the data point itself.
pub fn full_history_sample(
    x_big_t: &State,
    sched: &Scheduler,
    rng: &mut CounterRng,
) -> Result<Vec<State>> {
    let mut out = Vec::with_capacity(sched.transitions + 1);
    for t in 0..sched.transitions {
        let r = sched.ratio(t)?;
        let x0 = draw_source(x_big_t, rng);
        out.push(interpolate(&x0, x_big_t, r));
    }
    out.push(x_big_t.clone());
    Ok(out)
}

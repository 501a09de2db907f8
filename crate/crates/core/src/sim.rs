//! Forward simulation of the dynamics and the record it leaves behind.

use crate::error::{dim_err, LtvError, Result};
use crate::instance::{Interval, LtvInstance};
use crate::linalg::{all_finite, Vector};

/// State norm beyond which a rollout is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// A realized trajectory. `states[k]` is `x_{k+1}`, so the vector holds
/// `x_1..x_{T+1}`; inputs and costs hold `u_1..u_T` and `c_1..c_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub costs: Vec<f64>,
    /// Per-step exploration flags, when the producing algorithm explores.
    pub explore_flags: Option<Vec<bool>>,
    /// Per-step estimates of Nature's state, when the algorithm forms them.
    pub nat_estimates: Option<Vec<Vector>>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn state(&self, t: usize) -> &Vector {
        &self.states[t - 1]
    }

    pub fn input(&self, t: usize) -> &Vector {
        &self.inputs[t - 1]
    }

    pub fn cost(&self, t: usize) -> f64 {
        self.costs[t - 1]
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn interval_cost(&self, interval: &Interval) -> f64 {
        self.costs[interval.start - 1..interval.end].iter().sum()
    }

    /// Re-derives every `x_{t+1}` from `(x_t, u_t)` and the instance and
    /// demands bit-exact agreement. Returns the first step that disagrees.
    pub fn replay_check(&self, inst: &LtvInstance) -> std::result::Result<(), usize> {
        if self.states.first() != Some(inst.initial_state()) {
            return Err(1);
        }
        for t in 1..=self.horizon() {
            let next = inst.transition(t, self.state(t), self.input(t));
            if &next != self.state(t + 1) {
                return Err(t);
            }
        }
        Ok(())
    }
}

/// What a controller sees when choosing `u_t`: states `x_1..x_t` and inputs
/// `u_1..u_{t-1}`.
#[derive(Clone, Copy, Debug)]
pub struct History<'a> {
    pub states: &'a [Vector],
    pub inputs: &'a [Vector],
}

impl<'a> History<'a> {
    /// `x_s`, or `None` when `s` is not yet observed or below 1.
    pub fn x(&self, s: usize) -> Option<&'a Vector> {
        s.checked_sub(1).and_then(|i| self.states.get(i))
    }

    pub fn u(&self, s: usize) -> Option<&'a Vector> {
        s.checked_sub(1).and_then(|i| self.inputs.get(i))
    }

    pub fn current(&self) -> &'a Vector {
        self.states.last().expect("history always holds x_1")
    }
}

/// Step-by-step simulator for learners that need to observe `x_{t+1}`
/// before the next decision.
#[derive(Debug)]
pub struct Simulator<'a> {
    inst: &'a LtvInstance,
    states: Vec<Vector>,
    inputs: Vec<Vector>,
    costs: Vec<f64>,
}

impl<'a> Simulator<'a> {
    pub fn new(inst: &'a LtvInstance) -> Self {
        let horizon = inst.horizon();
        let mut states = Vec::with_capacity(horizon + 1);
        states.push(inst.initial_state().clone());
        Simulator { inst, states, inputs: Vec::with_capacity(horizon), costs: Vec::with_capacity(horizon) }
    }

    pub fn instance(&self) -> &'a LtvInstance {
        self.inst
    }

    /// The step about to be played (`T+1` once finished).
    pub fn t(&self) -> usize {
        self.inputs.len() + 1
    }

    pub fn done(&self) -> bool {
        self.inputs.len() == self.inst.horizon()
    }

    pub fn state(&self) -> &Vector {
        self.states.last().expect("simulator always holds x_1")
    }

    pub fn history(&self) -> History<'_> {
        History { states: &self.states, inputs: &self.inputs }
    }

    /// Plays `u_t`, records `c_t(x_t, u_t)` and returns `x_{t+1}`.
    pub fn step(&mut self, u: Vector) -> Result<&Vector> {
        let t = self.t();
        if t > self.inst.horizon() {
            return Err(LtvError::OutOfHorizon { t, horizon: self.inst.horizon() });
        }
        if u.len() != self.inst.input_dim() {
            return Err(dim_err(t, "u_t", (self.inst.input_dim(), 1), (u.len(), 1)));
        }
        if !all_finite(u.iter()) {
            return Err(LtvError::NonFinite { t, what: "input" });
        }
        let x = self.state();
        let cost = self.inst.cost(t).value(x, &u);
        let next = self.inst.transition(t, x, &u);
        let norm = next.norm();
        if !norm.is_finite() {
            return Err(LtvError::NonFinite { t, what: "state" });
        }
        if norm > DIVERGENCE_GUARD {
            return Err(LtvError::Divergence { t, norm });
        }
        self.costs.push(cost);
        self.inputs.push(u);
        self.states.push(next);
        Ok(self.states.last().expect("just pushed"))
    }

    pub fn finish(self) -> Trace {
        Trace { states: self.states, inputs: self.inputs, costs: self.costs, explore_flags: None, nat_estimates: None }
    }
}

/// Runs `controller` against the instance from `x_1` for all `T` steps.
pub fn simulate<F>(inst: &LtvInstance, mut controller: F) -> Result<Trace>
where
    F: FnMut(usize, History<'_>) -> Vector,
{
    let mut sim = Simulator::new(inst);
    while !sim.done() {
        let t = sim.t();
        let u = controller(t, sim.history());
        sim.step(u)?;
    }
    Ok(sim.finish())
}

/// The zero-input controller.
pub fn zero_input(inst: &LtvInstance) -> impl FnMut(usize, History<'_>) -> Vector {
    let d_u = inst.input_dim();
    move |_, _| Vector::zeros(d_u)
}

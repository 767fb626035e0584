use nalgebra::DVector;

use crate::control::{ControlInput, Controller, Diagnostics};
use crate::dynamics::DynamicsTerms;
use crate::error::{Error, Result};
use crate::model::{State, SystemModel};
use crate::spatial;

/// Any |q_i| beyond this stops the run.
pub const ESCAPE_BOUND: f64 = 1e3;

/// Closed-loop right-hand side evaluated at one state.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub qdd: DVector<f64>,
    pub input: ControlInput<f64>,
    /// Total generalized force `B u + disturbance`.
    pub tau: DVector<f64>,
    pub diagnostics: Diagnostics<f64>,
}

/// Result of one integration step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: State<f64>,
    /// Input at the start of the step.
    pub start: Evaluation,
    /// Work done by `tau` over the step, `int qd^T tau dt`.
    pub work: f64,
}

/// Fixed-step RK4 integrator of the closed loop.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub model: SystemModel<f64>,
    pub controller: Controller<f64>,
    pub disturbance: Option<DVector<f64>>,
    /// Hold the input computed at the step start across all stages.
    pub hold: bool,
}

impl Simulator {
    pub fn new(model: SystemModel<f64>, controller: Controller<f64>) -> Self {
        Self {
            model,
            controller,
            disturbance: None,
            hold: false,
        }
    }

    fn tau_of(&self, input: &ControlInput<f64>) -> DVector<f64> {
        let mut tau = input.generalized_force();
        if let Some(d) = &self.disturbance {
            tau += d;
        }
        tau
    }

    pub fn evaluate(&self, state: &State<f64>) -> Result<Evaluation> {
        let terms = DynamicsTerms::evaluate(&self.model, &state.q, &state.qd).map_err(|e| escape(state.t, e))?;
        let (input, diagnostics) = self.controller.compute(&self.model, state, terms.clone())?;
        let tau = self.tau_of(&input);
        let qdd = terms.forward(&tau)?;
        Ok(Evaluation {
            qdd,
            input,
            tau,
            diagnostics,
        })
    }

    fn evaluate_held(&self, state: &State<f64>, held: &Evaluation) -> Result<Evaluation> {
        let terms = DynamicsTerms::evaluate(&self.model, &state.q, &state.qd).map_err(|e| escape(state.t, e))?;
        let qdd = terms.forward(&held.tau)?;
        Ok(Evaluation { qdd, ..held.clone() })
    }

    /// One classical RK4 step on `(q, qd)`.
    pub fn step(&self, state: &State<f64>, dt: f64) -> Result<StepOutput> {
        check_escape(state)?;
        let at = |s: &State<f64>, c: f64, dq: &DVector<f64>, dqd: &DVector<f64>| {
            State::new(s.t + c * dt, &s.q + dq * (c * dt), &s.qd + dqd * (c * dt))
        };
        let stage = |s: &State<f64>, first: &Evaluation| {
            if self.hold {
                self.evaluate_held(s, first)
            } else {
                self.evaluate(s)
            }
        };
        let power = |s: &State<f64>, e: &Evaluation| s.qd.dot(&e.tau);

        let e1 = self.evaluate(state)?;
        let s2 = at(state, 0.5, &state.qd, &e1.qdd);
        check_escape(&s2)?;
        let e2 = stage(&s2, &e1)?;
        let s3 = at(state, 0.5, &s2.qd, &e2.qdd);
        check_escape(&s3)?;
        let e3 = stage(&s3, &e1)?;
        let s4 = at(state, 1.0, &s3.qd, &e3.qdd);
        check_escape(&s4)?;
        let e4 = stage(&s4, &e1)?;

        let dq = (&state.qd + (&s2.qd + &s3.qd) * 2.0 + &s4.qd) * (dt / 6.0);
        let dqd = (&e1.qdd + (&e2.qdd + &e3.qdd) * 2.0 + &e4.qdd) * (dt / 6.0);
        let work = dt / 6.0 * (power(state, &e1) + 2.0 * power(&s2, &e2) + 2.0 * power(&s3, &e3) + power(&s4, &e4));
        let next = State::new(state.t + dt, &state.q + dq, &state.qd + dqd);
        check_escape(&next)?;
        Ok(StepOutput {
            state: next,
            start: e1,
            work,
        })
    }
}

fn escape(t: f64, e: Error) -> Error {
    match e {
        Error::GimbalLock { pitch } => Error::StateEscape {
            t,
            reason: format!("gimbal lock at pitch {pitch}"),
        },
        other => other,
    }
}

fn check_escape(state: &State<f64>) -> Result<()> {
    let t = state.t;
    if let Some(i) = state.q.iter().chain(state.qd.iter()).position(|x| !x.is_finite()) {
        return Err(Error::StateEscape {
            t,
            reason: format!("non-finite state entry {i}"),
        });
    }
    if let Some(i) = state.q.iter().position(|x| x.abs() > ESCAPE_BOUND) {
        return Err(Error::StateEscape {
            t,
            reason: format!("|q[{i}]| = {} exceeds {ESCAPE_BOUND}", state.q[i].abs()),
        });
    }
    spatial::check_pitch(state.q[1]).map_err(|e| escape(t, e))
}

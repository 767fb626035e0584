//! Fixed-step closed-loop simulation, scenarios and trajectory metrics.

mod integrate;
mod metrics;
mod presets;
mod scenario;
mod trajectory;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use log::{info, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use integrate::{Evaluation, Simulator, StepOutput, ESCAPE_BOUND};
pub use metrics::{
    classify, decay_rate, peak_to_peak, settling_time, trailing_amplitude, Classification, Criteria, DECAY_FLOOR,
    SUSTAINED_RATIO,
};
pub use presets::{arm_target, Expectation, Preset};
pub use scenario::{InitialState, ModelOverrides, ModelSpec, Resolved, Scenario, SetpointSpec, MAX_DT};
pub use trajectory::{csv_header, Record, Trajectory};

use crate::dynamics::kinetic_energy;
use crate::error::{Error, Result};
use crate::model::{State, SystemModel};

pub const DEFAULT_BAND: f64 = 1e-3;
pub const DEFAULT_WINDOW: f64 = 10.0;
/// Trailing span and block length of the envelope decay fit.
pub const DECAY_SPAN: f64 = 30.0;
pub const DECAY_BLOCK: f64 = 5.0;

/// Per-signal verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalReport {
    pub classification: Classification,
    pub settling_time: Option<f64>,
    pub amplitude: f64,
    pub final_norm: f64,
    pub decay_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub energy_change: f64,
    pub work: f64,
    /// `|dE - W|` over the larger of the absolute work and the peak kinetic energy.
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub name: String,
    pub controller: String,
    pub links: usize,
    pub dt: f64,
    pub simulated_time: f64,
    pub escape: Option<String>,
    pub q_m_star: [f64; 2],
    /// Keyed by `phi`, `q_m`, `x_c`, `gamma`, `q_r`.
    pub signals: BTreeMap<String, SignalReport>,
    /// Decay rate of `|(x_c, q_m - q_m_star)|` over the trailing span.
    pub envelope_decay_rate: Option<f64>,
    pub energy_audit: EnergyAudit,
}

impl OutcomeReport {
    pub fn signal(&self, name: &str) -> &SignalReport {
        &self.signals[name]
    }

    pub fn classification(&self, name: &str) -> Classification {
        self.signal(name).classification
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub report: OutcomeReport,
    pub final_state: State<f64>,
}

pub fn total_energy(model: &SystemModel<f64>, state: &State<f64>) -> Result<f64> {
    Ok(kinetic_energy(model, &state.q, &state.qd)? + model.potential_energy(&state.q)?)
}

fn record(model: &SystemModel<f64>, state: &State<f64>, eval: &Evaluation) -> Result<Record> {
    Ok(Record {
        t: state.t,
        q: state.q.clone(),
        qd: state.qd.clone(),
        u: eval.input.to_vector(),
        xc: model.com_xy(&state.q)?,
        e_kin: kinetic_energy(model, &state.q, &state.qd)?,
        e_pot: model.potential_energy(&state.q)?,
    })
}

/// Whether an error raised mid-run means the state left the usable envelope.
fn is_breakdown(e: &Error) -> bool {
    matches!(
        e,
        Error::StateEscape { .. }
            | Error::GimbalLock { .. }
            | Error::SingularMass { .. }
            | Error::SingularCoupling { .. }
            | Error::IllConditionedTransform { .. }
    )
}

/// Integrates a resolved scenario and computes its report.
pub fn run_resolved(sc: &Resolved) -> Result<RunOutput> {
    let sim = Simulator {
        model: sc.model.clone(),
        controller: sc.controller.clone(),
        disturbance: sc.disturbance.clone(),
        hold: sc.hold,
    };
    let mut traj = Trajectory::new(sc.model.link_count());
    let mut state = sc.initial.clone();
    let e0 = total_energy(&sc.model, &state)?;
    let mut work = 0.0;
    let mut abs_work = 0.0;
    let mut escape = None;

    for i in 0..=sc.steps {
        let logged = i % sc.decimation == 0;
        if i == sc.steps {
            if logged {
                match sim.evaluate(&state) {
                    Ok(eval) => traj.records.push(record(&sc.model, &state, &eval)?),
                    Err(e) if is_breakdown(&e) => escape = Some(e.to_string()),
                    Err(e) => return Err(e),
                }
            }
            break;
        }
        match sim.step(&state, sc.dt) {
            Ok(out) => {
                if logged {
                    traj.records.push(record(&sc.model, &state, &out.start)?);
                }
                work += out.work;
                abs_work += out.work.abs();
                state = out.state;
            }
            Err(e) if i > 0 && is_breakdown(&e) => {
                warn!("{}: run stopped at t = {:.3}: {e}", sc.name, state.t);
                escape = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let de = total_energy(&sc.model, &state)? - e0;
    let peak_kin = traj.records.iter().map(|r| r.e_kin).fold(0.0, f64::max);
    let scale = abs_work.max(peak_kin).max(f64::MIN_POSITIVE);
    let audit = EnergyAudit {
        energy_change: de,
        work,
        relative_error: (de - work).abs() / scale,
    };
    let report = build_report(sc, &traj, escape, audit);
    info!(
        "{}: phi {}, q_m {}, x_c {}",
        sc.name,
        report.classification("phi"),
        report.classification("q_m"),
        report.classification("x_c")
    );
    Ok(RunOutput {
        trajectory: traj,
        report,
        final_state: state,
    })
}

pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    run_resolved(&scenario.resolve()?)
}

fn build_report(sc: &Resolved, traj: &Trajectory, escape: Option<String>, audit: EnergyAudit) -> OutcomeReport {
    let sp = &sc.controller.setpoint;
    let times = traj.times();
    let qm_star = sp.q_m_star;
    let q_r_des = sp.q_r_des.clone();
    let gamma_des = sp.gamma_des;
    let n = sc.model.link_count();
    let window = DEFAULT_WINDOW.min(sc.steps as f64 * sc.dt / 3.0);
    let t_end = times.last().copied().unwrap_or(0.0);

    type Extract = Box<dyn Fn(&Record) -> Vec<f64>>;
    let q_r_des2 = q_r_des.clone();
    let signals: Vec<(&str, f64, Extract)> = vec![
        ("phi", 1.0, Box::new(|r: &Record| vec![r.q[0], r.q[1]])),
        (
            "q_m",
            2.0,
            Box::new(move |r: &Record| vec![r.q[3] - qm_star.x, r.q[4] - qm_star.y]),
        ),
        ("x_c", 2.0, Box::new(|r: &Record| vec![r.xc.x, r.xc.y])),
        ("gamma", PI, Box::new(move |r: &Record| vec![r.q[2] - gamma_des])),
        (
            "q_r",
            2.0 * PI,
            Box::new(move |r: &Record| (0..n).map(|k| r.q[5 + k] - q_r_des2[k]).collect()),
        ),
    ];
    let mut map = BTreeMap::new();
    for (name, escape_bound, f) in signals {
        let values = traj.signal(f);
        let c = Criteria {
            band: DEFAULT_BAND,
            window,
            escape: escape_bound,
        };
        let final_norm = values
            .last()
            .map(|v| DVector::from_column_slice(v).norm())
            .unwrap_or(0.0);
        map.insert(
            name.to_string(),
            SignalReport {
                classification: classify(&times, &values, &c, escape.is_some()),
                settling_time: settling_time(&times, &values, DEFAULT_BAND),
                amplitude: trailing_amplitude(&times, &values, window),
                final_norm,
                decay_rate: decay_rate(&times, &values, t_end - DECAY_SPAN, t_end, DECAY_BLOCK),
            },
        );
    }
    let envelope = traj.signal(|r| vec![r.xc.x, r.xc.y, r.q[3] - qm_star.x, r.q[4] - qm_star.y]);
    OutcomeReport {
        name: sc.name.clone(),
        controller: sc.controller.kind.name().to_string(),
        links: n,
        dt: sc.dt,
        simulated_time: t_end,
        escape,
        q_m_star: [qm_star.x, qm_star.y],
        signals: map,
        envelope_decay_rate: decay_rate(&times, &envelope, t_end - DECAY_SPAN, t_end, DECAY_BLOCK),
        energy_audit: audit,
    }
}

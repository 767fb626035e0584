use std::path::Path;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::control::{
    balance_residual, solve_equilibrium_qm, Controller, ControllerKind, Gains, Setpoint, EQUILIBRIUM_TOL,
};
use crate::error::{Error, Result};
use crate::model::{preset_paper, State, SystemModel};

pub const MAX_DT: f64 = 0.01;

/// Built-in model plus optional parameter overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Link count of the built-in preset (3 or 7).
    pub links: usize,
    #[serde(default, skip_serializing_if = "ModelOverrides::is_empty")]
    pub overrides: ModelOverrides,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform_mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mover_mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wire_length_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rail_height_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub travel_limit_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity_mps2: Option<f64>,
    /// Multiplies every link mass and inertia.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm_mass_scale: Option<f64>,
}

impl ModelOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<SystemModel<f64>> {
        let mut m = preset_paper::<f64>(self.links)?;
        let o = &self.overrides;
        if let Some(v) = o.platform_mass_kg {
            m.platform.mass = v;
        }
        if let Some(v) = o.mover_mass_kg {
            m.movers.mass = v;
        }
        if let Some(v) = o.wire_length_m {
            m.platform.wire_length = v;
        }
        if let Some(v) = o.rail_height_m {
            m.platform.rail_height = v;
        }
        if let Some(v) = o.travel_limit_m {
            m.movers.travel_limit = v;
        }
        if let Some(v) = o.gravity_mps2 {
            m.gravity = v;
        }
        if let Some(s) = o.arm_mass_scale {
            for link in &mut m.links {
                link.mass *= s;
                link.inertia *= s;
            }
        }
        m.validate()?;
        Ok(m)
    }
}

/// Initial positions and rates; omitted vectors are zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qd: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetpointSpec {
    #[serde(default)]
    pub gamma_des: f64,
    /// Defaults to the zero arm configuration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_r_des: Option<Vec<f64>>,
    /// Solved from the static balance when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_m_star: Option<[f64; 2]>,
}

/// One closed-loop experiment, serializable as a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub initial: InitialState,
    pub controller: ControllerKind,
    /// Defaults to [`Gains::default_for`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Gains<f64>>,
    pub setpoint: SetpointSpec,
    #[serde(default = "default_dt", alias = "dt_s")]
    pub dt: f64,
    #[serde(default = "default_duration", alias = "duration_s")]
    pub duration: f64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    /// Zero-order hold of the input over each step instead of per-stage evaluation.
    #[serde(default)]
    pub hold: bool,
    /// Constant generalized force added to `B u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<Vec<f64>>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_duration() -> f64 {
    60.0
}

fn default_decimation() -> usize {
    10
}

/// A scenario with every default filled in and every invariant checked.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub name: String,
    pub model: SystemModel<f64>,
    pub controller: Controller<f64>,
    pub initial: State<f64>,
    pub dt: f64,
    pub steps: usize,
    pub decimation: usize,
    pub hold: bool,
    pub disturbance: Option<DVector<f64>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return bad(format!("dt = {} outside (0, {MAX_DT}]", self.dt));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration = {} must be positive", self.duration));
        }
        if self.decimation == 0 {
            return bad("decimation must be at least 1".into());
        }
        let model = self.model.build()?;
        let n = model.link_count();
        let dof = model.dof();

        let vec_or_zero = |v: &Option<Vec<f64>>, len: usize, what: &str| -> Result<DVector<f64>> {
            match v {
                None => Ok(DVector::zeros(len)),
                Some(v) if v.len() == len => Ok(DVector::from_column_slice(v)),
                Some(v) => Err(Error::InvalidScenario(format!(
                    "{what} has {} entries, expected {len}",
                    v.len()
                ))),
            }
        };
        let q = vec_or_zero(&self.initial.q, dof, "initial q")?;
        let qd = vec_or_zero(&self.initial.qd, dof, "initial qd")?;
        let initial = State::new(0.0, q, qd);
        initial.validate(dof)?;

        let q_r_des = vec_or_zero(&self.setpoint.q_r_des, n, "q_r_des")?;
        let q_m_star = match self.setpoint.q_m_star {
            Some([a, b]) => {
                let qm = Vector2::new(a, b);
                let r = balance_residual(&model, &qm, &q_r_des)?.norm();
                if r >= EQUILIBRIUM_TOL {
                    return bad(format!("q_m_star ({a}, {b}) does not balance the arm: |g_phi| = {r:e}"));
                }
                qm
            }
            None => solve_equilibrium_qm(&model, &q_r_des)?.q_m,
        };
        let setpoint = Setpoint {
            gamma_des: self.setpoint.gamma_des,
            q_r_des,
            q_m_star,
        };

        let gains = self.gains.clone().unwrap_or_else(|| Gains::default_for(n));
        gains.validate(n)?;

        let disturbance = self
            .disturbance
            .as_ref()
            .map(|d| vec_or_zero(&Some(d.clone()), dof, "disturbance"))
            .transpose()?;

        Ok(Resolved {
            name: self.name.clone(),
            model,
            controller: Controller::new(self.controller, gains, setpoint),
            initial,
            dt: self.dt,
            steps: (self.duration / self.dt).round() as usize,
            decimation: self.decimation,
            hold: self.hold,
            disturbance,
        })
    }
}

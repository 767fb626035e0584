use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;

use super::metrics::Classification;
use super::scenario::{ModelSpec, Scenario, SetpointSpec};
use super::OutcomeReport;
use crate::control::{ControllerKind, Gains};
use crate::error::Error;

/// Built-in experiments, one per mover reference law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Fig3Motivating,
    Fig4Remark1,
    Fig5Remark2,
    Fig6Proposed,
}

/// Arm target of the built-in experiments: first two joints at a quarter
/// and half turn, the rest at zero.
pub fn arm_target(links: usize) -> Vec<f64> {
    let mut q = vec![0.0; links];
    q[0] = PI / 4.0;
    if links > 1 {
        q[1] = PI / 2.0;
    }
    q
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Self::Fig3Motivating,
        Self::Fig4Remark1,
        Self::Fig5Remark2,
        Self::Fig6Proposed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig3Motivating => "fig3_motivating",
            Self::Fig4Remark1 => "fig4_remark1",
            Self::Fig5Remark2 => "fig5_remark2",
            Self::Fig6Proposed => "fig6_proposed",
        }
    }

    pub fn controller(&self) -> ControllerKind {
        match self {
            Self::Fig3Motivating => ControllerKind::Motivating,
            Self::Fig4Remark1 => ControllerKind::Remark1,
            Self::Fig5Remark2 => ControllerKind::Remark2,
            Self::Fig6Proposed => ControllerKind::Proposed,
        }
    }

    /// Desk-scale arm, except the balancing law with mover PD, which needs
    /// the larger static imbalance of the 7-link arm to excite a visible
    /// attitude cycle.
    pub fn links(&self) -> usize {
        match self {
            Self::Fig5Remark2 => 7,
            _ => 3,
        }
    }

    pub fn gains(&self) -> Gains<f64> {
        let mut g = Gains::default_for(self.links());
        match self {
            Self::Fig3Motivating | Self::Fig6Proposed => {}
            Self::Fig4Remark1 => g.d_c = Vector2::repeat(400.0),
            Self::Fig5Remark2 => {
                g.k_phi = Vector2::repeat(500.0);
                g.d_phi = Vector2::repeat(500.0);
                g.d_m = Vector2::repeat(2.0);
                g.k_m = Vector2::repeat(2.0);
            }
        }
        g
    }

    /// The arm starts at rest in the zero configuration and moves to
    /// [`arm_target`] with yaw held at zero.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            name: self.name().to_string(),
            model: ModelSpec {
                links: self.links(),
                overrides: Default::default(),
            },
            initial: Default::default(),
            controller: self.controller(),
            gains: Some(self.gains()),
            setpoint: SetpointSpec {
                gamma_des: 0.0,
                q_r_des: Some(arm_target(self.links())),
                q_m_star: None,
            },
            dt: 0.01,
            duration: 60.0,
            decimation: 1,
            hold: false,
            disturbance: None,
        }
    }

    /// Checks the report against the qualitative outcome this preset reproduces.
    pub fn expectation(&self, report: &OutcomeReport) -> Expectation {
        use Classification::*;
        let class = |s: &str| report.classification(s);
        let mut checks = Vec::new();
        let mut check = |what: String, ok: bool| checks.push((what, ok));
        match self {
            Self::Fig3Motivating => {
                check(
                    format!("phi converged (got {})", class("phi")),
                    class("phi") == Converged,
                );
                let amp = report.signal("q_m").amplitude;
                check(
                    format!("q_m limit_cycle with amplitude > 0.02 (got {}, {amp:.4})", class("q_m")),
                    class("q_m") == LimitCycle && amp > 0.02,
                );
            }
            Self::Fig4Remark1 => {
                check(
                    format!("x_c converged (got {})", class("x_c")),
                    class("x_c") == Converged,
                );
                check(
                    format!("phi or q_m diverged (got {}, {})", class("phi"), class("q_m")),
                    class("phi") == Diverged || class("q_m") == Diverged,
                );
            }
            Self::Fig5Remark2 => {
                for s in ["phi", "q_m"] {
                    check(
                        format!("{s} oscillating without converging (got {})", class(s)),
                        matches!(class(s), LimitCycle | Inconclusive),
                    );
                }
            }
            Self::Fig6Proposed => {
                for s in ["x_c", "q_m", "phi", "gamma", "q_r"] {
                    check(format!("{s} converged (got {})", class(s)), class(s) == Converged);
                }
                let rate = report.envelope_decay_rate;
                check(
                    format!("envelope decay rate positive (got {rate:?})"),
                    rate.is_some_and(|r| r > 0.0),
                );
            }
        }
        Expectation { checks }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown preset {s:?}")))
    }
}

/// Named pass/fail checks of one run against its expected outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub checks: Vec<(String, bool)>,
}

impl Expectation {
    pub fn met(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

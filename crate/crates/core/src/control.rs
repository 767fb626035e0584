//! Partial-feedback-linearizing input laws and the mover reference
//! accelerations that drive the unactuated roll/pitch dynamics.
//!
//! The actuated output is `y = B^T q = (yaw, q_m, q_r)`. Yaw and the arm
//! follow PD reference accelerations; the mover reference acceleration is
//! where the strategies differ.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::dynamics::{ActuationMap, DynamicsTerms, TransformedTerms};
use crate::error::{Error, Result};
use crate::model::{State, SystemModel, ARM_OFFSET, MOVER_OFFSET};
use crate::scalar::Real;

/// Largest accepted condition number of `M_phi_m`.
pub const MAX_COUPLING_COND: f64 = 1e8;
/// Required ratio between CoM gains and mover gains for the proposed law.
pub const GAIN_RATIO: f64 = 10.0;

/// Controller gains. Matrix gains are diagonal and stored as their diagonals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Gains<T: Real> {
    pub d_gamma: T,
    pub k_gamma: T,
    #[serde(with = "crate::scalar::dvector_seq")]
    pub d_r: DVector<T>,
    #[serde(with = "crate::scalar::dvector_seq")]
    pub k_r: DVector<T>,
    pub d: Vector2<T>,
    pub d_c: Vector2<T>,
    pub k_c: Vector2<T>,
    pub d_m: Vector2<T>,
    pub k_m: Vector2<T>,
    pub d_phi: Vector2<T>,
    pub k_phi: Vector2<T>,
}

impl<T: Real> Gains<T> {
    /// Default tuning for an `n`-link arm on the desk-scale preset.
    ///
    /// The CoM loop is much stiffer than the mover loop (`K_c = 10^4`
    /// against `K_m = 0.5`) because the movers shift the CoM only weakly;
    /// `D_m > K_m` keeps the CoM swing damped.
    pub fn default_for(n: usize) -> Self {
        let v2 = |x: f64| Vector2::repeat(T::lit(x));
        Self {
            d_gamma: T::lit(10.0),
            k_gamma: T::lit(25.0),
            d_r: DVector::from_element(n, T::lit(10.0)),
            k_r: DVector::from_element(n, T::lit(25.0)),
            d: v2(5.0),
            d_c: v2(40.0),
            k_c: v2(10000.0),
            d_m: v2(2.0),
            k_m: v2(0.5),
            d_phi: v2(3000.0),
            k_phi: v2(4400.0),
        }
    }

    pub fn validate(&self, links: usize) -> Result<()> {
        if self.d_r.len() != links || self.k_r.len() != links {
            return Err(Error::InvalidScenario(format!(
                "arm gains have {} / {} entries for {links} links",
                self.d_r.len(),
                self.k_r.len()
            )));
        }
        let pairs = [self.d, self.d_c, self.k_c, self.d_m, self.k_m, self.d_phi, self.k_phi];
        let all = [self.d_gamma, self.k_gamma]
            .into_iter()
            .chain(self.d_r.iter().copied())
            .chain(self.k_r.iter().copied())
            .chain(pairs.iter().flat_map(|v| v.iter().copied()));
        for g in all {
            if !(g > T::zero()) || !g.is_finite() {
                return Err(Error::InvalidScenario(format!("gain {g} must be positive")));
            }
        }
        Ok(())
    }

    /// Whether `min(D_c, K_c) >= 10 max(D_m, K_m)`.
    pub fn satisfies_gain_ratio(&self) -> bool {
        let com_min = self.d_c.min().min(self.k_c.min());
        let mover_max = self.d_m.max().max(self.k_m.max());
        com_min >= T::lit(GAIN_RATIO) * mover_max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Setpoint<T: Real> {
    pub gamma_des: T,
    #[serde(with = "crate::scalar::dvector_seq")]
    pub q_r_des: DVector<T>,
    /// Mover position balancing the arm's static gravity torque.
    pub q_m_star: Vector2<T>,
}

/// `u = (tau_yaw, tau_m, tau_r)`; the generalized force is `B u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlInput<T: Real> {
    pub tau_yaw: T,
    pub tau_m: Vector2<T>,
    pub tau_r: DVector<T>,
}

impl<T: Real> ControlInput<T> {
    pub fn zeros(links: usize) -> Self {
        Self {
            tau_yaw: T::zero(),
            tau_m: Vector2::zeros(),
            tau_r: DVector::zeros(links),
        }
    }

    pub fn from_vector(u: &DVector<T>) -> Self {
        Self {
            tau_yaw: u[0],
            tau_m: Vector2::new(u[1], u[2]),
            tau_r: u.rows(3, u.len() - 3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> DVector<T> {
        let mut u = DVector::zeros(3 + self.tau_r.len());
        u[0] = self.tau_yaw;
        u[1] = self.tau_m.x;
        u[2] = self.tau_m.y;
        u.rows_mut(3, self.tau_r.len()).copy_from(&self.tau_r);
        u
    }

    /// Generalized force `tau = B u`.
    pub fn generalized_force(&self) -> DVector<T> {
        ActuationMap::new(self.tau_r.len() + 5).apply(&self.to_vector())
    }
}

/// Reference accelerations of the outer PD loops on yaw and arm joints.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterRefs<T: Real> {
    pub gamma_dd: T,
    pub q_r_dd: DVector<T>,
}

pub fn outer_refs<T: Real>(state: &State<T>, setpoint: &Setpoint<T>, gains: &Gains<T>) -> OuterRefs<T> {
    let gamma_dd = -gains.d_gamma * state.qd[2] - gains.k_gamma * (state.q[2] - setpoint.gamma_des);
    let q_r_dd =
        -gains.d_r.component_mul(&state.arm_dot()) - gains.k_r.component_mul(&(state.arm() - &setpoint.q_r_des));
    OuterRefs { gamma_dd, q_r_dd }
}

/// Stacks `(gamma_dd, q_m_dd, q_r_dd)` into the output reference `y_dd`.
pub fn output_reference<T: Real>(outer: &OuterRefs<T>, q_m_dd: &Vector2<T>) -> DVector<T> {
    let n = outer.q_r_dd.len();
    let mut y = DVector::zeros(3 + n);
    y[0] = outer.gamma_dd;
    y[1] = q_m_dd.x;
    y[2] = q_m_dd.y;
    y.rows_mut(3, n).copy_from(&outer.q_r_dd);
    y
}

fn inverse_coupling<T: Real>(m_phim: &Matrix2<T>) -> Result<Matrix2<T>> {
    let sv = m_phim.singular_values();
    let cond = if sv.min() > T::zero() {
        sv.max() / sv.min()
    } else {
        T::max_value().unwrap_or(T::zero())
    };
    match m_phim.try_inverse() {
        Some(inv) if cond <= T::lit(MAX_COUPLING_COND) => Ok(inv),
        _ => Err(Error::SingularCoupling { cond: cond.as_f64() }),
    }
}

/// Balancing law that places roll/pitch on `M_phiphi phi_dd + (D_phi + C_phiphi) phi_d + K_phi phi = 0`:
/// `q_m_dd = M_phim^-1 (D_phi phi_d + K_phi phi - C_phim q_m_d - g_phi)`.
pub fn qm_ref_motivating<T: Real>(state: &State<T>, terms: &DynamicsTerms<T>, gains: &Gains<T>) -> Result<Vector2<T>> {
    let inv = inverse_coupling(&terms.m_phim())?;
    let rhs = gains.d_phi.component_mul(&state.phi_dot()) + gains.k_phi.component_mul(&state.phi())
        - terms.c_phim() * state.movers_dot()
        - terms.g_phi();
    Ok(inv * rhs)
}

/// CoM-only law `q_m_dd = Mbar_cm^T (D_c xc_d + K_c xc)`.
pub fn qm_ref_remark1<T: Real>(transformed: &TransformedTerms<T>, gains: &Gains<T>) -> Vector2<T> {
    com_feedback(transformed, gains)
}

fn com_feedback<T: Real>(transformed: &TransformedTerms<T>, gains: &Gains<T>) -> Vector2<T> {
    let xc = transformed.com;
    let xc_dot = transformed.com_dot();
    transformed.m_cm().transpose() * (gains.d_c.component_mul(&xc_dot) + gains.k_c.component_mul(&xc))
}

/// Balancing law with an added mover PD term toward `q_m_star`.
pub fn qm_ref_remark2<T: Real>(
    state: &State<T>,
    terms: &DynamicsTerms<T>,
    setpoint: &Setpoint<T>,
    gains: &Gains<T>,
) -> Result<Vector2<T>> {
    Ok(qm_ref_motivating(state, terms, gains)? + mover_pd(state, setpoint, gains))
}

fn mover_pd<T: Real>(state: &State<T>, setpoint: &Setpoint<T>, gains: &Gains<T>) -> Vector2<T> {
    -gains.d_m.component_mul(&state.movers_dot()) - gains.k_m.component_mul(&(state.movers() - setpoint.q_m_star))
}

/// `q_m_dd = D (Mbar_cm^T (D_c xc_d + K_c xc) - D_m q_m_d - K_m (q_m - q_m_star))`.
pub fn qm_ref_proposed<T: Real>(
    state: &State<T>,
    transformed: &TransformedTerms<T>,
    setpoint: &Setpoint<T>,
    gains: &Gains<T>,
) -> Vector2<T> {
    gains
        .d
        .component_mul(&(com_feedback(transformed, gains) + mover_pd(state, setpoint, gains)))
}

/// `u = (B^T M^-1 B)^-1 (B^T M^-1 (C qd + g) + y_dd_ref)`.
pub fn pfl_input_standard<T: Real>(terms: &DynamicsTerms<T>, y_ref: &DVector<T>) -> Result<ControlInput<T>> {
    let b = ActuationMap::new(terms.dof());
    let m_inv = terms.mass_inverse()?;
    let a = b.select_block(&m_inv);
    let rhs = b.select(&(&m_inv * terms.bias())) + y_ref;
    solve_input(a, rhs, terms)
}

/// Same linearization written in CoM coordinates:
/// `u = (B^T T^-1 Mbar^-1 T^-T B)^-1 (B^T T^-1 (Mbar^-1 (Cbar qbar_d + gbar) + Tdot qd) + y_dd_ref)`.
pub fn pfl_input_transformed<T: Real>(
    transformed: &TransformedTerms<T>,
    y_ref: &DVector<T>,
) -> Result<ControlInput<T>> {
    let n = transformed.original.dof();
    let b = ActuationMap::new(n);
    let mbar_inv = match transformed.mass.clone().cholesky() {
        Some(c) => c.inverse(),
        None => transformed
            .mass
            .clone()
            .try_inverse()
            .ok_or(Error::IllConditionedTransform { cond: f64::INFINITY })?,
    };
    let t_inv = &transformed.transform_inv;
    let full = t_inv * &mbar_inv * t_inv.transpose();
    let a = b.select_block(&full);
    let inner = &mbar_inv * (&transformed.coriolis * transformed.qbar_dot() + &transformed.gravity)
        + &transformed.transform_dot * &transformed.original.qd;
    let rhs = b.select(&(t_inv * inner)) + y_ref;
    solve_input(a, rhs, &transformed.original)
}

fn solve_input<T: Real>(a: DMatrix<T>, rhs: DVector<T>, terms: &DynamicsTerms<T>) -> Result<ControlInput<T>> {
    let u = match a.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => a.lu().solve(&rhs).ok_or(Error::SingularMass { cond: f64::INFINITY })?,
    };
    debug_assert_eq!(u.len(), terms.dof() - 2);
    Ok(ControlInput::from_vector(&u))
}

/// Result of the static mover-balance solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Equilibrium<T: Real> {
    pub q_m: Vector2<T>,
    /// `|g_phi|` at the returned point.
    pub residual: T,
    pub iterations: usize,
}

pub const EQUILIBRIUM_TOL: f64 = 1e-10;
const EQUILIBRIUM_MAX_ITER: usize = 100;

/// `g_phi` with the platform level, yaw at zero and the arm at `q_r`.
pub fn balance_residual<T: Real>(model: &SystemModel<T>, q_m: &Vector2<T>, q_r: &DVector<T>) -> Result<Vector2<T>> {
    let mut q = DVector::zeros(model.dof());
    q[MOVER_OFFSET] = q_m.x;
    q[MOVER_OFFSET + 1] = q_m.y;
    q.rows_mut(ARM_OFFSET, model.link_count()).copy_from(q_r);
    let g = crate::dynamics::gravity_vector(model, &q)?;
    Ok(Vector2::new(g[0], g[1]))
}

/// Mover position that cancels the static gravity torque on roll and pitch.
///
/// Damped Newton from the origin with a finite-difference Jacobian; the step
/// is halved until the residual decreases. Iterates are kept inside the
/// mover travel box, so a balance that needs more travel than the rails
/// offer ends in `NoConvergence`.
pub fn solve_equilibrium_qm<T: Real>(model: &SystemModel<T>, q_r_des: &DVector<T>) -> Result<Equilibrium<T>> {
    if q_r_des.len() != model.link_count() {
        return Err(Error::InvalidScenario(format!(
            "q_r_des has {} entries for {} links",
            q_r_des.len(),
            model.link_count()
        )));
    }
    let limit = model.movers.travel_limit;
    let clamp = |v: Vector2<T>| v.map(|x| x.max(-limit).min(limit));
    let tol = T::lit(EQUILIBRIUM_TOL);
    let h = T::lit(1e-6);

    let mut x = Vector2::zeros();
    let mut r = balance_residual(model, &x, q_r_des)?;
    for iter in 0..EQUILIBRIUM_MAX_ITER {
        if r.norm() < tol {
            return Ok(Equilibrium {
                q_m: x,
                residual: r.norm(),
                iterations: iter,
            });
        }
        let mut jac = Matrix2::zeros();
        for j in 0..2 {
            let mut xp = x;
            xp[j] += h;
            let mut xm = x;
            xm[j] -= h;
            let col = (balance_residual(model, &xp, q_r_des)? - balance_residual(model, &xm, q_r_des)?) / (h + h);
            jac.set_column(j, &col);
        }
        let Some(step) = jac.try_inverse().map(|inv| -(inv * r)) else {
            break;
        };
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let trial = clamp(x + step * alpha);
            let r_trial = balance_residual(model, &trial, q_r_des)?;
            if r_trial.norm() < r.norm() {
                x = trial;
                r = r_trial;
                accepted = true;
                break;
            }
            alpha *= T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    if r.norm() < tol {
        return Ok(Equilibrium {
            q_m: x,
            residual: r.norm(),
            iterations: EQUILIBRIUM_MAX_ITER,
        });
    }
    Err(Error::NoConvergence {
        iterations: EQUILIBRIUM_MAX_ITER,
        residual: r.norm().as_f64(),
    })
}

/// Which mover reference law closes the loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// No input at all.
    Free,
    /// PFL holding every actuated coordinate at zero acceleration.
    Hold,
    Motivating,
    Remark1,
    Remark2,
    Proposed,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::Hold => "hold",
            Self::Motivating => "motivating",
            Self::Remark1 => "remark1",
            Self::Remark2 => "remark2",
            Self::Proposed => "proposed",
        }
    }
}

/// Values logged alongside the input at each evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics<T: Real> {
    pub q_m_dd_ref: Vector2<T>,
    pub com: Vector2<T>,
    pub com_dot: Vector2<T>,
}

impl<T: Real> Default for Diagnostics<T> {
    fn default() -> Self {
        Self {
            q_m_dd_ref: Vector2::zeros(),
            com: Vector2::zeros(),
            com_dot: Vector2::zeros(),
        }
    }
}

/// A complete closed-loop control law.
#[derive(Clone, Debug)]
pub struct Controller<T: Real> {
    pub kind: ControllerKind,
    pub gains: Gains<T>,
    pub setpoint: Setpoint<T>,
}

impl<T: Real> Controller<T> {
    pub fn new(kind: ControllerKind, gains: Gains<T>, setpoint: Setpoint<T>) -> Self {
        if kind == ControllerKind::Proposed && !gains.satisfies_gain_ratio() {
            warn!("proposed law gains violate min(D_c, K_c) >= {GAIN_RATIO} max(D_m, K_m)");
        }
        Self { kind, gains, setpoint }
    }

    /// Input for `state` given its already-evaluated dynamics terms.
    pub fn compute(
        &self,
        model: &SystemModel<T>,
        state: &State<T>,
        terms: DynamicsTerms<T>,
    ) -> Result<(ControlInput<T>, Diagnostics<T>)> {
        let n = model.link_count();
        let outer = outer_refs(state, &self.setpoint, &self.gains);
        match self.kind {
            ControllerKind::Free => Ok((ControlInput::zeros(n), Diagnostics::default())),
            ControllerKind::Hold => {
                let y = DVector::zeros(n + 3);
                Ok((pfl_input_standard(&terms, &y)?, Diagnostics::default()))
            }
            ControllerKind::Motivating | ControllerKind::Remark2 => {
                let q_m_dd = if self.kind == ControllerKind::Motivating {
                    qm_ref_motivating(state, &terms, &self.gains)?
                } else {
                    qm_ref_remark2(state, &terms, &self.setpoint, &self.gains)?
                };
                let u = pfl_input_standard(&terms, &output_reference(&outer, &q_m_dd))?;
                let diag = Diagnostics {
                    q_m_dd_ref: q_m_dd,
                    ..Default::default()
                };
                Ok((u, diag))
            }
            ControllerKind::Remark1 | ControllerKind::Proposed => {
                let tt = crate::dynamics::transform(model, terms)?;
                let q_m_dd = if self.kind == ControllerKind::Remark1 {
                    qm_ref_remark1(&tt, &self.gains)
                } else {
                    qm_ref_proposed(state, &tt, &self.setpoint, &self.gains)
                };
                let u = pfl_input_transformed(&tt, &output_reference(&outer, &q_m_dd))?;
                let diag = Diagnostics {
                    q_m_dd_ref: q_m_dd,
                    com: tt.com,
                    com_dot: tt.com_dot(),
                };
                Ok((u, diag))
            }
        }
    }
}

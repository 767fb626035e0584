//! Equation-of-motion terms `M(q) qdd + C(q, qd) qd + g(q) = tau`, the
//! change of coordinates to whole-system CoM coordinates, and forward
//! dynamics.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{Body, Kinematics, SystemModel, MOVER_OFFSET};
use crate::scalar::Real;

/// Central-difference step for `dM/dq` and `dT/dt`.
pub const FD_STEP: f64 = 1e-6;
/// Largest accepted condition number of the CoM transform.
pub const MAX_TRANSFORM_COND: f64 = 1e8;

/// `B = [0_{2x(N-2)}; I_{N-2}]`: the roll and pitch rows carry no input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActuationMap {
    dof: usize,
}

impl ActuationMap {
    pub fn new(dof: usize) -> Self {
        assert!(dof > 2);
        Self { dof }
    }

    pub fn inputs(&self) -> usize {
        self.dof - 2
    }

    pub fn matrix<T: Real>(&self) -> DMatrix<T> {
        DMatrix::from_fn(
            self.dof,
            self.inputs(),
            |i, j| {
                if i == j + 2 {
                    T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    /// `B u`.
    pub fn apply<T: Real>(&self, u: &DVector<T>) -> DVector<T> {
        let mut tau = DVector::zeros(self.dof);
        tau.rows_mut(2, self.inputs()).copy_from(u);
        tau
    }

    /// `B^T v`.
    pub fn select<T: Real>(&self, v: &DVector<T>) -> DVector<T> {
        v.rows(2, self.inputs()).into_owned()
    }

    /// `B^T A B`.
    pub fn select_block<T: Real>(&self, a: &DMatrix<T>) -> DMatrix<T> {
        let k = self.inputs();
        a.view((2, 2), (k, k)).into_owned()
    }
}

/// `M`, `C` and `g` evaluated at one state.
#[derive(Clone, Debug)]
pub struct DynamicsTerms<T: Real> {
    pub q: DVector<T>,
    pub qd: DVector<T>,
    pub mass: DMatrix<T>,
    pub coriolis: DMatrix<T>,
    pub gravity: DVector<T>,
}

pub fn mass_matrix<T: Real>(model: &SystemModel<T>, q: &DVector<T>) -> Result<DMatrix<T>> {
    let kin = model.kinematics(q)?;
    Ok(mass_matrix_from(model, &kin))
}

fn mass_matrix_from<T: Real>(model: &SystemModel<T>, kin: &Kinematics<T>) -> DMatrix<T> {
    let dof = model.dof();
    let mut mass = DMatrix::zeros(dof, dof);
    for (body, m, p) in model.mass_points(kin) {
        let jv = kin.linear_jacobian(body, &p, dof);
        mass.gemm_tr(m, &jv, &jv, T::one());
        let inertia = match body {
            Body::Platform => Some(&model.platform.inertia),
            Body::LinkCom(k) => Some(&model.links[k - 1].inertia),
            _ => None,
        };
        if let Some(inertia) = inertia {
            let world = kin.frame(body).1.rotate_inertia(inertia);
            let jw = kin.angular_jacobian(body, dof);
            mass.gemm_tr(T::one(), &jw, &(world * &jw), T::one());
        }
    }
    mass
}

/// `g = dV/dq` with `V = sum m_i g0 z_i`.
pub fn gravity_vector<T: Real>(model: &SystemModel<T>, q: &DVector<T>) -> Result<DVector<T>> {
    let kin = model.kinematics(q)?;
    Ok(gravity_vector_from(model, &kin))
}

fn gravity_vector_from<T: Real>(model: &SystemModel<T>, kin: &Kinematics<T>) -> DVector<T> {
    let dof = model.dof();
    let mut g = DVector::zeros(dof);
    for (body, m, p) in model.mass_points(kin) {
        let jv = kin.linear_jacobian(body, &p, dof);
        g += jv.row(2).transpose() * (m * model.gravity);
    }
    g
}

/// `dM/dq_i` for every coordinate, by central differences.
///
/// A yaw change rotates the whole system about the vertical through the
/// pivot, which leaves the kinetic energy unchanged, so `dM/dyaw = 0`.
fn mass_matrix_partials<T: Real>(model: &SystemModel<T>, q: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
    let h = T::lit(FD_STEP);
    let two_h = h + h;
    let mut qp = q.clone();
    (0..q.len())
        .map(|i| {
            if i == 2 {
                return Ok(DMatrix::zeros(q.len(), q.len()));
            }
            qp[i] = q[i] + h;
            let plus = mass_matrix(model, &qp)?;
            qp[i] = q[i] - h;
            let minus = mass_matrix(model, &qp)?;
            qp[i] = q[i];
            Ok((plus - minus) / two_h)
        })
        .collect()
}

/// Christoffel-symbol Coriolis matrix,
/// `C_jk = 1/2 sum_i (dM_jk/dq_i + dM_ji/dq_k - dM_ik/dq_j) qd_i`.
pub fn coriolis_matrix<T: Real>(model: &SystemModel<T>, q: &DVector<T>, qd: &DVector<T>) -> Result<DMatrix<T>> {
    let partials = mass_matrix_partials(model, q)?;
    Ok(coriolis_from_partials(&partials, qd))
}

fn coriolis_from_partials<T: Real>(partials: &[DMatrix<T>], qd: &DVector<T>) -> DMatrix<T> {
    let n = qd.len();
    let mut mdot = DMatrix::zeros(n, n);
    // Column k of `a` is dM/dq_k * qd.
    let mut a = DMatrix::zeros(n, n);
    for (k, dm) in partials.iter().enumerate() {
        mdot.zip_apply(dm, |x, d| *x += d * qd[k]);
        a.column_mut(k).gemv(T::one(), dm, qd, T::zero());
    }
    mdot += &a;
    mdot -= a.transpose();
    mdot * T::lit(0.5)
}

impl<T: Real> DynamicsTerms<T> {
    pub fn evaluate(model: &SystemModel<T>, q: &DVector<T>, qd: &DVector<T>) -> Result<Self> {
        let kin = model.kinematics(q)?;
        let mass = mass_matrix_from(model, &kin);
        let gravity = gravity_vector_from(model, &kin);
        let coriolis = coriolis_matrix(model, q, qd)?;
        Ok(Self {
            q: q.clone(),
            qd: qd.clone(),
            mass,
            coriolis,
            gravity,
        })
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    /// `C qd + g`.
    pub fn bias(&self) -> DVector<T> {
        &self.coriolis * &self.qd + &self.gravity
    }

    /// `qdd = M^-1 (tau - C qd - g)`.
    pub fn forward(&self, tau: &DVector<T>) -> Result<DVector<T>> {
        let rhs = tau - self.bias();
        self.solve_mass(&rhs)
    }

    pub fn solve_mass(&self, rhs: &DVector<T>) -> Result<DVector<T>> {
        match self.mass.clone().cholesky() {
            Some(chol) => Ok(chol.solve(rhs)),
            None => Err(Error::SingularMass {
                cond: condition_number(&self.mass),
            }),
        }
    }

    pub fn mass_inverse(&self) -> Result<DMatrix<T>> {
        match self.mass.clone().cholesky() {
            Some(chol) => Ok(chol.inverse()),
            None => Err(Error::SingularMass {
                cond: condition_number(&self.mass),
            }),
        }
    }

    pub fn kinetic_energy(&self) -> T {
        self.qd.dot(&(&self.mass * &self.qd)) * T::lit(0.5)
    }

    pub fn m_phiphi(&self) -> Matrix2<T> {
        self.mass.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn m_phim(&self) -> Matrix2<T> {
        self.mass.fixed_view::<2, 2>(0, MOVER_OFFSET).into_owned()
    }

    pub fn c_phiphi(&self) -> Matrix2<T> {
        self.coriolis.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn c_phim(&self) -> Matrix2<T> {
        self.coriolis.fixed_view::<2, 2>(0, MOVER_OFFSET).into_owned()
    }

    pub fn g_phi(&self) -> Vector2<T> {
        self.gravity.fixed_rows::<2>(0).into_owned()
    }
}

pub fn forward_dynamics<T: Real>(
    model: &SystemModel<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
) -> Result<DVector<T>> {
    DynamicsTerms::evaluate(model, q, qd)?.forward(tau)
}

pub fn kinetic_energy<T: Real>(model: &SystemModel<T>, q: &DVector<T>, qd: &DVector<T>) -> Result<T> {
    let mass = mass_matrix(model, q)?;
    Ok(qd.dot(&(mass * qd)) * T::lit(0.5))
}

/// Dynamics re-expressed in `qbar = (x_c, yaw, q_m, q_r)` with
/// `qbar_dot = T qd`, `Mbar = T^-T M T^-1`,
/// `Cbar = T^-T (C - M T^-1 Tdot) T^-1` and `gbar = T^-T g`.
#[derive(Clone, Debug)]
pub struct TransformedTerms<T: Real> {
    pub original: DynamicsTerms<T>,
    /// World x, y of the overall CoM.
    pub com: Vector2<T>,
    pub transform: DMatrix<T>,
    pub transform_inv: DMatrix<T>,
    pub transform_dot: DMatrix<T>,
    pub mass: DMatrix<T>,
    pub coriolis: DMatrix<T>,
    pub gravity: DVector<T>,
    /// 1-norm condition number of `T`.
    pub cond: T,
}

/// `T` for the given CoM Jacobian: CoM rows on top, unit selectors for yaw,
/// movers and joints below.
fn transform_matrix<T: Real>(com_jac: &nalgebra::Matrix2xX<T>) -> DMatrix<T> {
    let n = com_jac.ncols();
    let mut t = DMatrix::zeros(n, n);
    t.view_mut((0, 0), (2, n)).copy_from(com_jac);
    for i in 2..n {
        t[(i, i)] = T::one();
    }
    t
}

/// Inverse of a transform with the block structure `[[A, B], [0, I]]`.
fn transform_inverse<T: Real>(t: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = t.nrows();
    let a: Matrix2<T> = t.fixed_view::<2, 2>(0, 0).into_owned();
    let a_inv = a.try_inverse()?;
    let mut inv = DMatrix::zeros(n, n);
    inv.fixed_view_mut::<2, 2>(0, 0).copy_from(&a_inv);
    let b = t.view((0, 2), (2, n - 2));
    inv.view_mut((0, 2), (2, n - 2)).copy_from(&(-(a_inv * b)));
    for i in 2..n {
        inv[(i, i)] = T::one();
    }
    Some(inv)
}

fn one_norm<T: Real>(m: &DMatrix<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, x| acc + x.abs()))
        .fold(T::zero(), |acc, x| acc.max(x))
}

fn condition_number<T: Real>(m: &DMatrix<T>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= T::zero() {
        f64::INFINITY
    } else {
        (max / min).as_f64()
    }
}

pub fn transform<T: Real>(model: &SystemModel<T>, terms: DynamicsTerms<T>) -> Result<TransformedTerms<T>> {
    let q = &terms.q;
    let qd = &terms.qd;
    let kin = model.kinematics(q)?;
    let com3 = model.com_from(&kin);
    let t = transform_matrix(&model.com_jacobian_from(&kin));
    let t_inv = transform_inverse(&t).ok_or(Error::IllConditionedTransform { cond: f64::INFINITY })?;
    let cond = one_norm(&t) * one_norm(&t_inv);
    if !(cond <= T::lit(MAX_TRANSFORM_COND)) {
        return Err(Error::IllConditionedTransform { cond: cond.as_f64() });
    }

    let h = T::lit(FD_STEP);
    let t_plus = transform_matrix(&model.com_jacobian(&(q + qd * h))?);
    let t_minus = transform_matrix(&model.com_jacobian(&(q - qd * h))?);
    let t_dot = (t_plus - t_minus) / (h + h);

    let t_inv_t = t_inv.transpose();
    let mass = &t_inv_t * &terms.mass * &t_inv;
    let coriolis = &t_inv_t * (&terms.coriolis - &terms.mass * &t_inv * &t_dot) * &t_inv;
    let gravity = &t_inv_t * &terms.gravity;

    Ok(TransformedTerms {
        original: terms,
        com: Vector2::new(com3.x, com3.y),
        transform: t,
        transform_inv: t_inv,
        transform_dot: t_dot,
        mass,
        coriolis,
        gravity,
        cond,
    })
}

impl<T: Real> TransformedTerms<T> {
    pub fn evaluate(model: &SystemModel<T>, q: &DVector<T>, qd: &DVector<T>) -> Result<Self> {
        transform(model, DynamicsTerms::evaluate(model, q, qd)?)
    }

    /// `qbar_dot = T qd`.
    pub fn qbar_dot(&self) -> DVector<T> {
        &self.transform * &self.original.qd
    }

    pub fn com_dot(&self) -> Vector2<T> {
        self.qbar_dot().fixed_rows::<2>(0).into_owned()
    }

    /// Transformed accelerations `qbar_dd` for a generalized force `tau`,
    /// solved from `Mbar qbar_dd + Cbar qbar_dot + gbar = T^-T tau`.
    pub fn forward(&self, tau: &DVector<T>) -> Result<DVector<T>> {
        let rhs = self.transform_inv.transpose() * tau - &self.coriolis * self.qbar_dot() - &self.gravity;
        match self.mass.clone().lu().solve(&rhs) {
            Some(x) => Ok(x),
            None => Err(Error::SingularMass {
                cond: condition_number(&self.mass),
            }),
        }
    }

    pub fn m_cc(&self) -> Matrix2<T> {
        self.mass.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn m_cm(&self) -> Matrix2<T> {
        self.mass.fixed_view::<2, 2>(0, MOVER_OFFSET).into_owned()
    }

    pub fn c_cc(&self) -> Matrix2<T> {
        self.coriolis.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn c_cm(&self) -> Matrix2<T> {
        self.coriolis.fixed_view::<2, 2>(0, MOVER_OFFSET).into_owned()
    }

    pub fn g_c(&self) -> Vector2<T> {
        self.gravity.fixed_rows::<2>(0).into_owned()
    }
}

//! Physical description of the suspended platform, the two rail-mounted
//! movers and the serial manipulator, plus kinematics.
//!
//! Generalized coordinates are ordered
//! `[roll, pitch, yaw, mover1, mover2, joint1 .. jointN]`. The platform hangs
//! from a fixed pivot at the world origin on a rigid massless rod of length
//! `wire_length` along the platform's local -z axis. Mover 1 slides along the
//! platform x axis and mover 2 along the platform y axis, both at
//! `rail_height` above the platform center.

use nalgebra::{DVector, Matrix2xX, Matrix3, Matrix3xX, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spatial::{self, EulerRateMap, Rotation3};

/// Index of the first mover coordinate.
pub const MOVER_OFFSET: usize = 3;
/// Index of the first manipulator joint coordinate.
pub const ARM_OFFSET: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct PlatformParams<T: Real> {
    #[serde(alias = "mass_kg")]
    pub mass: T,
    /// About the platform CoM, platform frame.
    pub inertia: Matrix3<T>,
    #[serde(alias = "wire_length_m")]
    pub wire_length: T,
    /// Offset of the mover rails above the platform center along platform z.
    #[serde(alias = "rail_height_m")]
    pub rail_height: T,
    /// Manipulator base in the platform frame.
    pub mount_offset: Vector3<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct MoverParams<T: Real> {
    /// Mass of each mover.
    #[serde(alias = "mass_kg")]
    pub mass: T,
    /// Symmetric soft travel limit; exceeding it is logged, never enforced.
    #[serde(alias = "travel_limit_m")]
    pub travel_limit: T,
}

/// One revolute link of the manipulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SerialLink<T: Real> {
    /// Joint origin in the parent link frame (the mount frame for link 1).
    pub parent_offset: Vector3<T>,
    /// Unit joint axis in the parent frame.
    pub axis: Vector3<T>,
    pub mass: T,
    pub com_offset: Vector3<T>,
    /// About the link CoM, link frame.
    pub inertia: Matrix3<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SystemModel<T: Real> {
    pub platform: PlatformParams<T>,
    pub movers: MoverParams<T>,
    pub links: Vec<SerialLink<T>>,
    /// Gravitational acceleration magnitude, acting along world -z.
    #[serde(alias = "gravity_mps2")]
    pub gravity: T,
}

/// A rigid body (or frame) of the system. Movers and links are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Body {
    Platform,
    Mover(usize),
    /// Joint frame of link `k`.
    Link(usize),
    /// CoM frame of link `k`.
    LinkCom(usize),
}

/// Time, generalized positions and velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct State<T: Real> {
    pub t: T,
    #[serde(with = "crate::scalar::dvector_seq")]
    pub q: DVector<T>,
    #[serde(with = "crate::scalar::dvector_seq")]
    pub qd: DVector<T>,
}

impl<T: Real> State<T> {
    pub fn new(t: T, q: DVector<T>, qd: DVector<T>) -> Self {
        Self { t, q, qd }
    }

    pub fn at_rest(dof: usize) -> Self {
        Self::new(T::zero(), DVector::zeros(dof), DVector::zeros(dof))
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn phi(&self) -> Vector2<T> {
        Vector2::new(self.q[0], self.q[1])
    }

    pub fn phi_dot(&self) -> Vector2<T> {
        Vector2::new(self.qd[0], self.qd[1])
    }

    pub fn movers(&self) -> Vector2<T> {
        Vector2::new(self.q[MOVER_OFFSET], self.q[MOVER_OFFSET + 1])
    }

    pub fn movers_dot(&self) -> Vector2<T> {
        Vector2::new(self.qd[MOVER_OFFSET], self.qd[MOVER_OFFSET + 1])
    }

    pub fn arm(&self) -> DVector<T> {
        self.q.rows(ARM_OFFSET, self.q.len() - ARM_OFFSET).into_owned()
    }

    pub fn arm_dot(&self) -> DVector<T> {
        self.qd.rows(ARM_OFFSET, self.qd.len() - ARM_OFFSET).into_owned()
    }

    /// Checks dimensions, finiteness and the gimbal-lock guard.
    pub fn validate(&self, dof: usize) -> Result<()> {
        if self.q.len() != dof || self.qd.len() != dof {
            return Err(Error::InvalidScenario(format!(
                "state has {} positions and {} velocities, model has {dof} DoF",
                self.q.len(),
                self.qd.len()
            )));
        }
        if !self.t.is_finite() || self.q.iter().any(|x| !x.is_finite()) || self.qd.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidScenario("non-finite state entry".into()));
        }
        spatial::check_pitch(self.q[1])
    }
}

/// World-frame kinematic quantities at one configuration.
#[derive(Clone, Debug)]
pub struct Kinematics<T: Real> {
    pub rotation: Rotation3<T>,
    pub rate_map: EulerRateMap<T>,
    pub platform_center: Vector3<T>,
    pub movers: [Vector3<T>; 2],
    pub mover_axes: [Vector3<T>; 2],
    /// Per link: joint origin, world joint axis, link rotation, link CoM.
    pub joint_origins: Vec<Vector3<T>>,
    pub joint_axes: Vec<Vector3<T>>,
    pub link_rotations: Vec<Rotation3<T>>,
    pub link_coms: Vec<Vector3<T>>,
}

impl<T: Real> SystemModel<T> {
    /// Number of manipulator links.
    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Total generalized coordinates, `6 + n`.
    pub fn dof(&self) -> usize {
        ARM_OFFSET + self.links.len()
    }

    pub fn arm_mass(&self) -> T {
        self.links.iter().fold(T::zero(), |acc, l| acc + l.mass)
    }

    pub fn total_mass(&self) -> T {
        self.platform.mass + self.movers.mass * T::lit(2.0) + self.arm_mass()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let p = &self.platform;
        if !(p.mass > T::zero()) {
            return bad(format!("platform mass must be positive, got {}", p.mass));
        }
        if !(p.wire_length > T::zero()) {
            return bad(format!("wire length must be positive, got {}", p.wire_length));
        }
        if !is_spd(&p.inertia, false) {
            return bad("platform inertia must be symmetric positive definite".into());
        }
        if !(self.movers.mass > T::zero()) {
            return bad(format!("mover mass must be positive, got {}", self.movers.mass));
        }
        if !(self.movers.travel_limit > T::zero()) {
            return bad("mover travel limit must be positive".into());
        }
        if !(self.gravity.is_finite()) {
            return bad("gravity must be finite".into());
        }
        for (k, link) in self.links.iter().enumerate() {
            if !(link.mass >= T::zero()) {
                return bad(format!("link {} mass must be non-negative", k + 1));
            }
            if (link.axis.norm() - T::one()).abs() > T::lit(1e-12) {
                return bad(format!("link {} joint axis is not unit length", k + 1));
            }
            if !is_spd(&link.inertia, true) {
                return bad(format!("link {} inertia must be symmetric PSD", k + 1));
            }
        }
        Ok(())
    }

    pub fn kinematics(&self, q: &DVector<T>) -> Result<Kinematics<T>> {
        debug_assert_eq!(q.len(), self.dof());
        let rotation = spatial::rot_rpy(q[0], q[1], q[2]);
        let rate_map = spatial::euler_rate_map(q[0], q[1], q[2])?;
        let p = &self.platform;
        let zero = T::zero();
        let platform_center = rotation.apply(&Vector3::new(zero, zero, -p.wire_length));
        let mover_axes = [rotation.apply(&Vector3::x()), rotation.apply(&Vector3::y())];
        let movers = [
            platform_center + rotation.apply(&Vector3::new(q[MOVER_OFFSET], zero, p.rail_height)),
            platform_center + rotation.apply(&Vector3::new(zero, q[MOVER_OFFSET + 1], p.rail_height)),
        ];

        let n = self.links.len();
        let mut joint_origins = Vec::with_capacity(n);
        let mut joint_axes = Vec::with_capacity(n);
        let mut link_rotations = Vec::with_capacity(n);
        let mut link_coms = Vec::with_capacity(n);
        let mut frame_origin = platform_center + rotation.apply(&p.mount_offset);
        let mut frame_rot = rotation;
        for (k, link) in self.links.iter().enumerate() {
            let origin = frame_origin + frame_rot.apply(&link.parent_offset);
            let axis = frame_rot.apply(&link.axis);
            let rot = frame_rot.compose(&Rotation3::about_axis(&link.axis, q[ARM_OFFSET + k]));
            link_coms.push(origin + rot.apply(&link.com_offset));
            joint_origins.push(origin);
            joint_axes.push(axis);
            link_rotations.push(rot);
            frame_origin = origin;
            frame_rot = rot;
        }

        Ok(Kinematics {
            rotation,
            rate_map,
            platform_center,
            movers,
            mover_axes,
            joint_origins,
            joint_axes,
            link_rotations,
            link_coms,
        })
    }

    fn check_body(&self, body: Body) -> Result<()> {
        let ok = match body {
            Body::Platform => true,
            Body::Mover(i) => i == 1 || i == 2,
            Body::Link(k) | Body::LinkCom(k) => k >= 1 && k <= self.links.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidBody(format!("{body:?}")))
        }
    }

    /// World position of the body frame origin.
    pub fn body_position(&self, q: &DVector<T>, body: Body) -> Result<Vector3<T>> {
        self.check_body(body)?;
        let kin = self.kinematics(q)?;
        Ok(kin.frame(body).0)
    }

    /// `J` with world velocity of `local_point` (body frame) equal to `J * qd`.
    pub fn point_jacobian(&self, q: &DVector<T>, body: Body, local_point: &Vector3<T>) -> Result<Matrix3xX<T>> {
        self.check_body(body)?;
        let kin = self.kinematics(q)?;
        let (origin, rot) = kin.frame(body);
        let point = origin + rot.apply(local_point);
        Ok(kin.linear_jacobian(body, &point, self.dof()))
    }

    /// World x, y of the overall center of mass.
    pub fn com_xy(&self, q: &DVector<T>) -> Result<Vector2<T>> {
        let kin = self.kinematics(q)?;
        let c = self.com_from(&kin);
        Ok(Vector2::new(c.x, c.y))
    }

    pub fn com_jacobian(&self, q: &DVector<T>) -> Result<Matrix2xX<T>> {
        let kin = self.kinematics(q)?;
        Ok(self.com_jacobian_from(&kin))
    }

    /// `(body, mass, CoM point)` for every mass-carrying body.
    pub(crate) fn mass_points(&self, kin: &Kinematics<T>) -> Vec<(Body, T, Vector3<T>)> {
        let mut out = Vec::with_capacity(3 + self.links.len());
        out.push((Body::Platform, self.platform.mass, kin.platform_center));
        out.push((Body::Mover(1), self.movers.mass, kin.movers[0]));
        out.push((Body::Mover(2), self.movers.mass, kin.movers[1]));
        for (k, link) in self.links.iter().enumerate() {
            out.push((Body::LinkCom(k + 1), link.mass, kin.link_coms[k]));
        }
        out
    }

    pub(crate) fn com_from(&self, kin: &Kinematics<T>) -> Vector3<T> {
        let mut moment = Vector3::zeros();
        for (_, m, p) in self.mass_points(kin) {
            moment += p * m;
        }
        moment / self.total_mass()
    }

    pub(crate) fn com_jacobian_from(&self, kin: &Kinematics<T>) -> Matrix2xX<T> {
        let dof = self.dof();
        let mut jac = Matrix3xX::zeros(dof);
        for (body, m, p) in self.mass_points(kin) {
            jac += kin.linear_jacobian(body, &p, dof) * m;
        }
        jac /= self.total_mass();
        jac.fixed_rows::<2>(0).into_owned()
    }

    /// Gravitational potential energy, zero at the pivot height.
    pub fn potential_energy(&self, q: &DVector<T>) -> Result<T> {
        let kin = self.kinematics(q)?;
        Ok(self
            .mass_points(&kin)
            .into_iter()
            .fold(T::zero(), |acc, (_, m, p)| acc + m * self.gravity * p.z))
    }
}

impl<T: Real> Kinematics<T> {
    /// Origin and orientation of a body frame.
    pub fn frame(&self, body: Body) -> (Vector3<T>, Rotation3<T>) {
        match body {
            Body::Platform => (self.platform_center, self.rotation),
            Body::Mover(i) => (self.movers[i - 1], self.rotation),
            Body::Link(k) => (self.joint_origins[k - 1], self.link_rotations[k - 1]),
            Body::LinkCom(k) => (self.link_coms[k - 1], self.link_rotations[k - 1]),
        }
    }

    /// Linear velocity Jacobian of a world point rigidly attached to `body`.
    pub fn linear_jacobian(&self, body: Body, point: &Vector3<T>, dof: usize) -> Matrix3xX<T> {
        let mut jac = Matrix3xX::zeros(dof);
        // The whole system rotates rigidly about the pivot with the platform.
        for j in 0..3 {
            jac.set_column(j, &self.rate_map.column(j).cross(point));
        }
        match body {
            Body::Platform => {}
            Body::Mover(i) => jac.set_column(MOVER_OFFSET + i - 1, &self.mover_axes[i - 1]),
            Body::Link(k) | Body::LinkCom(k) => {
                for j in 0..k {
                    let col = self.joint_axes[j].cross(&(point - self.joint_origins[j]));
                    jac.set_column(ARM_OFFSET + j, &col);
                }
            }
        }
        jac
    }

    /// Angular velocity Jacobian of `body`. Movers translate only.
    pub fn angular_jacobian(&self, body: Body, dof: usize) -> Matrix3xX<T> {
        let mut jac = Matrix3xX::zeros(dof);
        for j in 0..3 {
            jac.set_column(j, &self.rate_map.column(j));
        }
        if let Body::Link(k) | Body::LinkCom(k) = body {
            for j in 0..k {
                jac.set_column(ARM_OFFSET + j, &self.joint_axes[j]);
            }
        }
        jac
    }
}

fn is_spd<T: Real>(m: &Matrix3<T>, semi: bool) -> bool {
    let scale = m.amax().max(T::one());
    if (m - m.transpose()).amax() > T::lit(1e-12) * scale {
        return false;
    }
    let eig = m.symmetric_eigen().eigenvalues;
    let tol = T::lit(1e-12) * scale;
    eig.iter().all(|&e| if semi { e >= -tol } else { e > T::zero() })
}

fn rod_link<T: Real>(parent_offset: [f64; 3], axis: [f64; 3], mass: f64, length: f64) -> SerialLink<T> {
    let radius = 0.04;
    let transverse = mass * (length * length / 12.0 + radius * radius / 4.0);
    let axial = mass * radius * radius / 2.0;
    SerialLink {
        parent_offset: Vector3::new(
            T::lit(parent_offset[0]),
            T::lit(parent_offset[1]),
            T::lit(parent_offset[2]),
        ),
        axis: Vector3::new(T::lit(axis[0]), T::lit(axis[1]), T::lit(axis[2])),
        mass: T::lit(mass),
        com_offset: Vector3::new(T::zero(), T::zero(), T::lit(length / 2.0)),
        inertia: Matrix3::from_diagonal(&Vector3::new(T::lit(transverse), T::lit(transverse), T::lit(axial))),
    }
}

const X: [f64; 3] = [1.0, 0.0, 0.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];
const Z: [f64; 3] = [0.0, 0.0, 1.0];

/// Reference preset: 10 m suspension, 10 kg platform,
/// two 10 kg movers and a 15 kg arm. `n = 3` is the desk-scale default,
/// `n = 7` the full-size arm. The arm points straight up at `q_r = 0`.
pub fn preset_paper<T: Real>(n: usize) -> Result<SystemModel<T>> {
    let chain: Vec<([f64; 3], f64, f64)> = match n {
        3 => vec![(Z, 7.0, 0.4), (Y, 5.0, 0.3), (Y, 3.0, 0.2)],
        7 => vec![
            (Z, 3.0, 0.2),
            (X, 3.0, 0.2),
            (Z, 2.5, 0.2),
            (X, 2.5, 0.2),
            (Z, 2.0, 0.2),
            (X, 1.0, 0.1),
            (Z, 1.0, 0.1),
        ],
        other => return Err(Error::UnsupportedPreset(other)),
    };
    let mut links = Vec::with_capacity(n);
    let mut prev_len = 0.0;
    for (axis, mass, len) in chain {
        links.push(rod_link([0.0, 0.0, prev_len], axis, mass, len));
        prev_len = len;
    }

    // Uniform 1.0 x 1.0 x 0.1 m box.
    let (m, a, b, c) = (10.0, 1.0, 1.0, 0.1);
    let inertia = Matrix3::from_diagonal(&Vector3::new(
        T::lit(m * (b * b + c * c) / 12.0),
        T::lit(m * (a * a + c * c) / 12.0),
        T::lit(m * (a * a + b * b) / 12.0),
    ));
    Ok(SystemModel {
        platform: PlatformParams {
            mass: T::lit(m),
            inertia,
            wire_length: T::lit(10.0),
            rail_height: T::lit(0.05),
            mount_offset: Vector3::new(T::zero(), T::zero(), T::lit(0.05)),
        },
        movers: MoverParams {
            mass: T::lit(10.0),
            travel_limit: T::lit(0.8),
        },
        links,
        gravity: T::lit(9.81),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::rot_rpy;
    use crate::testutil::{desk, random_q};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn presets_have_expected_mass_bookkeeping() {
        let seven = preset_paper::<f64>(7).unwrap();
        assert_eq!(seven.dof(), 12);
        assert!((seven.arm_mass() - 15.0).abs() < 1e-12);
        let three = desk();
        assert_eq!(three.dof(), 8);
        assert!((three.arm_mass() - 15.0).abs() < 1e-12);
        assert!((three.total_mass() - 45.0).abs() < 1e-12);
        assert!(matches!(preset_paper::<f64>(2), Err(Error::UnsupportedPreset(2))));
        three.validate().unwrap();
        seven.validate().unwrap();
    }

    #[test]
    fn zero_configuration_positions() {
        let m = desk();
        let q = DVector::zeros(m.dof());
        let p = m.body_position(&q, Body::Platform).unwrap();
        assert!((p - Vector3::new(0.0, 0.0, -10.0)).norm() < 1e-14);
        let mut q = q;
        q[3] = 0.4;
        let p = m.body_position(&q, Body::Mover(1)).unwrap();
        assert!((p - Vector3::new(0.4, 0.0, -10.0 + 0.05)).norm() < 1e-14);
        assert!(matches!(
            m.body_position(&q, Body::Mover(3)),
            Err(Error::InvalidBody(_))
        ));
        assert!(m.body_position(&q, Body::LinkCom(4)).is_err());
    }

    /// Independent homogeneous-transform chain for the last link CoM.
    #[test]
    fn link_position_matches_transform_chain() {
        let m = desk();
        let mut q = DVector::zeros(m.dof());
        q[1] = 0.3;
        q[0] = -0.1;
        q[2] = 0.7;
        q[5] = 0.4;
        q[6] = -0.9;
        q[7] = 1.3;
        let to_h = |r: &Matrix3<f64>, t: Vector3<f64>| {
            let mut h = nalgebra::Matrix4::identity();
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
            h.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
            h
        };
        let mut h = to_h(rot_rpy(q[0], q[1], q[2]).matrix(), Vector3::zeros())
            * to_h(&Matrix3::identity(), Vector3::new(0.0, 0.0, -10.0))
            * to_h(&Matrix3::identity(), m.platform.mount_offset);
        for (k, link) in m.links.iter().enumerate() {
            let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(link.axis), q[5 + k]);
            h = h * to_h(&Matrix3::identity(), link.parent_offset) * to_h(r.matrix(), Vector3::zeros());
        }
        let expected = (h * nalgebra::Vector4::new(0.0, 0.0, 0.1, 1.0)).xyz();
        let got = m.body_position(&q, Body::LinkCom(3)).unwrap();
        assert!((got - expected).norm() < 1e-12);
    }

    #[test]
    fn jacobian_simple_columns() {
        let m = desk();
        let q = DVector::zeros(m.dof());
        let j = m.point_jacobian(&q, Body::Platform, &Vector3::zeros()).unwrap();
        assert!((j.column(0) - Vector3::new(0.0, 10.0, 0.0)).norm() < 1e-12);
        let j = m.point_jacobian(&q, Body::Mover(1), &Vector3::zeros()).unwrap();
        assert_eq!(j.column(3).into_owned(), Vector3::x());
        assert_eq!(j.column(4).into_owned(), Vector3::zeros());
        for c in ARM_OFFSET..m.dof() {
            assert_eq!(j.column(c).into_owned(), Vector3::zeros());
        }
        let j = m.point_jacobian(&q, Body::LinkCom(1), &Vector3::zeros()).unwrap();
        for c in [3, 4, 6, 7] {
            assert_eq!(j.column(c).into_owned(), Vector3::zeros());
        }
    }

    #[test]
    fn point_jacobian_matches_finite_differences() {
        let m = preset_paper::<f64>(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bodies: Vec<Body> = [Body::Platform, Body::Mover(1), Body::Mover(2)]
            .into_iter()
            .chain((1..=7).flat_map(|k| [Body::Link(k), Body::LinkCom(k)]))
            .collect();
        let h = 1e-7;
        for _ in 0..100 {
            let q = random_q(&m, &mut rng);
            for &body in &bodies {
                let local = Vector3::new(0.1, -0.05, 0.02);
                let jac = m.point_jacobian(&q, body, &local).unwrap();
                for c in 0..m.dof() {
                    let pos = |q: &DVector<f64>| {
                        let kin = m.kinematics(q).unwrap();
                        let (o, r) = kin.frame(body);
                        o + r.apply(&local)
                    };
                    let mut qp = q.clone();
                    qp[c] += h;
                    let mut qm = q.clone();
                    qm[c] -= h;
                    let fd = (pos(&qp) - pos(&qm)) / (2.0 * h);
                    assert!(
                        (fd - jac.column(c)).amax() < 1e-6,
                        "{body:?} column {c}: {fd} vs {}",
                        jac.column(c)
                    );
                }
            }
        }
    }

    #[test]
    fn com_symmetric_and_offset() {
        let m = desk();
        let mut q = DVector::zeros(m.dof());
        assert!(m.com_xy(&q).unwrap().norm() < 1e-14);
        q[3] = 0.4;
        let c = m.com_xy(&q).unwrap();
        assert!((c.x - 0.4 * 10.0 / 45.0).abs() < 1e-14);
        assert!(c.y.abs() < 1e-14);
    }

    #[test]
    fn com_jacobian_matches_fd_and_weighted_sum() {
        let m = desk();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-7;
        for _ in 0..100 {
            let q = random_q(&m, &mut rng);
            let jac = m.com_jacobian(&q).unwrap();
            for c in 0..m.dof() {
                let mut qp = q.clone();
                qp[c] += h;
                let mut qm = q.clone();
                qm[c] -= h;
                let fd = (m.com_xy(&qp).unwrap() - m.com_xy(&qm).unwrap()) / (2.0 * h);
                assert!((fd - jac.column(c)).amax() < 1e-6);
            }
            let mut weighted = Matrix3xX::zeros(m.dof());
            let bodies = [Body::Platform, Body::Mover(1), Body::Mover(2)]
                .into_iter()
                .chain((1..=3).map(Body::LinkCom));
            for body in bodies {
                let mass = match body {
                    Body::Platform => m.platform.mass,
                    Body::Mover(_) => m.movers.mass,
                    Body::LinkCom(k) => m.links[k - 1].mass,
                    Body::Link(_) => unreachable!(),
                };
                weighted += m.point_jacobian(&q, body, &Vector3::zeros()).unwrap() * mass;
            }
            weighted /= m.total_mass();
            assert!((weighted.fixed_rows::<2>(0) - &jac).amax() < 1e-10);
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut m = desk();
        m.platform.mass = -1.0;
        assert!(matches!(m.validate(), Err(Error::InvalidModel(_))));
        let mut m = desk();
        m.links[1].axis = Vector3::new(0.0, 2.0, 0.0);
        assert!(m.validate().is_err());
        let mut m = desk();
        m.platform.inertia[(0, 1)] = 0.3;
        assert!(m.validate().is_err());
    }

    #[test]
    fn model_json_roundtrip() {
        let m = preset_paper::<f64>(7).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"wire_length\""));
        let back: SystemModel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        let aliased = text.replace("\"wire_length\"", "\"wire_length_m\"");
        let back: SystemModel<f64> = serde_json::from_str(&aliased).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn state_guard() {
        let m = desk();
        let mut s = State::<f64>::at_rest(m.dof());
        s.validate(m.dof()).unwrap();
        s.q[1] = std::f64::consts::FRAC_PI_2 - 1e-7;
        assert!(s.validate(m.dof()).is_err());
        assert!(State::<f64>::at_rest(4).validate(m.dof()).is_err());
    }
}

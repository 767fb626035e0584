//! Random in-envelope states shared by the unit tests.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::model::{preset_paper, SystemModel, ARM_OFFSET};

pub fn desk() -> SystemModel<f64> {
    preset_paper(3).unwrap()
}

/// Attitude within +-0.5 rad, movers within the travel limit, any yaw and joints.
pub fn random_q(model: &SystemModel<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut q = DVector::zeros(model.dof());
    q[0] = rng.gen_range(-0.5..0.5);
    q[1] = rng.gen_range(-0.5..0.5);
    q[2] = rng.gen_range(-3.0..3.0);
    q[3] = rng.gen_range(-0.8..0.8);
    q[4] = rng.gen_range(-0.8..0.8);
    for i in ARM_OFFSET..model.dof() {
        q[i] = rng.gen_range(-2.0..2.0);
    }
    q
}

pub fn random_qd(model: &SystemModel<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(model.dof(), |_, _| rng.gen_range(-1.0..1.0))
}

pub fn dense<R: nalgebra::Dim, S>(m: &nalgebra::Matrix<f64, R, nalgebra::Dyn, S>) -> nalgebra::DMatrix<f64>
where
    S: nalgebra::storage::Storage<f64, R, nalgebra::Dyn>,
{
    nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

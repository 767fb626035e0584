//! Invariant suite behind `pendusim verify`.

use nalgebra::{DVector, Vector2};
use pendusim_core::control::{
    pfl_input_standard, pfl_input_transformed, solve_equilibrium_qm, Controller, ControllerKind, Gains, Setpoint,
};
use pendusim_core::dynamics::{coriolis_matrix, mass_matrix, transform, DynamicsTerms, TransformedTerms};
use pendusim_core::model::{State, SystemModel, ARM_OFFSET, MOVER_OFFSET};
use pendusim_core::sim::{total_energy, Simulator};
use pendusim_core::{ActuationMap, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STATES: usize = 200;

/// One named property with its worst observed value.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
    pub pass: bool,
}

fn row(name: &'static str, worst: f64, tol: f64) -> Row {
    Row {
        name,
        worst,
        tol,
        pass: worst < tol,
    }
}

fn random_state(model: &SystemModel<f64>, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let travel = model.movers.travel_limit.min(0.8);
    let n = model.dof();
    let mut q = DVector::zeros(n);
    q[0] = rng.gen_range(-0.5..0.5);
    q[1] = rng.gen_range(-0.5..0.5);
    q[2] = rng.gen_range(-3.0..3.0);
    q[MOVER_OFFSET] = rng.gen_range(-travel..travel);
    q[MOVER_OFFSET + 1] = rng.gen_range(-travel..travel);
    for i in ARM_OFFSET..n {
        q[i] = rng.gen_range(-2.0..2.0);
    }
    let qd = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    (q, qd)
}

/// Runs every property on `model` at [`STATES`] seed-derived states.
pub fn suite(model: &SystemModel<f64>, q_r_des: &DVector<f64>, seed: u64) -> Result<Vec<Row>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = ActuationMap::new(model.dof());
    let inputs = b.inputs();
    let mut asym = 0.0f64;
    let mut not_pd = 0.0f64;
    let mut grav = 0.0f64;
    let mut skew = 0.0f64;
    let mut tt_err = 0.0f64;
    let mut track = 0.0f64;
    let mut agree = 0.0f64;

    for _ in 0..STATES {
        let (q, qd) = random_state(model, &mut rng);
        let terms = DynamicsTerms::evaluate(model, &q, &qd)?;
        let m = &terms.mass;
        asym = asym.max((m - m.transpose()).amax() / m.amax());
        if m.clone().cholesky().is_none() {
            not_pd += 1.0;
        }

        let h = 1e-3;
        for i in 0..model.dof() {
            let v = |k: f64| -> Result<f64> {
                let mut qk = q.clone();
                qk[i] += k * h;
                model.potential_energy(&qk)
            };
            let fd = (v(-2.0)? - 8.0 * v(-1.0)? + 8.0 * v(1.0)? - v(2.0)?) / (12.0 * h);
            grav = grav.max((fd - terms.gravity[i]).abs() / fd.abs().max(1.0));
        }

        let e = 1e-6;
        let mdot = (mass_matrix(model, &(&q + &qd * e))? - mass_matrix(model, &(&q - &qd * e))?) / (2.0 * e);
        let n = mdot - coriolis_matrix(model, &q, &qd)? * 2.0;
        skew = skew.max(((&n + n.transpose()) * 0.5).norm() / (1.0 + qd.norm_squared()));

        let tau = b.apply(&DVector::from_fn(inputs, |_, _| rng.gen_range(-20.0..20.0)));
        let tt: TransformedTerms<f64> = transform(model, terms.clone())?;
        let direct = &tt.transform * terms.forward(&tau)? + &tt.transform_dot * &qd;
        tt_err = tt_err.max((tt.forward(&tau)? - &direct).amax() / direct.amax().max(1.0));

        let y = DVector::from_fn(inputs, |_, _| rng.gen_range(-5.0..5.0));
        let u_std = pfl_input_standard(&terms, &y)?;
        let u_tr = pfl_input_transformed(&tt, &y)?;
        for u in [&u_std, &u_tr] {
            track = track.max((b.select(&terms.forward(&u.generalized_force())?) - &y).norm());
        }
        agree = agree.max((u_std.to_vector() - u_tr.to_vector()).norm());
    }

    let alpha0 = rng.gen_range(0.05..0.15);
    let drift = free_swing_drift(model, alpha0)?;
    let residual = solve_equilibrium_qm(model, q_r_des).map_or(f64::INFINITY, |eq| eq.residual);

    Ok(vec![
        row("mass_symmetric", asym, 1e-10),
        row("mass_positive_definite", not_pd, 0.5),
        row("gravity_gradient", grav, 1e-6),
        row("skew_symmetry", skew, 1e-5),
        row("transform_consistency", tt_err, 1e-6),
        row("pfl_exactness", track, 1e-7),
        row("pfl_agreement", agree, 1e-6),
        row("energy_conservation", drift, 1e-6),
        row("equilibrium_residual", residual, 1e-10),
    ])
}

/// Largest energy excursion over a 5 s unactuated swing, relative to the swing energy.
fn free_swing_drift(model: &SystemModel<f64>, alpha0: f64) -> Result<f64> {
    let n = model.link_count();
    let setpoint = Setpoint {
        gamma_des: 0.0,
        q_r_des: DVector::zeros(n),
        q_m_star: Vector2::zeros(),
    };
    let sim = Simulator::new(
        model.clone(),
        Controller::new(ControllerKind::Free, Gains::default_for(n), setpoint),
    );
    let mut q = DVector::zeros(model.dof());
    q[0] = alpha0;
    let mut state = State::new(0.0, q, DVector::zeros(model.dof()));
    let e0 = total_energy(model, &state)?;
    let swing = e0 - model.potential_energy(&DVector::zeros(model.dof()))?;
    let mut worst = 0.0f64;
    for _ in 0..5000 {
        state = sim.step(&state, 1e-3)?.state;
        worst = worst.max((total_energy(model, &state)? - e0).abs());
    }
    Ok(worst / swing)
}

pub fn table(rows: &[Row]) -> String {
    let mut s = format!("{:<24} {:>11} {:>9}  result\n", "property", "worst", "tol");
    for r in rows {
        s.push_str(&format!(
            "{:<24} {:>11.3e} {:>9.0e}  {}\n",
            r.name,
            r.worst,
            r.tol,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    s
}

//! Fixed-step ODE machinery: the fractional SIR simulator, neural ODE
//! training through an unrolled RK4 solver, and symbolic readout.

mod node;
mod readout;

use std::io::Write;

pub use node::{
    fsir_chain, node_loss, node_train, node_trajectory, true_fsir_chain, NodeArch, NodeConfig, NodeModel, OUTPUT_INIT_SCALE,
};
pub use readout::{readout_equations, Equation, Term};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Initial state `(S₀, I₀, R₀)`.
pub const FSIR_U0: [f64; 3] = [100.0, 0.01, 0.0];
pub const FSIR_T_END: f64 = 200.0;
pub const FSIR_OBSERVATIONS: usize = 40;
/// Internal solver steps for the ground-truth trajectory.
pub const FSIR_STEPS: usize = 2000;
pub const FSIR_VARS: [&str; 3] = ["S", "I", "R"];

/// Rates and exponents of the fractional SIR model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsirParams {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl Default for FsirParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.06,
            eta: 0.01,
            gamma: 0.5,
            kappa: 0.5,
        }
    }
}

/// Right-hand side with transmission rate `r = β I^γ S^κ`.
pub fn fsir_rhs(p: &FsirParams, u: [f64; 3]) -> Result<[f64; 3]> {
    let [s, i, r_pop] = u;
    if s < 0.0 || i < 0.0 || s.is_nan() || i.is_nan() {
        return Err(Error::Domain { s, i });
    }
    let r = p.beta * i.powf(p.gamma) * s.powf(p.kappa);
    Ok([-r + p.eta * r_pop, r - p.alpha * i, p.alpha * i - p.eta * r_pop])
}

/// States observed at equally spaced times after `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub u0: Vec<f64>,
    pub times: Vec<f64>,
    /// `times.len() × dim`
    pub states: Tensor,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    /// Long-form CSV with a time column followed by one column per variable.
    pub fn write_csv(&self, names: &[&str], w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t"];
        header.extend_from_slice(names);
        out.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(self.states.row_slice(k).iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Classical RK4 with `steps` fixed steps over `t_span`, recording
/// `observations` equally spaced states (the last one at `t_span.1`).
pub fn rk4_integrate<F>(
    mut rhs: F,
    u0: &[f64],
    t_span: (f64, f64),
    steps: usize,
    observations: usize,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if steps == 0 || observations == 0 || !steps.is_multiple_of(observations) {
        return Err(Error::invalid(
            "solver grid",
            format!("{steps} steps cannot be split into {observations} observations"),
        ));
    }
    let every = steps / observations;
    let h = (t_span.1 - t_span.0) / steps as f64;
    let dim = u0.len();
    let mut u = u0.to_vec();
    let mut tmp = vec![0.0; dim];
    let mut times = Vec::with_capacity(observations);
    let mut states = Vec::with_capacity(observations * dim);

    for step in 0..steps {
        let t = t_span.0 + step as f64 * h;
        let k1 = rhs(t, &u)?;
        axpy(&mut tmp, &u, 0.5 * h, &k1);
        let k2 = rhs(t + 0.5 * h, &tmp)?;
        axpy(&mut tmp, &u, 0.5 * h, &k2);
        let k3 = rhs(t + 0.5 * h, &tmp)?;
        axpy(&mut tmp, &u, h, &k3);
        let k4 = rhs(t + h, &tmp)?;
        for d in 0..dim {
            u[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
        if (step + 1) % every == 0 {
            times.push(t_span.0 + (step + 1) as f64 * h);
            states.extend_from_slice(&u);
        }
    }
    Ok(Trajectory {
        t0: t_span.0,
        u0: u0.to_vec(),
        states: Tensor::new(times.len(), dim, states)?,
        times,
    })
}

fn axpy(out: &mut [f64], u: &[f64], a: f64, k: &[f64]) {
    for ((o, &ui), &ki) in out.iter_mut().zip(u).zip(k) {
        *o = ui + a * ki;
    }
}

/// Ground-truth fSIR trajectory from [`FSIR_U0`] over `(0, 200)`.
pub fn fsir_truth(p: &FsirParams, steps: usize) -> Result<Trajectory> {
    rk4_integrate(
        |_, u| fsir_rhs(p, [u[0], u[1], u[2]]).map(|d| d.to_vec()),
        &FSIR_U0,
        (0.0, FSIR_T_END),
        steps,
        FSIR_OBSERVATIONS,
    )
}

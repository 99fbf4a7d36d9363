//! Time-domain simulation and Monte Carlo estimates of the H2 norm.
//!
//! Two readings of the squared norm are estimated by sampling:
//!
//! * expected output energy `∫ E[yᵀy] dt` of the free response from random
//!   initial states with covariance `BBᵀ` ([`monte_carlo_h2`]);
//! * stationary output variance `E[yᵀy]` under unit white noise entering
//!   through `B` ([`white_noise_variance`]).
//!
//! Free responses are integrated with classical fourth-order Runge–Kutta at a
//! fixed step. Because the systems are linear, one RK4 step is the matrix
//! `M = I + hA + (hA)²/2 + (hA)³/6 + (hA)⁴/24`; long runs advance whole blocks
//! of `s` steps with `M^s` and accumulate the trapezoid sum of `yᵀy` over the
//! block with the precomputed Gramian `Σ_{j<s} (M^j)ᵀ HᵀH M^j`. The result is
//! the step-by-step RK4 trajectory, only sampled more coarsely.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::matrix::norm_sq;
use crate::numerics::eigvals_sym;
use crate::rng::NormalStream;
use crate::systems::{ModelKind, StateLabel, StateSpaceModel};
use crate::{Error, Matrix, Result};

/// Largest admissible step, as a fraction of `1/‖A‖_∞`.
pub const STEP_LIMIT: f64 = 0.5;
/// Default step, as a fraction of `1/‖A‖_∞`.
pub const DEFAULT_STEP: f64 = 0.1;
/// Free-response runs stop once `‖x‖² < TAIL_TOL · ‖x_0‖²`.
pub const TAIL_TOL: f64 = 1e-8;
/// Free-response runs give up after this many slowest time constants.
pub const T_MAX_TIME_CONSTANTS: f64 = 50.0;
/// Fraction of a white-noise run discarded as warm-up.
pub const WARMUP_FRACTION: f64 = 0.2;
/// Number of batches for batch-means standard errors.
pub const BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: ModelKind,
    pub state_labels: Vec<StateLabel>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Integration step.
    pub dt: f64,
    /// Integration steps between stored samples.
    pub record_every: usize,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// `x_0 = B ξ`, `ξ` standard normal: covariance `BBᵀ`.
    BbStar,
    /// Standard normal voltages, zero integrator states.
    PaperFig2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    InitialCondition,
    WhiteNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub mode: McMode,
    pub seed: u64,
    /// Longest horizon actually integrated.
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub converged: bool,
}

/// `0.5 / ‖A‖_∞`; the row-sum norm bounds the spectral radius.
pub fn max_step(model: &StateSpaceModel) -> f64 {
    STEP_LIMIT / model.a.inf_norm()
}

pub fn default_step(model: &StateSpaceModel) -> f64 {
    DEFAULT_STEP / model.a.inf_norm()
}

fn check_step(model: &StateSpaceModel, dt: f64) -> Result<()> {
    let limit = max_step(model);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidHorizon("dt must be positive"));
    }
    if dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    Ok(())
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final.is_finite() && t_final >= dt * (1.0 - 1e-12)) {
        return Err(Error::InvalidHorizon("T must be finite and at least dt"));
    }
    Ok(libm::ceil(t_final / dt - 1e-9).max(1.0) as usize)
}

/// One classical RK4 step of `x' = A x`.
fn rk4_step(a: &Matrix, x: &mut [f64], dt: f64, scratch: &mut [Vec<f64>; 5]) {
    let [k1, k2, k3, k4, tmp] = scratch;
    a.matvec_into(x, k1).expect("dims");
    for (t, (xi, k)) in tmp.iter_mut().zip(x.iter().zip(k1.iter())) {
        *t = xi + 0.5 * dt * k;
    }
    a.matvec_into(tmp, k2).expect("dims");
    for (t, (xi, k)) in tmp.iter_mut().zip(x.iter().zip(k2.iter())) {
        *t = xi + 0.5 * dt * k;
    }
    a.matvec_into(tmp, k3).expect("dims");
    for (t, (xi, k)) in tmp.iter_mut().zip(x.iter().zip(k3.iter())) {
        *t = xi + dt * k;
    }
    a.matvec_into(tmp, k4).expect("dims");
    for i in 0..x.len() {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

fn check_x0(model: &StateSpaceModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.state_dim() {
        return Err(Error::DimensionMismatch("initial state length"));
    }
    Ok(())
}

/// Free response `x' = A x` from `x0`, every RK4 step recorded.
pub fn simulate(model: &StateSpaceModel, x0: &[f64], t_final: f64, dt: f64) -> Result<Trajectory> {
    check_x0(model, x0)?;
    check_step(model, dt)?;
    let steps = step_count(t_final, dt)?;
    let dim = model.state_dim();
    let mut scratch = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x.clone());
    for k in 1..=steps {
        rk4_step(&model.a, &mut x, dt, &mut scratch);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(k));
        }
        times.push(k as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory {
        kind: model.kind,
        state_labels: model.state_labels.clone(),
        times,
        states,
        dt,
        record_every: 1,
        seed: None,
    })
}

/// Free response recorded every `record_every` RK4 steps, advancing with the
/// block propagator.
pub fn simulate_sampled(
    model: &StateSpaceModel,
    x0: &[f64],
    t_final: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    check_x0(model, x0)?;
    check_step(model, dt)?;
    if record_every == 0 {
        return Err(Error::InvalidHorizon("record interval must be at least one step"));
    }
    let steps = step_count(t_final, dt)?;
    let samples = steps.div_ceil(record_every);
    let block = matrix_power(&rk4_matrix(&model.a, dt), record_every);
    let mut x = x0.to_vec();
    let mut times = Vec::with_capacity(samples + 1);
    let mut states = Vec::with_capacity(samples + 1);
    times.push(0.0);
    states.push(x.clone());
    for k in 1..=samples {
        x = block.matvec(&x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(k * record_every));
        }
        times.push((k * record_every) as f64 * dt);
        states.push(x.clone());
    }
    Ok(Trajectory {
        kind: model.kind,
        state_labels: model.state_labels.clone(),
        times,
        states,
        dt,
        record_every,
        seed: None,
    })
}

/// The one-step RK4 propagator of `x' = A x`.
pub fn rk4_matrix(a: &Matrix, dt: f64) -> Matrix {
    let n = a.rows();
    let ha = a.scaled(dt);
    let eye = Matrix::identity(n);
    let mut m = eye.clone();
    for d in [4.0, 3.0, 2.0, 1.0] {
        m = eye.add(&ha.matmul(&m).expect("square").scaled(1.0 / d)).expect("square");
    }
    m
}

fn matrix_power(m: &Matrix, mut e: usize) -> Matrix {
    let mut result = Matrix::identity(m.rows());
    let mut base = m.clone();
    while e > 0 {
        if e & 1 == 1 {
            result = result.matmul(&base).expect("square");
        }
        e >>= 1;
        if e > 0 {
            base = base.matmul(&base).expect("square");
        }
    }
    result
}

/// Slowest decay time constant `1/|α|`, `α` the spectral abscissa of `A`.
///
/// Symmetric `A` uses its largest eigenvalue directly. Otherwise the spectral
/// radius of the RK4 propagator is estimated from `‖M^(2^j)‖^(1/2^j)` by
/// repeated squaring.
pub fn slowest_time_constant(model: &StateSpaceModel, dt: f64) -> Result<f64> {
    if model.a.is_symmetric(1e-12) {
        let lmax = eigvals_sym(&model.a)?.last().copied().unwrap_or(-1.0);
        if lmax >= 0.0 {
            return Err(Error::NotHurwitz);
        }
        return Ok(-1.0 / lmax);
    }
    let mut p = rk4_matrix(&model.a, dt);
    let mut log_scale = 0.0;
    let mut exponent = 1.0;
    for _ in 0..48 {
        p = p.matmul(&p)?;
        exponent *= 2.0;
        let norm = p.frobenius_norm();
        if !(norm > 0.0 && norm.is_finite()) {
            break;
        }
        log_scale = 2.0 * log_scale + libm::log(norm);
        p = p.scaled(1.0 / norm);
    }
    let log_rho = log_scale / exponent;
    if log_rho >= 0.0 {
        return Err(Error::NotHurwitz);
    }
    Ok(-dt / log_rho)
}

/// Initial state drawn from stream `index` of `seed`.
pub fn sample_initial_indexed(model: &StateSpaceModel, mode: InitialMode, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = NormalStream::new(seed, index);
    match mode {
        InitialMode::BbStar => {
            let mut xi = vec![0.0; model.b.cols()];
            rng.fill_normal(&mut xi);
            model.b.matvec(&xi).expect("dims")
        }
        InitialMode::PaperFig2 => model
            .state_labels
            .iter()
            .map(|l| match l {
                StateLabel::Voltage(_) => rng.next_normal(),
                StateLabel::Integrator(_) => 0.0,
            })
            .collect(),
    }
}

pub fn sample_initial(model: &StateSpaceModel, mode: InitialMode, seed: u64) -> Vec<f64> {
    sample_initial_indexed(model, mode, seed, 0)
}

/// Block propagator: `M^s` and `Σ_{j<s} (M^j)ᵀ Q M^j`.
struct BlockPropagator {
    block: Matrix,
    gram: Matrix,
    steps: usize,
}

impl BlockPropagator {
    /// `s = 2^p` steps per block.
    fn new(step: &Matrix, q: &Matrix, p: u32) -> Result<Self> {
        let mut block = step.clone();
        let mut gram = q.clone();
        for _ in 0..p {
            let mg = gram.matmul(&block)?;
            gram = gram.add(&block.tr_matmul(&mg)?)?;
            block = block.matmul(&block)?;
        }
        Ok(BlockPropagator { block, gram, steps: 1 << p })
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, libm::sqrt(var / m))
}

/// `∫_0^∞ yᵀy dt` averaged over `samples` initial states with covariance
/// `BBᵀ`. Each sample is integrated for at least `t_final` and then extended
/// until its state has decayed below [`TAIL_TOL`] of its initial energy; a
/// sample still above that after [`T_MAX_TIME_CONSTANTS`] slowest time
/// constants turns the result into [`Error::TruncationNotConverged`].
pub fn monte_carlo_h2(model: &StateSpaceModel, samples: usize, t_final: f64, dt: f64, seed: u64) -> Result<McEstimate> {
    monte_carlo_h2_with(model, samples, t_final, dt, seed, InitialMode::BbStar)
}

pub fn monte_carlo_h2_with(
    model: &StateSpaceModel,
    samples: usize,
    t_final: f64,
    dt: f64,
    seed: u64,
    mode: InitialMode,
) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::TooFewSamples(samples));
    }
    check_step(model, dt)?;
    let min_steps = step_count(t_final, dt)?;
    let tau = slowest_time_constant(model, dt)?;
    let t_max = t_final.max(T_MAX_TIME_CONSTANTS * tau);
    let max_steps = libm::ceil(t_max / dt) as usize;

    let q = model.h.tr_matmul(&model.h)?;
    // at least 32 blocks over the requested horizon
    let p = (usize::BITS - 1).saturating_sub((min_steps / 32).max(1).leading_zeros());
    let prop = BlockPropagator::new(&rk4_matrix(&model.a, dt), &q, p)?;

    let mut values = Vec::with_capacity(samples);
    let mut longest = 0usize;
    let mut converged = true;
    for i in 0..samples {
        let mut x = sample_initial_indexed(model, mode, seed, i as u64);
        let f0 = q.quadratic_form(&x);
        let e0 = norm_sq(&x);
        let mut sum = 0.0;
        let mut steps = 0usize;
        loop {
            sum += prop.gram.quadratic_form(&x);
            x = prop.block.matvec(&x)?;
            steps += prop.steps;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState(steps));
            }
            if steps >= min_steps && norm_sq(&x) <= TAIL_TOL * e0 {
                break;
            }
            if steps >= max_steps {
                converged = false;
                break;
            }
        }
        longest = longest.max(steps);
        values.push(dt * (sum + 0.5 * (q.quadratic_form(&x) - f0)));
    }
    let (mean, stderr) = mean_and_stderr(&values);
    let estimate = McEstimate {
        mean,
        stderr,
        samples,
        mode: McMode::InitialCondition,
        seed,
        t_final: longest as f64 * dt,
        dt,
        converged,
    };
    if !converged {
        return Err(Error::TruncationNotConverged { t_max, estimate: Box::new(estimate) });
    }
    Ok(estimate)
}

/// Time average of `yᵀy` along one Euler–Maruyama path of
/// `dx = A x dt + B dW` started at rest, after discarding
/// [`WARMUP_FRACTION`] of the run. The standard error comes from
/// [`BATCHES`] batch means.
pub fn white_noise_variance(model: &StateSpaceModel, t_final: f64, dt: f64, seed: u64) -> Result<McEstimate> {
    check_step(model, dt)?;
    let steps = step_count(t_final, dt)?;
    let warmup = libm::ceil(WARMUP_FRACTION * steps as f64) as usize;
    let kept = steps - warmup;
    if kept < BATCHES {
        return Err(Error::InvalidHorizon("too few steps after warm-up for batch means"));
    }
    let dim = model.state_dim();
    let noise_dim = model.b.cols();
    let sqrt_dt = libm::sqrt(dt);
    let mut rng = NormalStream::new(seed, 0);
    let mut x = vec![0.0; dim];
    let mut ax = vec![0.0; dim];
    let mut xi = vec![0.0; noise_dim];
    let mut bxi = vec![0.0; dim];
    let mut y = vec![0.0; model.h.rows()];
    let batch_len = kept / BATCHES;
    let mut batch_sums = [0.0; BATCHES];
    for k in 1..=steps {
        model.a.matvec_into(&x, &mut ax)?;
        rng.fill_normal(&mut xi);
        model.b.matvec_into(&xi, &mut bxi)?;
        for i in 0..dim {
            x[i] += dt * ax[i] + sqrt_dt * bxi[i];
        }
        if k > warmup {
            let batch = ((k - warmup - 1) / batch_len).min(BATCHES - 1);
            model.h.matvec_into(&x, &mut y)?;
            batch_sums[batch] += norm_sq(&y);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState(steps));
    }
    let batch_means: Vec<f64> = batch_sums
        .iter()
        .enumerate()
        .map(|(b, s)| {
            let len = if b == BATCHES - 1 { kept - batch_len * (BATCHES - 1) } else { batch_len };
            s / len as f64
        })
        .collect();
    let total: f64 = batch_sums.iter().sum();
    let (_, stderr) = mean_and_stderr(&batch_means);
    Ok(McEstimate {
        mean: total / kept as f64,
        stderr,
        samples: BATCHES,
        mode: McMode::WhiteNoise,
        seed,
        t_final: steps as f64 * dt,
        dt,
        converged: true,
    })
}

//! Stochastic mode dynamics driven by the open-cavity noise inputs.
//!
//! The interior amplitudes obey the linear Langevin equation
//!
//! ```text
//!   da = −i H a dt + B dξ,      H = diag(ω_λ) − iπΣ,
//! ```
//!
//! where each column of the noise factor B belongs to one input channel
//! (scattering, absorbing, or amplifying) scaled by its occupation, and dξ
//! collects independent complex Wiener increments. The second moment
//! C(t) = ⟨a a†⟩ − ⟨a⟩⟨a⟩† then follows the closed equation
//! dC/dt = −i(H C − C H†) + Q with diffusion Q = B B†, whose fixed point is
//! the Lyapunov steady state H C − C H† = −i Q.

use ndarray::{s, Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{self, eigen_biorthogonal, expm, lyapunov_steady, psd_factor};
use crate::ode;
use crate::resonances::CLUSTER_TOL;
use crate::rmt::derive_stream_seed;
use crate::spectrum::CavityModel;
use crate::{C64, Error, Result};

/// Thermal occupations of the scattering-channel inputs (one per channel).
/// Absorbing and amplifying occupations live on the model's media couplings.
#[derive(Debug, Clone)]
pub struct ChannelOccupation(pub Array1<f64>);

impl ChannelOccupation {
    pub fn vacuum(n_channels: usize) -> Self {
        ChannelOccupation(Array1::zeros(n_channels))
    }

    pub fn uniform(n_channels: usize, n_bar: f64) -> Self {
        ChannelOccupation(Array1::from_elem(n_channels, n_bar))
    }
}

fn check_langevin_model(model: &CavityModel, occ: &ChannelOccupation) -> Result<()> {
    if !model.coupling.is_markov() {
        return Err(Error::InvalidCoupling(
            "Langevin dynamics needs frequency-independent couplings".into(),
        ));
    }
    if occ.0.len() != model.n_channels() {
        return Err(Error::Dimension(format!(
            "{} channel occupations for {} channels",
            occ.0.len(),
            model.n_channels()
        )));
    }
    if occ.0.iter().any(|&n| !n.is_finite() || n < 0.0) {
        return Err(Error::InvalidCoupling(
            "channel occupations must be finite and non-negative".into(),
        ));
    }
    Ok(())
}

/// Drift generator H = diag(ω_λ) − iπΣ (frequency-independent couplings).
pub fn drift_matrix(model: &CavityModel) -> Result<Array2<C64>> {
    if !model.coupling.is_markov() {
        return Err(Error::InvalidCoupling(
            "Langevin dynamics needs frequency-independent couplings".into(),
        ));
    }
    let n = model.n_modes();
    let sigma = model.sigma(1.0);
    let mut h = sigma.mapv(|s| -C64::i() * std::f64::consts::PI * s);
    for l in 0..n {
        h[[l, l]] += model.spectrum.omegas()[l];
    }
    Ok(h)
}

/// Noise factor B: one column per input channel, scaled so that B B† equals
/// the diffusion matrix. Scattering channel m carries √(2π n̄_m) W_:m,
/// absorbing channels √(2π n_abs) κ_:j, amplifying channels
/// √(2π (n_amp + 1)) Γ_:j (the +1 is spontaneous emission of the inverted
/// medium).
pub fn noise_factor(model: &CavityModel, occ: &ChannelOccupation) -> Result<Array2<C64>> {
    check_langevin_model(model, occ)?;
    let n = model.n_modes();
    let w = model.coupling.eval(1.0);
    let two_pi = 2.0 * std::f64::consts::PI;

    let mut cols: Vec<Array1<C64>> = Vec::new();
    for m in 0..model.n_channels() {
        let scale = (two_pi * occ.0[m]).sqrt();
        cols.push(w.column(m).mapv(|x| x * scale));
    }
    let media = &model.media;
    if !media.is_empty() {
        let s_abs = (two_pi * media.n_abs).sqrt();
        for j in 0..media.kappa.ncols() {
            cols.push(media.kappa.column(j).mapv(|x| x * s_abs));
        }
        let s_amp = (two_pi * (media.n_amp + 1.0)).sqrt();
        for j in 0..media.gamma.ncols() {
            cols.push(media.gamma.column(j).mapv(|x| x * s_amp));
        }
    }

    let mut b = Array2::<C64>::zeros((n, cols.len()));
    for (j, col) in cols.iter().enumerate() {
        b.column_mut(j).assign(col);
    }
    Ok(b)
}

/// Diffusion matrix Q = B B† =
/// 2π (W diag(n̄) W† + κ n_abs κ† + Γ (n_amp+1) Γ†).
pub fn diffusion_matrix(model: &CavityModel, occ: &ChannelOccupation) -> Result<Array2<C64>> {
    let b = noise_factor(model, occ)?;
    let bh = linalg::adjoint(&b);
    Ok(b.dot(&bh))
}

/// Noise-free mean evolution ⟨a⟩(t_k) = e^{−iH t_k} a0, via matrix
/// exponentials of the sample intervals (robust for defective H).
/// Returns one row per sample time.
pub fn mean_evolution(
    model: &CavityModel,
    a0: &Array1<C64>,
    times: &[f64],
) -> Result<Array2<C64>> {
    let h = drift_matrix(model)?;
    mean_evolution_from_drift(&h, a0, times)
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Dimension("no sample times".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Dimension(
            "sample times must be non-negative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn mean_evolution_from_drift(
    h: &Array2<C64>,
    a0: &Array1<C64>,
    times: &[f64],
) -> Result<Array2<C64>> {
    validate_times(times)?;
    let n = h.nrows();
    if a0.len() != n {
        return Err(Error::Dimension(format!(
            "initial amplitude has {} entries for {} modes",
            a0.len(),
            n
        )));
    }
    let mut out = Array2::<C64>::zeros((times.len(), n));
    let mut state = a0.clone();
    let mut t_prev = 0.0;
    let mut cached: Option<(f64, Array2<C64>)> = None;
    for (k, &t) in times.iter().enumerate() {
        let dt = t - t_prev;
        if dt > 0.0 {
            let reuse = matches!(&cached, Some((d, _)) if (d - dt).abs() <= 1e-12 * dt.max(1.0));
            if !reuse {
                let gen = h.mapv(|x| -C64::i() * x * dt);
                cached = Some((dt, expm(&gen)));
            }
            let (_, prop) = cached.as_ref().unwrap();
            state = prop.dot(&state);
        }
        out.row_mut(k).assign(&state);
        t_prev = t;
    }
    Ok(out)
}

/// Mean evolution through the eigenbasis of H: a(t) = Σ_k R_k e^{−i p_k t}
/// (L_k† a0). Equivalent to [`mean_evolution`] whenever H is diagonalizable;
/// the pair is a useful consistency check.
pub fn mean_evolution_modes(
    model: &CavityModel,
    a0: &Array1<C64>,
    times: &[f64],
) -> Result<Array2<C64>> {
    validate_times(times)?;
    let h = drift_matrix(model)?;
    let n = h.nrows();
    if a0.len() != n {
        return Err(Error::Dimension(format!(
            "initial amplitude has {} entries for {} modes",
            a0.len(),
            n
        )));
    }
    let eig = eigen_biorthogonal(&h, CLUSTER_TOL)?;
    // Coefficients c_k = L_k† a0.
    let lh = linalg::adjoint(&eig.left);
    let coeffs = lh.dot(a0);
    let mut out = Array2::<C64>::zeros((times.len(), n));
    for (row, &t) in times.iter().enumerate() {
        let phases = eig.values.mapv(|p| (-C64::i() * p * t).exp());
        let weighted = &coeffs * &phases;
        let state = eig.right.dot(&weighted);
        out.row_mut(row).assign(&state);
    }
    Ok(out)
}

/// Steady-state second moment C with H C − C H† = −i Q, and the Frobenius
/// residual of the solve. Fails with [`Error::NoSteadyState`] when some mode
/// is undamped or amplified (no stationary covariance exists).
pub fn steady_state_covariance(
    model: &CavityModel,
    occ: &ChannelOccupation,
) -> Result<(Array2<C64>, f64)> {
    let h = drift_matrix(model)?;
    let q = diffusion_matrix(model, occ)?;
    lyapunov_steady(&h, &q)
}

/// Transient second moment: integrates dC/dt = −i(H C − C H†) + Q from C(0)
/// = c0 and samples at `times`. Returns one matrix per sample time.
pub fn covariance_evolution(
    model: &CavityModel,
    occ: &ChannelOccupation,
    c0: &Array2<C64>,
    times: &[f64],
    opts: &ode::OdeOptions,
) -> Result<Vec<Array2<C64>>> {
    validate_times(times)?;
    let h = drift_matrix(model)?;
    let q = diffusion_matrix(model, occ)?;
    let n = h.nrows();
    if c0.dim() != (n, n) {
        return Err(Error::Dimension(format!(
            "initial covariance is {:?}, expected ({n}, {n})",
            c0.dim()
        )));
    }
    let flatten = |m: &Array2<C64>| Array1::from_iter(m.iter().copied());
    let unflatten = |v: &Array1<C64>| {
        Array2::from_shape_vec((n, n), v.to_vec()).expect("length preserved")
    };
    let rhs = move |_t: f64, y: &Array1<C64>| {
        let c = unflatten(y);
        let hc = h.dot(&c);
        let ch = c.dot(&linalg::adjoint(&h));
        let mut dc = (&hc - &ch).mapv(|x| -C64::i() * x);
        dc.zip_mut_with(&q, |a, b| *a += b);
        flatten(&dc)
    };
    // Prepend t = 0 if absent so integrate_sampled starts at the initial state.
    let y0 = flatten(c0);
    let sampled = ode::integrate_sampled(rhs, 0.0, y0, times, opts)?;
    Ok(sampled.iter().map(|row| {
        let mut c = unflatten(row);
        // The exact flow preserves Hermiticity; retire accumulated rounding.
        let ch = linalg::adjoint(&c);
        c.zip_mut_with(&ch, |a, b| *a = (*a + *b) * 0.5);
        c
    }).collect())
}

/// Controls for the stochastic trajectory ensemble.
#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    /// Sampling stride. Trajectories advance by the exact one-step update
    /// (propagator plus integrated noise covariance of the whole interval),
    /// so dt sets the observation grid, not the accuracy.
    pub dt: f64,
    pub n_trajectories: usize,
    /// Master seed; every trajectory derives an independent stream from it.
    pub seed: u64,
    /// Trajectories per reduction chunk. Chunk sums are folded in index
    /// order, so results are bit-identical for any thread count.
    pub chunk: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            dt: 1e-3,
            n_trajectories: 1024,
            seed: 1,
            chunk: 64,
        }
    }
}

/// Ensemble statistics of the simulated trajectories.
#[derive(Debug)]
pub struct TrajectoryStats {
    pub times: Vec<f64>,
    /// Sample mean ⟨a⟩, one row per sample time.
    pub mean: Array2<C64>,
    /// Central second moment ⟨a a†⟩ − ⟨a⟩⟨a⟩†, one (n×n) slab per time.
    pub covariance: Array3<C64>,
    pub n_trajectories: usize,
}

impl TrajectoryStats {
    /// Mode occupations diag C(t), one row per sample time.
    pub fn occupations(&self) -> Array2<f64> {
        let (nt, n, _) = self.covariance.dim();
        let mut out = Array2::zeros((nt, n));
        for k in 0..nt {
            for l in 0..n {
                out[[k, l]] = self.covariance[[k, l, l]].re;
            }
        }
        out
    }
}

struct ChunkSums {
    sum_a: Array2<C64>,    // (nt, n)
    sum_aa: Array3<C64>,   // (nt, n, n) accumulating a a†
}

/// Exact update of the linear Langevin equation over one interval: the
/// propagator Φ = e^{−iH·len} and a factor of the integrated noise
/// covariance, B B† = ∫₀^len e^{−iHs} Q e^{iH†s} ds. A chain
/// a ← Φa + Bξ with unit complex Gaussian ξ then samples the SDE marginals
/// on the step grid without any time-discretization bias.
struct StepUpdate {
    len: f64,
    phi: Array2<C64>,
    noise: Array2<C64>,
}

/// Build the exact one-step update via Van Loan's block-exponential
/// identity: with A = −iH,
///
/// ```text
///   exp([[−A, Q], [0, A†]]·len) = [[·, F₁₂], [0, F₂₂]],
///   Φ = F₂₂†,   ∫₀^len e^{As} Q e^{A†s} ds = F₂₂† F₁₂.
/// ```
fn step_update(h: &Array2<C64>, q: &Array2<C64>, len: f64) -> Result<StepUpdate> {
    let n = h.nrows();
    let mut m = Array2::<C64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let a_ij = -C64::i() * h[[i, j]];
            m[[i, j]] = -a_ij * len;
            m[[i, n + j]] = q[[i, j]] * len;
            m[[n + i, n + j]] = (-C64::i() * h[[j, i]]).conj() * len;
        }
    }
    let e = expm(&m);
    let f12 = e.slice(s![..n, n..]).to_owned();
    let f22 = e.slice(s![n.., n..]).to_owned();
    let phi = linalg::adjoint(&f22);
    let mut q_step = phi.dot(&f12);
    // The integral is exactly Hermitian; retire the rounding skew so the
    // PSD factorization sees clean input.
    let q_adj = linalg::adjoint(&q_step);
    q_step.zip_mut_with(&q_adj, |x, y| *x = (*x + *y) * 0.5);
    let noise = psd_factor(&q_step)?;
    Ok(StepUpdate { len, phi, noise })
}

enum PlanOp {
    /// Advance the state with the indexed [`StepUpdate`].
    Step(usize),
    /// Accumulate statistics for the indexed sample time.
    Record(usize),
}

/// Walk the sampling grid once and collect the shared step sequence: strides
/// of `dt` plus whatever shorter remainder lands on each sample time. Every
/// trajectory replays this plan, so all consume identical random-stream
/// shapes.
fn build_plan(
    h: &Array2<C64>,
    q: &Array2<C64>,
    times: &[f64],
    dt: f64,
) -> Result<(Vec<PlanOp>, Vec<StepUpdate>)> {
    let mut plan = Vec::new();
    let mut updates: Vec<StepUpdate> = Vec::new();
    let mut t = 0.0;
    for (k, &t_sample) in times.iter().enumerate() {
        while t < t_sample - 1e-15 * t_sample.max(1.0) {
            let step = dt.min(t_sample - t);
            let idx = match updates
                .iter()
                .position(|u| (u.len - step).abs() <= 1e-12 * dt)
            {
                Some(i) => i,
                None => {
                    updates.push(step_update(h, q, step)?);
                    updates.len() - 1
                }
            };
            plan.push(PlanOp::Step(idx));
            t += step;
        }
        plan.push(PlanOp::Record(k));
    }
    Ok((plan, updates))
}

fn simulate_one(
    plan: &[PlanOp],
    updates: &[StepUpdate],
    a0: &Array1<C64>,
    rng: &mut ChaCha8Rng,
    sums: &mut ChunkSums,
) {
    let n = a0.len();
    let mut a = a0.clone();
    let mut xi = Array1::<C64>::zeros(n);
    let normal = rand_distr::StandardNormal;
    for op in plan {
        match *op {
            PlanOp::Step(idx) => {
                let u = &updates[idx];
                for x in xi.iter_mut() {
                    let re: f64 = rng.sample(normal);
                    let im: f64 = rng.sample(normal);
                    *x = C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
                }
                a = u.phi.dot(&a) + u.noise.dot(&xi);
            }
            PlanOp::Record(k) => {
                for i in 0..n {
                    sums.sum_a[[k, i]] += a[i];
                    for j in 0..n {
                        sums.sum_aa[[k, i, j]] += a[i] * a[j].conj();
                    }
                }
            }
        }
    }
}

/// Simulate a stochastic trajectory ensemble and return its mean and central
/// second moment at the sample times.
///
/// Every interval advances by the exact one-step update (see
/// [`step_update`]), so the sampled marginals carry no time-discretization
/// bias at any dt; deviations from the moment equations are purely
/// statistical.
///
/// Trajectory `i` always consumes the same derived random stream, and chunk
/// sums are reduced in fixed order, so the result is bit-identical across
/// runs and thread counts with equal options.
pub fn simulate_trajectories(
    model: &CavityModel,
    occ: &ChannelOccupation,
    a0: &Array1<C64>,
    times: &[f64],
    opts: &TrajectoryOptions,
) -> Result<TrajectoryStats> {
    validate_times(times)?;
    let h = drift_matrix(model)?;
    let q = diffusion_matrix(model, occ)?;
    let n = h.nrows();
    if a0.len() != n {
        return Err(Error::Dimension(format!(
            "initial amplitude has {} entries for {} modes",
            a0.len(),
            n
        )));
    }
    if opts.n_trajectories == 0 || opts.chunk == 0 {
        return Err(Error::Dimension(
            "need at least one trajectory and a positive chunk size".into(),
        ));
    }
    if !(opts.dt > 0.0) {
        return Err(Error::StepSize("dt must be positive".into()));
    }
    let (plan, updates) = build_plan(&h, &q, times, opts.dt)?;

    let nt = times.len();
    let n_traj = opts.n_trajectories;
    let chunk = opts.chunk;
    let n_chunks = n_traj.div_ceil(chunk);

    let chunk_sums: Vec<ChunkSums> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = ((c + 1) * chunk).min(n_traj);
            let mut sums = ChunkSums {
                sum_a: Array2::zeros((nt, n)),
                sum_aa: Array3::zeros((nt, n, n)),
            };
            for i in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(opts.seed, i as u64));
                simulate_one(&plan, &updates, a0, &mut rng, &mut sums);
            }
            sums
        })
        .collect();

    // Fold in chunk-index order: deterministic reduction.
    let mut sum_a = Array2::<C64>::zeros((nt, n));
    let mut sum_aa = Array3::<C64>::zeros((nt, n, n));
    for s in &chunk_sums {
        sum_a += &s.sum_a;
        sum_aa += &s.sum_aa;
    }

    let inv = 1.0 / n_traj as f64;
    let mean = sum_a.mapv(|x| x * inv);
    let mut covariance = sum_aa.mapv(|x| x * inv);
    for k in 0..nt {
        for i in 0..n {
            for j in 0..n {
                let m = mean[[k, i]] * mean[[k, j]].conj();
                covariance[[k, i, j]] -= m;
            }
        }
    }

    Ok(TrajectoryStats {
        times: times.to_vec(),
        mean,
        covariance,
        n_trajectories: n_traj,
    })
}

//! Spontaneous emission of a two-level emitter inside the open cavity.
//!
//! The emitter at transition frequency ω₀ couples to the interior modes with
//! amplitudes η_λ. Eliminating modes and baths gives the self-energy
//!
//! ```text
//!   t(ω₀) = ηᵀ D⁻¹(ω₀) η*,
//!   γ = −ω₀ Im t,   shift = −ω₀ Re t,   ldos = γ / (π ω₀),
//! ```
//!
//! evaluated either directly (one linear solve) or through the resonance
//! poles, t = Σ_k A_k/(ω₀ − p_k) with residues A_k = (ηᵀR_k)(ηᵀL_k)*. The
//! pole form also yields the beyond-rotating-wave rate, which keeps the
//! counter-rotating images at −p_k: t = −2ω₀ Σ_k A_k/(p_k² − ω₀²).
//!
//! An independent check integrates the Schrödinger equation of the emitter,
//! the cavity modes, and finely discretized bath continua, and fits the
//! exponential decay of the emitter population.

use ndarray::{Array1, Array2};

use crate::ode::{self, OdeOptions};
use crate::resonances::PoleSet;
use crate::response::{invert_response, response_matrix, QuadSettings};
use crate::spectrum::CavityModel;
use crate::{C64, Error, Result};

/// A point emitter: transition frequency and per-mode coupling amplitudes.
#[derive(Debug, Clone)]
pub struct AtomSpec {
    pub omega0: f64,
    pub eta: Array1<C64>,
}

impl AtomSpec {
    pub fn new(omega0: f64, eta: Array1<C64>) -> Result<Self> {
        if !omega0.is_finite() || omega0 <= 0.0 {
            return Err(Error::InvalidCoupling(
                "emitter frequency must be finite and positive".into(),
            ));
        }
        if eta.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidCoupling(
                "emitter couplings must be finite".into(),
            ));
        }
        Ok(AtomSpec { omega0, eta })
    }

    fn check_model(&self, model: &CavityModel) -> Result<()> {
        if self.eta.len() != model.n_modes() {
            return Err(Error::Dimension(format!(
                "emitter couples to {} modes but the model has {}",
                self.eta.len(),
                model.n_modes()
            )));
        }
        Ok(())
    }
}

/// Emission observables derived from the self-energy t(ω₀).
#[derive(Debug, Clone, Copy)]
pub struct EmissionRates {
    /// Spontaneous decay rate γ.
    pub gamma: f64,
    /// Emitter frequency pull (dispersive shift).
    pub shift: f64,
    /// Local density of states seen by the emitter, γ/(πω₀).
    pub ldos: f64,
    /// The complex self-energy the rates came from.
    pub self_energy: C64,
}

fn rates_from_self_energy(omega0: f64, t: C64) -> EmissionRates {
    let gamma = -omega0 * t.im;
    EmissionRates {
        gamma,
        shift: -omega0 * t.re,
        ldos: gamma / (std::f64::consts::PI * omega0),
        self_energy: t,
    }
}

/// γ, shift, and LDOS from one linear solve of the response matrix at ω₀.
/// Works for every coupling model, including band-limited ones.
pub fn decay_rate_direct(
    model: &CavityModel,
    atom: &AtomSpec,
    qs: &QuadSettings,
) -> Result<EmissionRates> {
    atom.check_model(model)?;
    let d = response_matrix(model, atom.omega0, qs)?;
    let (dinv, _cond) = invert_response(&d, atom.omega0)?;
    let eta_conj = atom.eta.mapv(|x| x.conj());
    let t = atom.eta.dot(&dinv.dot(&eta_conj));
    Ok(rates_from_self_energy(atom.omega0, t))
}

/// Emission observables resolved over the resonance poles.
#[derive(Debug)]
pub struct ModeResolvedEmission {
    pub rates: EmissionRates,
    /// Per-pole residues A_k of the self-energy.
    pub residues: Array1<C64>,
    /// True when the pole set contains near-degenerate clusters: individual
    /// residues inside a cluster are then basis-dependent (their sum is not).
    pub degenerate: bool,
}

fn pole_residues(atom: &AtomSpec, poles: &PoleSet) -> Result<Array1<C64>> {
    let n = poles.poles.len();
    if atom.eta.len() != n {
        return Err(Error::Dimension(format!(
            "emitter couples to {} modes but the pole set has {}",
            atom.eta.len(),
            n
        )));
    }
    let mut residues = Array1::<C64>::zeros(n);
    for k in 0..n {
        let mut er = C64::new(0.0, 0.0);
        let mut el = C64::new(0.0, 0.0);
        for l in 0..n {
            er += atom.eta[l] * poles.right[[l, k]];
            el += atom.eta[l] * poles.left[[l, k]];
        }
        residues[k] = er * el.conj();
    }
    Ok(residues)
}

/// γ, shift, LDOS from the pole expansion t = Σ_k A_k/(ω₀ − p_k).
/// Exact for frequency-independent couplings; agrees with
/// [`decay_rate_direct`] to rounding there.
pub fn decay_rate_modes(atom: &AtomSpec, poles: &PoleSet) -> Result<ModeResolvedEmission> {
    let residues = pole_residues(atom, poles)?;
    let w0 = C64::new(atom.omega0, 0.0);
    let t: C64 = residues
        .iter()
        .zip(poles.poles.iter())
        .map(|(a, p)| a / (w0 - p))
        .sum();
    Ok(ModeResolvedEmission {
        rates: rates_from_self_energy(atom.omega0, t),
        residues,
        degenerate: poles.is_degenerate(),
    })
}

/// Beyond-rotating-wave rate: keeps each pole's counter-rotating image,
/// t = −2ω₀ Σ_k A_k/(p_k² − ω₀²). Reduces to the pole expansion when all
/// widths and detunings are small against ω₀.
pub fn decay_rate_nonrwa(atom: &AtomSpec, poles: &PoleSet) -> Result<ModeResolvedEmission> {
    let residues = pole_residues(atom, poles)?;
    let w0 = C64::new(atom.omega0, 0.0);
    let t: C64 = residues
        .iter()
        .zip(poles.poles.iter())
        .map(|(a, p)| -2.0 * w0 * a / (p * p - w0 * w0))
        .sum();
    Ok(ModeResolvedEmission {
        rates: rates_from_self_energy(atom.omega0, t),
        residues,
        degenerate: poles.is_degenerate(),
    })
}

/// Discretization of the bath continua for the independent decay check.
#[derive(Debug, Clone)]
pub struct BathSpec {
    /// Bath modes per channel.
    pub n_bins: usize,
    /// Frequency band covered by the bath modes; `None` picks
    /// [min(ω₀, poles) − 20·max width, max(ω₀, poles) + 20·max width].
    pub band: Option<(f64, f64)>,
    /// Fixed end of the fit window. `None` picks the earlier of eight decay
    /// times and half the recurrence time. An explicit value keeps the window
    /// identical across bin counts — the knob a convergence study needs — and
    /// bypasses the recurrence-time guard, so the caller owns that systematic.
    pub fit_end: Option<f64>,
}

impl Default for BathSpec {
    fn default() -> Self {
        BathSpec {
            n_bins: 1200,
            band: None,
            fit_end: None,
        }
    }
}

/// Result of the discretized-bath decay check.
#[derive(Debug)]
pub struct OracleDecay {
    /// Fitted decay rate of ln|c_atom|².
    pub gamma: f64,
    /// Goodness of the exponential fit.
    pub r_squared: f64,
    /// Fit window (start, end).
    pub window: (f64, f64),
    /// Sample times of the recorded populations.
    pub times: Vec<f64>,
    /// Emitter population |c_atom(t)|² at the sample times.
    pub population: Vec<f64>,
    /// Bath band actually used.
    pub band: (f64, f64),
    pub n_bins: usize,
}

/// Integrate the full emitter + modes + discretized-bath Schrödinger
/// equation and fit the exponential decay of the emitter population.
///
/// The emitter couples to mode λ with g_λ = √(ω₀/2)·η_λ; each channel's
/// continuum is replaced by `n_bins` modes of spacing Δ coupled with
/// W_λm(ω_j)·√Δ, which reproduces the continuum damping for times below the
/// recurrence time π/Δ. The mode block carries the counterterm
/// Σ·ln((hi−ω₀)/(ω₀−lo)) cancelling the spurious level shift a finite band
/// induces (the flat continuum it stands in for has none). Needs
/// frequency-independent couplings and no media.
///
/// Fails with [`Error::BathTooCoarse`] when the band misses a resonance by
/// less than 20 widths or half the recurrence time cannot contain the fit
/// window, and with [`Error::FitRejected`] when the decay is not exponential
/// (R² < 0.999).
pub fn wigner_weisskopf_decay(
    model: &CavityModel,
    atom: &AtomSpec,
    bath: &BathSpec,
    poles: &PoleSet,
) -> Result<OracleDecay> {
    atom.check_model(model)?;
    if !model.coupling.is_markov() {
        return Err(Error::InvalidCoupling(
            "the discretized-bath check needs frequency-independent couplings".into(),
        ));
    }
    if !model.media.is_empty() {
        return Err(Error::InvalidCoupling(
            "the discretized-bath check models loss channels only, not media".into(),
        ));
    }
    if bath.n_bins < 2 {
        return Err(Error::BathTooCoarse(
            "need at least two bath modes per channel".into(),
        ));
    }

    let n = model.n_modes();
    let m_ch = model.n_channels();
    let w = model.coupling.eval(atom.omega0);
    let omega0 = atom.omega0;

    // Reference rate for window selection.
    let direct = decay_rate_direct(model, atom, &QuadSettings::default())?;
    let gamma_est = direct.gamma.max(1e-300);

    // Band coverage: every pole ± 20 widths, and the emitter line itself.
    let max_width = poles.widths.iter().cloned().fold(0.0_f64, f64::max);
    let margin = 20.0 * max_width.max(gamma_est);
    let mut need_lo = omega0;
    let mut need_hi = omega0;
    for (p, &g) in poles.poles.iter().zip(poles.widths.iter()) {
        need_lo = need_lo.min(p.re - 20.0 * g.max(gamma_est));
        need_hi = need_hi.max(p.re + 20.0 * g.max(gamma_est));
    }
    // Physical bath frequencies are positive; broad resonances near zero
    // have their coverage requirement cut off there.
    let need_lo = need_lo.max(1e-9);
    let (lo, hi) = match bath.band {
        Some((lo, hi)) => {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::BathTooCoarse("empty bath band".into()));
            }
            if lo > need_lo || hi < need_hi {
                return Err(Error::BathTooCoarse(format!(
                    "bath band [{lo:.6}, {hi:.6}] must cover [{need_lo:.6}, {need_hi:.6}] \
                     (every resonance ± 20 widths and the emitter line)"
                )));
            }
            (lo, hi)
        }
        None => ((need_lo - 0.05 * margin).max(1e-9), need_hi + 0.05 * margin),
    };
    if hi <= lo {
        return Err(Error::BathTooCoarse("empty bath band".into()));
    }

    let delta = (hi - lo) / bath.n_bins as f64;
    let t_transient = 5.0 * 2.0 * std::f64::consts::PI / omega0;
    let t_recurrence = std::f64::consts::PI / delta;
    let t_fit_end = match bath.fit_end {
        Some(t) => {
            if !t.is_finite() || t <= t_transient {
                return Err(Error::BathTooCoarse(format!(
                    "explicit fit end {t:.3} must exceed the transient time \
                     {t_transient:.3}"
                )));
            }
            t
        }
        None => {
            // The comb of bath modes only mimics a continuum well below the
            // recurrence time; fitting close to it picks up back-flow and
            // biases the slope low, so the window ends at half of it.
            let t_usable = 0.5 * t_recurrence;
            if t_usable < t_transient + 1.0 / gamma_est {
                return Err(Error::BathTooCoarse(format!(
                    "usable time {t_usable:.3} (half the recurrence time) is shorter \
                     than one decay time past the transient; increase n_bins above {:.0}",
                    2.0 * (hi - lo) * (t_transient + 1.0 / gamma_est)
                        / std::f64::consts::PI
                )));
            }
            t_usable.min(t_transient + 8.0 / gamma_est)
        }
    };

    // A finite band dresses the modes with the principal-value shift
    // Δ_band(ω) = Σ·ln((hi−ω)/(ω−lo)), which the flat continuum being
    // emulated does not have. Adding Δ_band(ω₀) to the mode block cancels it
    // exactly at the emitter line, where the decay rate samples the response.
    if !(lo < omega0 && omega0 < hi) {
        return Err(Error::BathTooCoarse(format!(
            "the emitter line {omega0:.6} must lie strictly inside the bath band \
             [{lo:.6}, {hi:.6}]"
        )));
    }
    let band_shift = ((hi - omega0) / (omega0 - lo)).ln();

    // State layout: [emitter, modes 0..n, channel 0 bins, channel 1 bins, …],
    // in the frame rotating at ω₀.
    let dim = 1 + n + m_ch * bath.n_bins;
    let g_atom: Array1<C64> = atom.eta.mapv(|e| e * (omega0 / 2.0).sqrt());
    let mut h_mode = Array2::<C64>::zeros((n, n));
    for l in 0..n {
        for lp in 0..n {
            let mut sig = C64::new(0.0, 0.0);
            for m in 0..m_ch {
                sig += w[[l, m]] * w[[lp, m]].conj();
            }
            h_mode[[l, lp]] = band_shift * sig;
        }
        h_mode[[l, l]] += C64::new(model.spectrum.omegas()[l] - omega0, 0.0);
    }
    let bin_detuning: Vec<f64> = (0..bath.n_bins)
        .map(|j| lo + (j as f64 + 0.5) * delta - omega0)
        .collect();
    let sqrt_delta = delta.sqrt();

    let rhs = move |_t: f64, c: &Array1<C64>| {
        let mut dc = Array1::<C64>::zeros(dim);
        let mi = C64::new(0.0, -1.0);
        // Emitter row: −i Σ_λ g_λ c_λ  (emitter detuning is zero).
        let mut acc = C64::new(0.0, 0.0);
        for l in 0..n {
            acc += g_atom[l] * c[1 + l];
        }
        dc[0] = mi * acc;
        // Mode rows.
        for l in 0..n {
            let mut acc = g_atom[l].conj() * c[0];
            for lp in 0..n {
                acc += h_mode[[l, lp]] * c[1 + lp];
            }
            for m in 0..m_ch {
                let base = 1 + n + m * bath.n_bins;
                let wlm = w[[l, m]] * sqrt_delta;
                for j in 0..bath.n_bins {
                    acc += wlm * c[base + j];
                }
            }
            dc[1 + l] = mi * acc;
        }
        // Bath rows.
        for m in 0..m_ch {
            let base = 1 + n + m * bath.n_bins;
            for j in 0..bath.n_bins {
                let mut acc = bin_detuning[j] * c[base + j];
                for l in 0..n {
                    acc += (w[[l, m]] * sqrt_delta).conj() * c[1 + l];
                }
                dc[base + j] = mi * acc;
            }
        }
        dc
    };

    let mut c0 = Array1::<C64>::zeros(dim);
    c0[0] = C64::new(1.0, 0.0);
    let n_samples = 400;
    let times: Vec<f64> = (1..=n_samples)
        .map(|k| t_fit_end * k as f64 / n_samples as f64)
        .collect();
    // The fit, not the integrator, limits the accuracy; 1e-7 is ample.
    let opts = OdeOptions {
        rtol: 1e-7,
        atol: 1e-12,
        ..OdeOptions::default()
    };
    let sampled = ode::integrate_sampled(rhs, 0.0, c0, &times, &opts)?;
    let population: Vec<f64> = sampled.iter().map(|c| c[0].norm_sqr()).collect();

    // Linear fit of ln population on the window.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        if t >= t_transient && t <= t_fit_end && population[k] > 1e-280 {
            xs.push(t);
            ys.push(population[k].ln());
        }
    }
    if xs.len() < 8 {
        return Err(Error::BathTooCoarse(
            "fit window holds fewer than 8 samples; widen it or refine the bath".into(),
        ));
    }
    let (slope, r_squared) = linear_fit(&xs, &ys);
    let gamma = -slope;
    if r_squared < 0.999 {
        return Err(Error::FitRejected {
            r_squared,
            gamma_estimate: gamma,
        });
    }
    Ok(OracleDecay {
        gamma,
        r_squared,
        window: (t_transient, t_fit_end),
        times,
        population,
        band: (lo, hi),
        n_bins: bath.n_bins,
    })
}

/// Least-squares slope and R² of y against x.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

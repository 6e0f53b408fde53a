//! Exactly solvable testbed: a 1D cavity on x ∈ [0, a] closed by a perfect
//! mirror at x = 0, filled with dielectric ε_in, and opened to vacuum
//! through a delta barrier of strength V at x = a (units with c = 1).
//!
//! The closed reference problem (barrier treated as a wall dressing the
//! boundary condition) has interior modes u_λ(x) = A_λ sin(q_λ x) with
//!
//! ```text
//!   q_λ cos(q_λ a) + V sin(q_λ a) = 0,        ω_λ = q_λ / √ε_in,
//!   A_λ = 1 / √( ε_in (a/2 − sin(2 q_λ a)/(4 q_λ)) ),
//! ```
//!
//! and the opening converts each mode into a decay channel with coupling
//! 𝒲_λ(ω) = u_λ(a) √(ω/(2π ω_λ)), so the on-resonance width is exactly
//! Γ_λ = u_λ(a)². The barrier-dressed ω_λ already carry the level shift of
//! the opening, so the mode-space model uses the Δ ≡ 0 convention.
//!
//! The same geometry is solved in closed form by wave matching: the exact
//! reflection amplitude, its Wigner delay, and the exact complex resonances
//! provide ground truth for the N-mode truncated model.

use ndarray::Array1;

use crate::spectrum::{CavityModel, CouplingModel, ModeSpectrum};
use crate::{C64, Error, Result};

/// Mirror–dielectric–barrier geometry (c = 1).
#[derive(Debug, Clone, Copy)]
pub struct Geometry1D {
    /// Cavity length a.
    pub length: f64,
    /// Relative permittivity inside, ≥ vacuum.
    pub eps_in: f64,
    /// Delta-barrier strength V ≥ 0 at the opening.
    pub barrier: f64,
}

impl Geometry1D {
    pub fn new(length: f64, eps_in: f64, barrier: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "cavity length {length} must be finite and positive"
            )));
        }
        if !(eps_in.is_finite() && eps_in >= 1.0) {
            return Err(Error::InvalidSpectrum(format!(
                "permittivity {eps_in} must be finite and ≥ 1"
            )));
        }
        if !(barrier.is_finite() && barrier >= 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "barrier strength {barrier} must be finite and non-negative"
            )));
        }
        Ok(Geometry1D {
            length,
            eps_in,
            barrier,
        })
    }

    /// Asymptotic mode spacing π/(a √ε_in).
    pub fn free_spectral_range(&self) -> f64 {
        std::f64::consts::PI / (self.length * self.eps_in.sqrt())
    }
}

/// One interior reference mode of the closed cavity.
#[derive(Debug, Clone, Copy)]
pub struct InteriorMode {
    /// Interior wavenumber q_λ.
    pub q: f64,
    /// Mode frequency ω_λ = q_λ/√ε_in.
    pub omega: f64,
    /// Normalized boundary amplitude u_λ(a).
    pub boundary_amplitude: f64,
    /// On-resonance decay width u_λ(a)².
    pub width: f64,
}

fn eigencondition(geom: &Geometry1D, q: f64) -> f64 {
    let qa = q * geom.length;
    q * qa.cos() + geom.barrier * qa.sin()
}

/// The first `n` interior modes, found by bisection on the brackets
/// q a ∈ ((λ−½)π, λπ) where the eigencondition changes sign exactly once.
pub fn interior_modes(geom: &Geometry1D, n: usize) -> Result<Vec<InteriorMode>> {
    if n == 0 {
        return Err(Error::InvalidSpectrum("need at least one mode".into()));
    }
    let a = geom.length;
    let eps = geom.eps_in;
    let v = geom.barrier;
    let mut out = Vec::with_capacity(n);
    for lam in 1..=n {
        let q = if v == 0.0 {
            // Open end: exact Neumann-type roots.
            (lam as f64 - 0.5) * std::f64::consts::PI / a
        } else {
            let mut lo = (lam as f64 - 0.5) * std::f64::consts::PI / a;
            let mut hi = lam as f64 * std::f64::consts::PI / a;
            // Nudge off the bracket ends (where sin or cos vanish exactly).
            let nudge = (hi - lo) * 1e-14;
            lo += nudge;
            hi -= nudge;
            let mut flo = eigencondition(geom, lo);
            let fhi = eigencondition(geom, hi);
            if flo == 0.0 {
                lo
            } else if fhi == 0.0 {
                hi
            } else {
                debug_assert!(flo * fhi < 0.0, "bracket λ={lam} lost the root");
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break; // interval at machine resolution
                    }
                    let fmid = eigencondition(geom, mid);
                    if fmid == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if flo * fmid < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fmid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        let qa = q * a;
        let norm = eps * (a / 2.0 - (2.0 * qa).sin() / (4.0 * q));
        let amp = qa.sin() / norm.sqrt();
        out.push(InteriorMode {
            q,
            omega: q / eps.sqrt(),
            boundary_amplitude: amp,
            width: amp * amp,
        });
    }
    Ok(out)
}

/// The N-mode cavity model of the geometry, plus the modes it came from.
#[derive(Debug)]
pub struct AnalyticCavity {
    pub model: CavityModel,
    pub modes: Vec<InteriorMode>,
    /// Set when the top kept mode's width exceeds half the mode spacing:
    /// resonances overlap there and the N-mode truncation degrades.
    pub truncation_warning: bool,
}

/// Build the single-channel mode-space model with the exact frequency-
/// dependent coupling 𝒲_λ(ω) = u_λ(a)·√(ω/(2πω_λ)).
pub fn analytic_cavity(geom: &Geometry1D, n_modes: usize) -> Result<AnalyticCavity> {
    let modes = interior_modes(geom, n_modes)?;
    let omegas = Array1::from_iter(modes.iter().map(|m| m.omega));
    let boundary = Array1::from_iter(modes.iter().map(|m| m.boundary_amplitude));
    let spectrum = ModeSpectrum::explicit(omegas.to_vec())?;
    let coupling = CouplingModel::Analytic1d {
        omega_modes: omegas,
        boundary,
    };
    let model = CavityModel::new(spectrum, coupling, None)?;
    let truncation_warning =
        modes.last().unwrap().width / geom.free_spectral_range() > 0.5;
    Ok(AnalyticCavity {
        model,
        modes,
        truncation_warning,
    })
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidSpectrum(format!(
            "probe frequency {omega} must be finite and positive"
        )));
    }
    Ok(())
}

/// Exact reflection amplitude from wave matching,
/// S(ω) = (ik + ζ)/(ik − ζ) with k = ω, q = ω√ε_in, ζ = V + q·cot(qa),
/// evaluated in the sin-multiplied form that stays finite at cot poles.
/// Unimodular for every real ω (one lossless channel).
pub fn transfer_matrix_s(geom: &Geometry1D, omega: f64) -> Result<C64> {
    check_omega(omega)?;
    let k = omega;
    let q = omega * geom.eps_in.sqrt();
    let qa = q * geom.length;
    let (s, c) = qa.sin_cos();
    // P = ζ sin(qa); numerator/denominator of S scaled by sin(qa).
    let p = geom.barrier * s + q * c;
    let num = C64::new(p, k * s);
    let den = C64::new(-p, k * s);
    Ok(num / den)
}

/// Wigner delay τ(ω) = d arg S/dω, evaluated in closed form (same
/// sin-multiplied regularization as [`transfer_matrix_s`]).
pub fn wigner_delay(geom: &Geometry1D, omega: f64) -> Result<f64> {
    check_omega(omega)?;
    let k = omega;
    let se = geom.eps_in.sqrt();
    let q = omega * se;
    let qa = q * geom.length;
    let (s, c) = qa.sin_cos();
    let p = geom.barrier * s + q * c; // ζ sin
    let zp = se * (c * s - qa); // ζ′ sin²  (dζ/dω = √ε (cot − qa/sin²))
    Ok(2.0 * (p * s - zp * k) / (p * p + k * k * s * s))
}

/// One exact complex resonance per interior mode: Newton iteration on the
/// outgoing-wave condition q cos(qa) + (V − ik) sin(qa) = 0 over complex k,
/// seeded at ω_λ − i·Γ_λ/2. Frequencies are the real parts, widths are
/// −2·imaginary parts.
pub fn exact_resonances(geom: &Geometry1D, modes: &[InteriorMode]) -> Result<Vec<C64>> {
    let a = geom.length;
    let se = geom.eps_in.sqrt();
    let v = geom.barrier;
    let g = |k: C64| {
        let q = k * se;
        let qa = q * a;
        q * qa.cos() + (C64::new(v, 0.0) - C64::i() * k) * qa.sin()
    };
    let dg = |k: C64| {
        let q = k * se;
        let qa = q * a;
        let (sn, cs) = (qa.sin(), qa.cos());
        C64::new(se, 0.0) * cs - q * sn * (a * se) - C64::i() * sn
            + (C64::new(v, 0.0) - C64::i() * k) * cs * (a * se)
    };
    let mut out = Vec::with_capacity(modes.len());
    for (lam, m) in modes.iter().enumerate() {
        let mut k = C64::new(m.omega, -0.5 * m.width);
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        for _ in 0..100 {
            let denom = dg(k);
            if denom.norm() < 1e-300 {
                break;
            }
            let step = -g(k) / denom;
            k += step;
            last_step = step.norm();
            if last_step < 1e-14 * (1.0 + k.norm()) {
                converged = true;
                break;
            }
        }
        if !converged || !(k.im < 0.0) {
            return Err(Error::PoleRefinement {
                msg: format!("exact resonance {} did not converge to the open half-plane", lam + 1),
                last_iterate: k,
                last_step,
            });
        }
        out.push(k);
    }
    Ok(out)
}

/// A resonance located by fitting the Wigner-delay peak.
#[derive(Debug, Clone, Copy)]
pub struct DelayResonance {
    /// Peak position (resonance frequency).
    pub omega: f64,
    /// Full width at half maximum of the delay peak.
    pub width: f64,
    /// Peak delay value.
    pub delay_peak: f64,
}

/// Locate resonances as Lorentzian peaks of the Wigner delay, one per
/// interior mode: a coarse bracket around each mode frequency, golden-section
/// refinement of the peak, then bisection for the half-maximum points.
/// Position error is O((Γ/spacing)²) from peak overlap — this estimator is
/// deliberately independent of the mode-space machinery.
pub fn delay_resonances(geom: &Geometry1D, modes: &[InteriorMode]) -> Result<Vec<DelayResonance>> {
    let fsr = geom.free_spectral_range();
    let mut out = Vec::with_capacity(modes.len());
    for m in modes {
        let mut lo = m.omega - 0.45 * fsr;
        let mut hi = m.omega + 0.45 * fsr;
        if lo <= 0.0 {
            lo = m.omega * 0.5;
        }
        // Golden-section maximization of τ on [lo, hi].
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = wigner_delay(geom, x1)?;
        let mut f2 = wigner_delay(geom, x2)?;
        for _ in 0..200 {
            if hi - lo < 1e-13 * m.omega.max(1.0) {
                break;
            }
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = wigner_delay(geom, x2)?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = wigner_delay(geom, x1)?;
            }
        }
        let peak_omega = 0.5 * (lo + hi);
        let peak = wigner_delay(geom, peak_omega)?;
        if peak <= 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "no delay peak near ω = {}",
                m.omega
            )));
        }
        // Half-maximum crossings on both sides.
        let half = 0.5 * peak;
        let half_cross = |mut inner: f64, mut outer: f64| -> Result<f64> {
            // τ(inner) > half ≥ τ(outer); bisect.
            for _ in 0..200 {
                let mid = 0.5 * (inner + outer);
                if (outer - inner).abs() < 1e-13 * peak_omega.max(1.0) {
                    break;
                }
                if wigner_delay(geom, mid)? > half {
                    inner = mid;
                } else {
                    outer = mid;
                }
            }
            Ok(0.5 * (inner + outer))
        };
        // Walk outward until below half maximum.
        let mut left = peak_omega - 0.25 * m.width.max(1e-12);
        while left > peak_omega - 0.5 * fsr && wigner_delay(geom, left)? > half {
            left -= 0.1 * m.width.max(1e-12);
        }
        let mut right = peak_omega + 0.25 * m.width.max(1e-12);
        while right < peak_omega + 0.5 * fsr && wigner_delay(geom, right)? > half {
            right += 0.1 * m.width.max(1e-12);
        }
        let w_lo = half_cross(peak_omega, left)?;
        let w_hi = half_cross(peak_omega, right)?;
        out.push(DelayResonance {
            omega: peak_omega,
            width: w_hi - w_lo,
            delay_peak: peak,
        });
    }
    Ok(out)
}

/// Pairwise comparison of model resonances against ground truth.
#[derive(Debug)]
pub struct ResonanceComparison {
    /// (model pole, reference pole) per mode, index-aligned.
    pub pairs: Vec<(C64, C64)>,
    /// |Re difference| / free spectral range, per mode.
    pub position_error_over_fsr: Vec<f64>,
    /// |width difference| / reference width, per mode.
    pub width_relative_error: Vec<f64>,
}

impl ResonanceComparison {
    pub fn max_position_error(&self) -> f64 {
        self.position_error_over_fsr
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn max_width_error(&self) -> f64 {
        self.width_relative_error.iter().cloned().fold(0.0, f64::max)
    }
}

/// Compare index-aligned pole lists (model vs reference) in units that
/// matter: positions against the mode spacing, widths relatively.
pub fn compare_resonances(
    geom: &Geometry1D,
    model: &[C64],
    reference: &[C64],
) -> Result<ResonanceComparison> {
    if model.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "{} model poles vs {} reference poles",
            model.len(),
            reference.len()
        )));
    }
    let fsr = geom.free_spectral_range();
    let mut pairs = Vec::with_capacity(model.len());
    let mut pos = Vec::with_capacity(model.len());
    let mut wid = Vec::with_capacity(model.len());
    for (&m, &r) in model.iter().zip(reference.iter()) {
        pairs.push((m, r));
        pos.push((m.re - r.re).abs() / fsr);
        let wr = -2.0 * r.im;
        wid.push(((-2.0 * m.im) - wr).abs() / wr.abs().max(f64::MIN_POSITIVE));
    }
    Ok(ResonanceComparison {
        pairs,
        position_error_over_fsr: pos,
        width_relative_error: wid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn standard() -> Geometry1D {
        Geometry1D::new(1.0, 1.0, 200.0).unwrap()
    }

    #[test]
    fn interior_modes_satisfy_the_eigencondition() {
        let geom = standard();
        let modes = interior_modes(&geom, 12).unwrap();
        assert_eq!(modes.len(), 12);
        for (lam, m) in modes.iter().enumerate() {
            let f = eigencondition(&geom, m.q);
            let scale = m.q.max(geom.barrier);
            assert!(
                f.abs() < 1e-10 * scale,
                "mode {}: residual {f}",
                lam + 1
            );
            // Root sits in its bracket.
            let lo = (lam as f64 + 0.5) * std::f64::consts::PI;
            let hi = (lam as f64 + 1.0) * std::f64::consts::PI;
            assert!(m.q > lo && m.q < hi);
        }
        // Ascending.
        for w in modes.windows(2) {
            assert!(w[1].omega > w[0].omega);
        }
    }

    #[test]
    fn open_end_modes_are_exact_quarter_wave_stack() {
        let geom = Geometry1D::new(2.0, 1.0, 0.0).unwrap();
        let modes = interior_modes(&geom, 5).unwrap();
        for (lam, m) in modes.iter().enumerate() {
            let expect = (lam as f64 + 0.5) * std::f64::consts::PI / 2.0;
            assert!((m.q - expect).abs() < 1e-14 * expect);
        }
    }

    #[test]
    fn modes_are_unit_normalized_in_the_dielectric() {
        let geom = Geometry1D::new(1.3, 2.25, 80.0).unwrap();
        let modes = interior_modes(&geom, 4).unwrap();
        for m in &modes {
            let a2 = m.boundary_amplitude / (m.q * geom.length).sin();
            let integral = quad::integrate(
                |x: f64| {
                    let u = a2 * (m.q * x).sin();
                    geom.eps_in * u * u
                },
                0.0,
                geom.length,
                1e-12,
                40,
            )
            .unwrap();
            assert!((integral - 1.0).abs() < 1e-9, "norm {integral}");
        }
    }

    #[test]
    fn width_matches_the_closed_form() {
        let geom = standard();
        let modes = interior_modes(&geom, 10).unwrap();
        for m in &modes {
            let (a, v, eps) = (geom.length, geom.barrier, geom.eps_in);
            let closed = 2.0 * m.q * m.q / (eps * (a * v * v + a * m.q * m.q + v));
            assert!(
                (m.width - closed).abs() < 1e-12 * closed,
                "{} vs {closed}",
                m.width
            );
        }
    }

    #[test]
    fn reflection_is_unimodular() {
        let geom = standard();
        for omega in [0.7, 3.2, 9.4251, 31.0, 31.4159, 100.0] {
            let s = transfer_matrix_s(&geom, omega).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12, "|S({omega})| = {}", s.norm());
        }
    }

    #[test]
    fn delay_matches_numerical_phase_derivative() {
        let geom = standard();
        for omega in [5.0, 9.4, 28.0, 31.4] {
            let h = 1e-6;
            let sp = transfer_matrix_s(&geom, omega + h).unwrap();
            let sm = transfer_matrix_s(&geom, omega - h).unwrap();
            // Derivative of the phase via the unimodular increment.
            let dphase = (sp / sm).arg() / (2.0 * h);
            let tau = wigner_delay(&geom, omega).unwrap();
            assert!(
                (tau - dphase).abs() < 1e-5 * tau.abs().max(1.0),
                "ω={omega}: τ={tau} vs FD {dphase}"
            );
        }
    }

    #[test]
    fn exact_resonances_solve_the_outgoing_condition() {
        let geom = standard();
        let modes = interior_modes(&geom, 8).unwrap();
        let poles = exact_resonances(&geom, &modes).unwrap();
        for (m, k) in modes.iter().zip(poles.iter()) {
            assert!(k.im < 0.0);
            // Near the seed: within one width of the interior frequency.
            assert!((k.re - m.omega).abs() < 3.0 * m.width.max(1e-6));
            // Residual of the matching condition.
            let q = k * geom.eps_in.sqrt();
            let qa = q * geom.length;
            let g = q * qa.cos() + (C64::new(geom.barrier, 0.0) - C64::i() * k) * qa.sin();
            assert!(g.norm() < 1e-9 * k.norm() * geom.barrier.max(1.0));
        }
    }

    #[test]
    fn delay_peaks_sit_on_the_exact_resonances() {
        let geom = standard();
        let modes = interior_modes(&geom, 6).unwrap();
        let exact = exact_resonances(&geom, &modes).unwrap();
        let fitted = delay_resonances(&geom, &modes).unwrap();
        for (k, f) in exact.iter().zip(fitted.iter()) {
            let width = -2.0 * k.im;
            // Peak position and pole real part each differ from the interior
            // eigenfrequency at O(Γ²/spacing); 5% of a width bounds both.
            assert!(
                (f.omega - k.re).abs() < 0.05 * width,
                "peak {} vs pole {}",
                f.omega,
                k.re
            );
            let rel = (f.width - width).abs() / width;
            assert!(rel < 0.02, "width {} vs {} (rel {rel})", f.width, width);
        }
    }

    #[test]
    fn truncation_warning_fires_for_leaky_cavities() {
        // Tiny barrier: widths comparable to the spacing.
        let leaky = Geometry1D::new(1.0, 1.0, 0.3).unwrap();
        let cav = analytic_cavity(&leaky, 6).unwrap();
        assert!(cav.truncation_warning);
        let good = analytic_cavity(&standard(), 6).unwrap();
        assert!(!good.truncation_warning);
    }

    #[test]
    fn model_widths_match_interior_estimates() {
        let geom = standard();
        let cav = analytic_cavity(&geom, 10).unwrap();
        // The coupling evaluated on resonance reproduces Γ_λ = u_λ(a)².
        let w = cav.model.coupling.eval(cav.modes[3].omega);
        let gamma = 2.0 * std::f64::consts::PI * w[[3, 0]].norm_sqr();
        assert!((gamma - cav.modes[3].width).abs() < 1e-12);
    }
}

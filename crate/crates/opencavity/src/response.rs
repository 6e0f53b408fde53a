//! The non-Hermitian response matrix
//! D(ω) = (ω − ω_λ)δ_λλ′ + Δ_λλ′(ω) + iπΣ_λλ′(ω) and its inverse (the
//! interior Green's function). Δ is the principal-value level shift of the
//! damping kernel; for frequency-independent couplings the symmetric
//! wide-band limit makes it vanish identically.

use ndarray::Array2;
use ndarray_linalg::Inverse;

use crate::linalg::{adjoint, inf_norm};
use crate::spectrum::{CavityModel, CouplingModel};
use crate::{quad, C64, Error, Result};

/// Tolerances for the level-shift quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    pub tol: f64,
    pub max_depth: u32,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            tol: 1e-9,
            max_depth: 48,
        }
    }
}

/// Principal-value level shift Δ(ω) = P∫ Σ_ch(ω′)/(ω′ − ω) dω′ over the
/// declared coupling band.
///
/// Frequency-independent couplings carry the symmetric wide-band convention
/// Δ ≡ 0. The 1D analytic coupling also returns zero: its level shift is
/// already absorbed into the barrier-dressed interior frequencies, which is
/// what the transfer-matrix oracle validates. Media couplings are broadband
/// and contribute no shift either; only a band-limited channel coupling
/// produces a nonzero Δ.
pub fn level_shift(model: &CavityModel, omega: f64, qs: &QuadSettings) -> Result<Array2<C64>> {
    let n = model.n_modes();
    match &model.coupling {
        CouplingModel::Constant { .. }
        | CouplingModel::GaussianRandom { .. }
        | CouplingModel::Analytic1d { .. } => Ok(Array2::zeros((n, n))),
        CouplingModel::BandLimited { lo, hi, .. } => {
            let (lo, hi) = (*lo, *hi);
            let sigma_ch = |op: f64| -> Array2<C64> {
                let w = model.coupling.eval(op);
                w.dot(&adjoint(&w))
            };
            if omega == lo || omega == hi {
                return Err(Error::Quadrature(format!(
                    "level shift evaluated exactly on band edge {omega}"
                )));
            }
            if omega > lo && omega < hi {
                quad::principal_value(&sigma_ch, lo, hi, omega, qs.tol, qs.max_depth)
            } else {
                let kernel = |op: f64| {
                    let mut s = sigma_ch(op);
                    s.mapv_inplace(|z| z / (op - omega));
                    s
                };
                quad::integrate(&kernel, lo, hi, qs.tol, qs.max_depth)
            }
        }
    }
}

/// Assemble D(ω).
pub fn response_matrix(model: &CavityModel, omega: f64, qs: &QuadSettings) -> Result<Array2<C64>> {
    let n = model.n_modes();
    let delta = level_shift(model, omega, qs)?;
    let sigma = model.sigma(omega);
    let mut d = delta;
    d.zip_mut_with(&sigma, |dz, sz| {
        *dz += C64::i() * std::f64::consts::PI * sz;
    });
    for l in 0..n {
        d[[l, l]] += C64::new(omega - model.spectrum.omegas()[l], 0.0);
    }
    Ok(d)
}

/// Invert D(ω), with an ∞-norm condition estimate. Fails with
/// [`Error::SingularResponse`] when ω sits numerically on a real pole.
pub fn response_inverse(
    model: &CavityModel,
    omega: f64,
    qs: &QuadSettings,
) -> Result<(Array2<C64>, f64)> {
    let d = response_matrix(model, omega, qs)?;
    invert_response(&d, omega)
}

/// Inversion + condition estimate of an already assembled response matrix.
pub fn invert_response(d: &Array2<C64>, omega: f64) -> Result<(Array2<C64>, f64)> {
    let dinv = d.inv().map_err(|_| Error::SingularResponse {
        omega,
        cond: f64::INFINITY,
    })?;
    let cond = inf_norm(d) * inf_norm(&dinv);
    if !cond.is_finite() || cond > 1.0 / f64::EPSILON {
        return Err(Error::SingularResponse { omega, cond });
    }
    Ok((dinv, cond))
}

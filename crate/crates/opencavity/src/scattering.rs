//! Channel scattering matrix S(ω) = 1 − 2πi 𝒲† D⁻¹ 𝒲 and the input–output
//! transforms U = −2πi 𝒲† D⁻¹ 𝒦, V = −2πi 𝒲† D⁻¹ Γ that route media noise
//! into the channels. Without media S is unitary; with media the defect obeys
//! the flux identity U U† − V V† = 1 − S S†.

use ndarray::Array2;
use rayon::prelude::*;

use crate::linalg::{adjoint, identity, max_abs};
use crate::response::{response_matrix, invert_response, QuadSettings};
use crate::spectrum::CavityModel;
use crate::{C64, Result};

#[derive(Debug, Clone)]
pub struct ScatteringResult {
    pub omega: f64,
    pub s: Array2<C64>,
    /// max-abs entry of S S† − 1 (meaningful as a *defect* only without media).
    pub unitarity_defect: f64,
    /// ∞-norm condition estimate of D(ω).
    pub condition: f64,
}

/// S(ω) for the full model (media included in D through Σ).
pub fn smatrix(model: &CavityModel, omega: f64, qs: &QuadSettings) -> Result<ScatteringResult> {
    let d = response_matrix(model, omega, qs)?;
    let (dinv, condition) = invert_response(&d, omega)?;
    let w = model.coupling.eval(omega);
    let wh = adjoint(&w);
    let m = model.n_channels();
    let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let s = identity(m) - (wh.dot(&dinv).dot(&w)).mapv(|z| z * two_pi_i);
    let defect = max_abs(&(&s.dot(&adjoint(&s)) - &identity(m)));
    Ok(ScatteringResult {
        omega,
        s,
        unitarity_defect: defect,
        condition,
    })
}

#[derive(Debug, Clone)]
pub struct IoTransforms {
    pub omega: f64,
    pub s: Array2<C64>,
    /// Channel response to absorbing-media noise inputs.
    pub u: Array2<C64>,
    /// Channel response to amplifying-media noise inputs.
    pub v: Array2<C64>,
    /// max-abs entry of (U U† − V V†) − (1 − S S†).
    pub flux_defect: f64,
}

/// S, U, V at one frequency, with the flux-identity defect.
pub fn io_transforms(model: &CavityModel, omega: f64, qs: &QuadSettings) -> Result<IoTransforms> {
    let d = response_matrix(model, omega, qs)?;
    let (dinv, _) = invert_response(&d, omega)?;
    let w = model.coupling.eval(omega);
    let wh_dinv = adjoint(&w).dot(&dinv);
    let m = model.n_channels();
    let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let s = identity(m) - wh_dinv.dot(&w).mapv(|z| z * two_pi_i);
    let u = wh_dinv
        .dot(&model.media.kappa)
        .mapv(|z| z * (-two_pi_i));
    let v = wh_dinv
        .dot(&model.media.gamma)
        .mapv(|z| z * (-two_pi_i));
    let lhs = &u.dot(&adjoint(&u)) - &v.dot(&adjoint(&v));
    let rhs = &identity(m) - &s.dot(&adjoint(&s));
    let flux_defect = max_abs(&(&lhs - &rhs));
    Ok(IoTransforms {
        omega,
        s,
        u,
        v,
        flux_defect,
    })
}

/// A sweep failure at one grid point; the rest of the sweep is unaffected.
#[derive(Debug, Clone)]
pub struct PointFailure {
    pub omega: f64,
    pub message: String,
}

#[derive(Debug)]
pub struct SweepResult {
    pub points: Vec<std::result::Result<ScatteringResult, PointFailure>>,
}

impl SweepResult {
    pub fn max_unitarity_defect(&self) -> f64 {
        self.points
            .iter()
            .filter_map(|p| p.as_ref().ok())
            .map(|r| r.unitarity_defect)
            .fold(0.0, f64::max)
    }

    pub fn n_failed(&self) -> usize {
        self.points.iter().filter(|p| p.is_err()).count()
    }
}

/// Evaluate S over a frequency grid. Points are independent and computed in
/// parallel; the output order matches the input grid exactly, so results are
/// bit-identical however many workers run.
pub fn sweep(model: &CavityModel, omegas: &[f64], qs: &QuadSettings) -> SweepResult {
    let points = omegas
        .par_iter()
        .map(|&omega| {
            smatrix(model, omega, qs).map_err(|e| PointFailure {
                omega,
                message: e.to_string(),
            })
        })
        .collect();
    SweepResult { points }
}

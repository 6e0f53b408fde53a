//! Complex resonance poles and biorthogonal mode pairs.
//!
//! For frequency-independent couplings the poles are exactly the eigenvalues
//! of the effective Hamiltonian H = diag(ω_λ) − Δ − iπΣ, and D(ω) = ω·1 − H.
//! For frequency-dependent couplings those eigenvalues seed a Newton
//! iteration on det D(ω) = 0, driven through the smallest singular triplet
//! of D.

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;

use crate::linalg::eigen_biorthogonal;
use crate::response::{level_shift, QuadSettings};
use crate::spectrum::{CavityModel, CouplingModel};
use crate::{C64, Error, Result};

/// Eigenvalue groups closer than this are reported as degenerate clusters.
pub const CLUSTER_TOL: f64 = 1e-8;

/// H = diag(ω_λ) − Δ(ω_ref) − iπΣ(ω_ref). For Markov couplings `omega_ref`
/// is irrelevant and may be `None`; frequency-dependent couplings require it.
pub fn effective_hamiltonian(
    model: &CavityModel,
    omega_ref: Option<f64>,
    qs: &QuadSettings,
) -> Result<Array2<C64>> {
    let n = model.n_modes();
    let omega_ref = match (&model.coupling, omega_ref) {
        (c, Some(w)) if !c.is_markov() => w,
        (c, None) if !c.is_markov() => {
            return Err(Error::InvalidCoupling(
                "frequency-dependent coupling needs a reference frequency for the effective Hamiltonian"
                    .into(),
            ));
        }
        // Markov: any frequency evaluates to the same Σ.
        _ => omega_ref.unwrap_or(1.0),
    };
    let sigma = model.sigma(omega_ref);
    let delta = level_shift(model, omega_ref, qs)?;
    let mut h = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            h[[i, j]] = -delta[[i, j]] - C64::i() * std::f64::consts::PI * sigma[[i, j]];
        }
        h[[i, i]] += C64::new(model.spectrum.omegas()[i], 0.0);
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy)]
pub enum PoleMethod {
    /// Eigenvalues of the effective Hamiltonian at a reference frequency.
    Markov { omega_ref: Option<f64> },
    /// Markov seeds refined by Newton iteration on det D(ω) = 0; needs a
    /// coupling with an analytic continuation.
    NewtonRefined {
        omega_ref: Option<f64>,
        tol: f64,
        max_iter: usize,
    },
}

impl PoleMethod {
    pub fn newton(omega_ref: Option<f64>) -> Self {
        PoleMethod::NewtonRefined {
            omega_ref,
            tol: 1e-12,
            max_iter: 60,
        }
    }
}

/// Resonance poles with biorthogonal vector pairs of the reference effective
/// Hamiltonian. Poles are sorted by ascending real part (ties by imaginary
/// part); `widths[k] = −2 Im(poles[k])`.
#[derive(Debug)]
pub struct PoleSet {
    pub poles: Array1<C64>,
    pub widths: Array1<f64>,
    /// Right eigenvectors (columns, unit norm) of the effective Hamiltonian.
    pub right: Array2<C64>,
    /// Left eigenvectors (columns), scaled so left†·right = 1 pairwise.
    pub left: Array2<C64>,
    /// Reciprocal eigenvalue condition numbers |l̂_k† r_k|.
    pub residue_norms: Array1<f64>,
    /// Near-degenerate pole groups (spacing < [`CLUSTER_TOL`]). Non-empty
    /// means per-pole vectors inside a group are basis-dependent.
    pub degenerate_clusters: Vec<Vec<usize>>,
    /// Whether Newton refinement ran on the pole locations.
    pub refined: bool,
}

impl PoleSet {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_clusters.is_empty()
    }
}

/// Analytic continuation of Σ to complex frequency: constant couplings
/// continue as themselves; the 1D coupling is real on the real axis, so its
/// damping kernel continues as W(z)·W(z)ᵀ (Schwarz reflection).
fn sigma_analytic(model: &CavityModel, z: C64) -> Option<Array2<C64>> {
    match &model.coupling {
        CouplingModel::Constant { .. } | CouplingModel::GaussianRandom { .. } => {
            Some(model.sigma(1.0))
        }
        CouplingModel::Analytic1d { .. } => {
            let w = model.coupling.eval_analytic(z)?;
            let mut s = w.dot(&w.t());
            let media = model.sigma_media();
            s.zip_mut_with(&media, |a, b| *a += b);
            Some(s)
        }
        CouplingModel::BandLimited { .. } => None,
    }
}

fn sigma_prime_analytic(model: &CavityModel, z: C64) -> Option<Array2<C64>> {
    match &model.coupling {
        CouplingModel::Constant { .. } | CouplingModel::GaussianRandom { .. } => {
            let n = model.n_modes();
            Some(Array2::zeros((n, n)))
        }
        CouplingModel::Analytic1d { .. } => {
            let w = model.coupling.eval_analytic(z)?;
            let wp = model.coupling.derivative_analytic(z)?;
            let s = wp.dot(&w.t()) + w.dot(&wp.t());
            Some(s)
        }
        CouplingModel::BandLimited { .. } => None,
    }
}

/// D(z) continued off the real axis (Markov/analytic couplings only).
fn response_analytic(model: &CavityModel, z: C64) -> Option<Array2<C64>> {
    let n = model.n_modes();
    let sigma = sigma_analytic(model, z)?;
    let mut d = sigma.mapv(|s| C64::i() * std::f64::consts::PI * s);
    for l in 0..n {
        d[[l, l]] += z - model.spectrum.omegas()[l];
    }
    Some(d)
}

fn response_prime_analytic(model: &CavityModel, z: C64) -> Option<Array2<C64>> {
    let n = model.n_modes();
    let sp = sigma_prime_analytic(model, z)?;
    let mut d = sp.mapv(|s| C64::i() * std::f64::consts::PI * s);
    for l in 0..n {
        d[[l, l]] += C64::new(1.0, 0.0);
    }
    Some(d)
}

fn newton_refine_pole(
    model: &CavityModel,
    seed: C64,
    tol: f64,
    max_iter: usize,
) -> Result<C64> {
    let mut z = seed;
    let mut last_step = f64::INFINITY;
    for _ in 0..max_iter {
        let d = response_analytic(model, z).ok_or_else(|| Error::PoleRefinement {
            msg: "coupling has no analytic continuation".into(),
            last_iterate: z,
            last_step,
        })?;
        let dp = response_prime_analytic(model, z).expect("same continuation support as D");
        let (u, s, vt) = d.svd(true, true)?;
        let u = u.expect("left singular vectors requested");
        let vt = vt.expect("right singular vectors requested");
        let n = s.len();
        let smin = s[n - 1];
        // Smallest singular triplet: u† D v = σ_min exactly; frozen u, v give
        // the locally holomorphic scalar whose Newton step we take.
        let uh = u.column(n - 1).mapv(|x| x.conj());
        let v = vt.row(n - 1).mapv(|x| x.conj());
        let denom: C64 = uh
            .iter()
            .enumerate()
            .map(|(i, ui)| {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += *ui * dp[[i, j]] * v[j];
                }
                acc
            })
            .sum();
        if denom.norm() < 1e-300 {
            return Err(Error::PoleRefinement {
                msg: "vanishing Newton denominator (defective pole?)".into(),
                last_iterate: z,
                last_step,
            });
        }
        let step = -C64::new(smin, 0.0) / denom;
        z += step;
        last_step = step.norm();
        if last_step < tol * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(Error::PoleRefinement {
        msg: format!("no convergence after {max_iter} iterations"),
        last_iterate: z,
        last_step,
    })
}

/// Find the resonance poles of the model.
pub fn find_poles(model: &CavityModel, method: PoleMethod, qs: &QuadSettings) -> Result<PoleSet> {
    let (omega_ref, refine) = match method {
        PoleMethod::Markov { omega_ref } => (omega_ref, None),
        PoleMethod::NewtonRefined {
            omega_ref,
            tol,
            max_iter,
        } => (omega_ref, Some((tol, max_iter))),
    };
    let h = effective_hamiltonian(model, omega_ref, qs)?;
    let eig = eigen_biorthogonal(&h, CLUSTER_TOL)?;

    let mut poles = eig.values.clone();
    let mut refined = false;
    if let Some((tol, max_iter)) = refine {
        for k in 0..poles.len() {
            poles[k] = newton_refine_pole(model, poles[k], tol, max_iter)?;
        }
        refined = true;
    }

    // Refinement can reorder; sort poles (with their vectors) again.
    let n = poles.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        poles[i]
            .re
            .total_cmp(&poles[j].re)
            .then(poles[i].im.total_cmp(&poles[j].im))
    });
    let poles = Array1::from_iter(order.iter().map(|&i| poles[i]));
    let widths = poles.mapv(|p| -2.0 * p.im);
    let mut right = Array2::<C64>::zeros((n, n));
    let mut left = Array2::<C64>::zeros((n, n));
    let mut residue_norms = Array1::<f64>::zeros(n);
    for (k, &i) in order.iter().enumerate() {
        right.column_mut(k).assign(&eig.right.column(i));
        left.column_mut(k).assign(&eig.left.column(i));
        residue_norms[k] = eig.residue_norms[i];
    }
    let remap: Vec<usize> = {
        let mut inv = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        inv
    };
    let degenerate_clusters = eig
        .clusters
        .iter()
        .map(|c| {
            let mut mapped: Vec<usize> = c.iter().map(|&i| remap[i]).collect();
            mapped.sort_unstable();
            mapped
        })
        .collect();

    Ok(PoleSet {
        poles,
        widths,
        right,
        left,
        residue_norms,
        degenerate_clusters,
        refined,
    })
}

/// Spectral resolution of the inverse response at a real frequency:
/// D⁻¹(ω) = Σ_k R_k L_k† / (ω − p_k). Valid for Markov couplings, where the
/// pole expansion is exact.
pub fn inverse_from_poles(poles: &PoleSet, omega: f64) -> Array2<C64> {
    let n = poles.poles.len();
    let mut out = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        let denom = C64::new(omega, 0.0) - poles.poles[k];
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += poles.right[[i, k]] * poles.left[[j, k]].conj() / denom;
            }
        }
    }
    out
}

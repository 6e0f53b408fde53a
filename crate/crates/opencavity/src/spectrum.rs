//! Mode spectra, channel-coupling models, media couplings, and the assembled
//! [`CavityModel`] that the response/scattering/dynamics layers consume.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg::adjoint;
use crate::{rmt, C64, Error, Result};

/// Interior mode frequencies: finite, strictly positive, sorted ascending
/// (exact degeneracies are allowed).
#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    omegas: Array1<f64>,
}

impl ModeSpectrum {
    fn validate(omegas: Array1<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        for (i, &w) in omegas.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidSpectrum(format!(
                    "mode {i} has frequency {w}; frequencies must be finite and positive"
                )));
            }
            if i > 0 && w < omegas[i - 1] {
                return Err(Error::InvalidSpectrum(format!(
                    "frequencies must be sorted ascending; mode {i} ({w}) < mode {} ({})",
                    i - 1,
                    omegas[i - 1]
                )));
            }
        }
        Ok(ModeSpectrum { omegas })
    }

    pub fn n_modes(&self) -> usize {
        self.omegas.len()
    }

    pub fn omegas(&self) -> &Array1<f64> {
        &self.omegas
    }

    /// Evenly spaced comb ω_k = ω_min + k·δ, k = 0..n.
    pub fn comb(omega_min: f64, delta: f64, n: usize) -> Result<Self> {
        if !(omega_min.is_finite() && omega_min > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "comb start {omega_min} must be finite and positive"
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "comb spacing {delta} must be finite and positive"
            )));
        }
        Self::validate(Array1::from_iter(
            (0..n).map(|k| omega_min + delta * k as f64),
        ))
    }

    /// Explicit list; must already be sorted ascending.
    pub fn explicit(freqs: Vec<f64>) -> Result<Self> {
        Self::validate(Array1::from_vec(freqs))
    }

    /// Eigenvalues of a GOE sample mapped affinely into the positive band
    /// [center − half_width, center + half_width] (sampled extremes land on
    /// the band edges, so containment is exact).
    pub fn goe_band(n: usize, seed: u64, center: f64, half_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpectrum(
                "GOE spectrum needs at least 2 modes".into(),
            ));
        }
        if !(half_width > 0.0 && center - half_width > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "GOE band [{}, {}] must be positive",
                center - half_width,
                center + half_width
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eigs = rmt::goe_eigenvalues(n, &mut rng)?;
        let (lo, hi) = (eigs[0], eigs[n - 1]);
        let scale = 2.0 * half_width / (hi - lo);
        let mapped = eigs.mapv(|x| center - half_width + (x - lo) * scale);
        Self::validate(mapped)
    }
}

/// Frequency-resolved coupling amplitudes 𝒲_λm(ω) between N interior modes
/// and M scattering channels.
#[derive(Debug, Clone)]
pub enum CouplingModel {
    /// Frequency-independent amplitudes (wide-band / Markov regime).
    Constant { w: Array2<C64> },
    /// Frequency-independent amplitudes drawn i.i.d. from N(0, σ²).
    GaussianRandom { w: Array2<C64>, sigma: f64, seed: u64 },
    /// Constant amplitudes multiplied by a raised-cosine window supported on
    /// [lo, hi]; `edge` = 0 degenerates to a hard window.
    BandLimited {
        w: Array2<C64>,
        lo: f64,
        hi: f64,
        edge: f64,
    },
    /// Single-channel coupling of a 1D mirror–barrier cavity:
    /// 𝒲_λ(ω) = u_λ(a) · sqrt(ω / (2π ω_λ)), with u_λ(a) the normalized
    /// interior mode amplitude at the opening.
    Analytic1d {
        omega_modes: Array1<f64>,
        boundary: Array1<f64>,
    },
}

fn check_finite(w: &Array2<C64>, what: &str) -> Result<()> {
    for z in w.iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidCoupling(format!(
                "{what} contains a non-finite amplitude"
            )));
        }
    }
    Ok(())
}

impl CouplingModel {
    pub fn constant(w: Array2<C64>) -> Result<Self> {
        check_finite(&w, "constant coupling")?;
        Ok(CouplingModel::Constant { w })
    }

    pub fn gaussian_random(n_modes: usize, n_channels: usize, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidCoupling(format!(
                "gaussian coupling sigma {sigma} must be finite and non-negative"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::InvalidCoupling(e.to_string()))?;
        // Row-major fill order makes the draw independent of storage details.
        let mut w = Array2::<C64>::zeros((n_modes, n_channels));
        for i in 0..n_modes {
            for j in 0..n_channels {
                w[[i, j]] = C64::new(if sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 }, 0.0);
            }
        }
        Ok(CouplingModel::GaussianRandom { w, sigma, seed })
    }

    pub fn band_limited(w: Array2<C64>, lo: f64, hi: f64, edge: f64) -> Result<Self> {
        check_finite(&w, "band-limited coupling")?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidCoupling(format!("bad band [{lo}, {hi}]")));
        }
        if !(edge >= 0.0 && 2.0 * edge <= hi - lo) {
            return Err(Error::InvalidCoupling(format!(
                "edge width {edge} must satisfy 0 ≤ 2·edge ≤ band width {}",
                hi - lo
            )));
        }
        Ok(CouplingModel::BandLimited { w, lo, hi, edge })
    }

    pub fn n_modes(&self) -> usize {
        match self {
            CouplingModel::Constant { w }
            | CouplingModel::GaussianRandom { w, .. }
            | CouplingModel::BandLimited { w, .. } => w.nrows(),
            CouplingModel::Analytic1d { omega_modes, .. } => omega_modes.len(),
        }
    }

    pub fn n_channels(&self) -> usize {
        match self {
            CouplingModel::Constant { w }
            | CouplingModel::GaussianRandom { w, .. }
            | CouplingModel::BandLimited { w, .. } => w.ncols(),
            CouplingModel::Analytic1d { .. } => 1,
        }
    }

    /// True when the amplitudes carry no frequency dependence, so the
    /// wide-band (Markov) convention Δ ≡ 0 applies and Σ is constant.
    pub fn is_markov(&self) -> bool {
        matches!(
            self,
            CouplingModel::Constant { .. } | CouplingModel::GaussianRandom { .. }
        )
    }

    /// Declared support of the frequency dependence, if finite.
    pub fn band(&self) -> Option<(f64, f64)> {
        match self {
            CouplingModel::BandLimited { lo, hi, .. } => Some((*lo, *hi)),
            _ => None,
        }
    }

    fn window(lo: f64, hi: f64, edge: f64, omega: f64) -> f64 {
        if omega <= lo || omega >= hi {
            return if omega == lo || omega == hi {
                if edge == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                0.0
            };
        }
        if edge == 0.0 {
            return 1.0;
        }
        if omega < lo + edge {
            0.5 * (1.0 - (std::f64::consts::PI * (omega - lo) / edge).cos())
        } else if omega > hi - edge {
            0.5 * (1.0 - (std::f64::consts::PI * (hi - omega) / edge).cos())
        } else {
            1.0
        }
    }

    /// Coupling matrix at a real frequency.
    pub fn eval(&self, omega: f64) -> Array2<C64> {
        match self {
            CouplingModel::Constant { w } | CouplingModel::GaussianRandom { w, .. } => w.clone(),
            CouplingModel::BandLimited { w, lo, hi, edge } => {
                let g = Self::window(*lo, *hi, *edge, omega);
                w.mapv(|z| z * g)
            }
            CouplingModel::Analytic1d {
                omega_modes,
                boundary,
            } => {
                let n = omega_modes.len();
                let mut w = Array2::<C64>::zeros((n, 1));
                if omega > 0.0 {
                    for l in 0..n {
                        let val = boundary[l]
                            * (omega / (2.0 * std::f64::consts::PI * omega_modes[l])).sqrt();
                        w[[l, 0]] = C64::new(val, 0.0);
                    }
                }
                w
            }
        }
    }

    /// Analytic continuation of the coupling to complex frequency, for pole
    /// refinement. `None` when the model has no analytic continuation (the
    /// raised-cosine window is only piecewise smooth).
    pub fn eval_analytic(&self, z: C64) -> Option<Array2<C64>> {
        match self {
            CouplingModel::Constant { w } | CouplingModel::GaussianRandom { w, .. } => {
                Some(w.clone())
            }
            CouplingModel::BandLimited { .. } => None,
            CouplingModel::Analytic1d {
                omega_modes,
                boundary,
            } => {
                let n = omega_modes.len();
                let mut w = Array2::<C64>::zeros((n, 1));
                for l in 0..n {
                    let val = (z / (2.0 * std::f64::consts::PI * omega_modes[l])).sqrt()
                        * boundary[l];
                    w[[l, 0]] = val;
                }
                Some(w)
            }
        }
    }

    /// d𝒲/dω at complex frequency, where an analytic form exists.
    pub fn derivative_analytic(&self, z: C64) -> Option<Array2<C64>> {
        match self {
            CouplingModel::Constant { w } | CouplingModel::GaussianRandom { w, .. } => {
                Some(Array2::zeros(w.raw_dim()))
            }
            CouplingModel::BandLimited { .. } => None,
            CouplingModel::Analytic1d {
                omega_modes,
                boundary,
            } => {
                let n = omega_modes.len();
                let mut w = Array2::<C64>::zeros((n, 1));
                for l in 0..n {
                    // d/dz sqrt(z/(2πω_λ)) = 1/(2 sqrt(2π ω_λ z))
                    let val = boundary[l]
                        / ((2.0 * std::f64::consts::PI * omega_modes[l] * z).sqrt() * 2.0);
                    w[[l, 0]] = val;
                }
                Some(w)
            }
        }
    }
}

/// Couplings 𝒦 (absorbing) and Γ (amplifying) to broadband media, with the
/// mean thermal occupations that drive their noise.
#[derive(Debug, Clone)]
pub struct MediaCouplings {
    pub kappa: Array2<C64>,
    pub gamma: Array2<C64>,
    pub n_abs: f64,
    pub n_amp: f64,
}

impl MediaCouplings {
    pub fn new(kappa: Array2<C64>, gamma: Array2<C64>, n_abs: f64, n_amp: f64) -> Result<Self> {
        check_finite(&kappa, "absorbing coupling")?;
        check_finite(&gamma, "amplifying coupling")?;
        if kappa.nrows() != gamma.nrows() {
            return Err(Error::Dimension(format!(
                "absorbing ({}) and amplifying ({}) couplings disagree on mode count",
                kappa.nrows(),
                gamma.nrows()
            )));
        }
        if !(n_abs.is_finite() && n_abs >= 0.0 && n_amp.is_finite() && n_amp >= 0.0) {
            return Err(Error::InvalidCoupling(
                "media occupations must be finite and non-negative".into(),
            ));
        }
        Ok(MediaCouplings {
            kappa,
            gamma,
            n_abs,
            n_amp,
        })
    }

    /// No media: zero-channel couplings.
    pub fn none(n_modes: usize) -> Self {
        MediaCouplings {
            kappa: Array2::zeros((n_modes, 0)),
            gamma: Array2::zeros((n_modes, 0)),
            n_abs: 0.0,
            n_amp: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.ncols() == 0 && self.gamma.ncols() == 0
    }
}

/// A cavity: mode spectrum, channel couplings, and (optionally) media.
#[derive(Debug, Clone)]
pub struct CavityModel {
    pub spectrum: ModeSpectrum,
    pub coupling: CouplingModel,
    pub media: MediaCouplings,
}

impl CavityModel {
    pub fn new(
        spectrum: ModeSpectrum,
        coupling: CouplingModel,
        media: Option<MediaCouplings>,
    ) -> Result<Self> {
        let n = spectrum.n_modes();
        if coupling.n_modes() != n {
            return Err(Error::Dimension(format!(
                "coupling has {} mode rows but spectrum has {} modes",
                coupling.n_modes(),
                n
            )));
        }
        let media = media.unwrap_or_else(|| MediaCouplings::none(n));
        if media.kappa.nrows() != n {
            return Err(Error::Dimension(format!(
                "media couplings have {} mode rows but spectrum has {} modes",
                media.kappa.nrows(),
                n
            )));
        }
        Ok(CavityModel {
            spectrum,
            coupling,
            media,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.spectrum.n_modes()
    }

    pub fn n_channels(&self) -> usize {
        self.coupling.n_channels()
    }

    /// Total damping kernel Σ(ω) = 𝒲𝒲† + 𝒦𝒦† − ΓΓ† at a real frequency.
    pub fn sigma(&self, omega: f64) -> Array2<C64> {
        let w = self.coupling.eval(omega);
        let mut s = w.dot(&adjoint(&w));
        if !self.media.is_empty() {
            s = s + self.media.kappa.dot(&adjoint(&self.media.kappa))
                - self.media.gamma.dot(&adjoint(&self.media.gamma));
        }
        s
    }

    /// Constant part of Σ contributed by the media alone.
    pub fn sigma_media(&self) -> Array2<C64> {
        let n = self.n_modes();
        if self.media.is_empty() {
            Array2::zeros((n, n))
        } else {
            self.media.kappa.dot(&adjoint(&self.media.kappa))
                - self.media.gamma.dot(&adjoint(&self.media.gamma))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn comb_builds_evenly_spaced_modes() {
        let s = ModeSpectrum::comb(1.0, 1.0, 3).unwrap();
        assert_eq!(s.omegas().to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spectrum_rejects_nonpositive_unsorted_nonfinite() {
        assert!(ModeSpectrum::explicit(vec![0.0, 1.0]).is_err());
        assert!(ModeSpectrum::explicit(vec![-1.0, 1.0]).is_err());
        assert!(ModeSpectrum::explicit(vec![2.0, 1.0]).is_err());
        assert!(ModeSpectrum::explicit(vec![1.0, f64::NAN]).is_err());
        assert!(ModeSpectrum::explicit(vec![]).is_err());
        // Exact degeneracy is allowed.
        assert!(ModeSpectrum::explicit(vec![1.0, 1.0, 2.0]).is_ok());
    }

    #[test]
    fn goe_band_is_contained_and_deterministic() {
        let a = ModeSpectrum::goe_band(200, 7, 100.0, 10.0).unwrap();
        let b = ModeSpectrum::goe_band(200, 7, 100.0, 10.0).unwrap();
        let c = ModeSpectrum::goe_band(200, 8, 100.0, 10.0).unwrap();
        assert_eq!(a.n_modes(), 200);
        assert!(a.omegas().iter().all(|&w| (90.0..=110.0).contains(&w)));
        // Bit-identical across calls with the same seed.
        assert_eq!(a.omegas().to_vec(), b.omegas().to_vec());
        assert_ne!(a.omegas().to_vec(), c.omegas().to_vec());
    }

    #[test]
    fn goe_band_rejects_nonpositive_band() {
        assert!(ModeSpectrum::goe_band(10, 1, 5.0, 6.0).is_err());
    }

    #[test]
    fn constant_coupling_is_frequency_independent() {
        let w = array![[C64::new(0.1, 0.0)], [C64::new(-0.2, 0.05)]];
        let c = CouplingModel::constant(w.clone()).unwrap();
        assert_eq!(c.eval(1.0), c.eval(57.3));
        assert!(c.is_markov());
    }

    #[test]
    fn gaussian_coupling_is_seed_deterministic() {
        let a = CouplingModel::gaussian_random(5, 2, 0.1, 33).unwrap();
        let b = CouplingModel::gaussian_random(5, 2, 0.1, 33).unwrap();
        let c = CouplingModel::gaussian_random(5, 2, 0.1, 34).unwrap();
        assert_eq!(a.eval(1.0), b.eval(1.0));
        assert_ne!(a.eval(1.0), c.eval(1.0));
    }

    #[test]
    fn band_window_vanishes_outside_and_is_flat_inside() {
        let w = array![[C64::new(1.0, 0.0)]];
        let c = CouplingModel::band_limited(w, 0.5, 1.5, 0.2).unwrap();
        assert_eq!(c.eval(0.4)[[0, 0]], C64::new(0.0, 0.0));
        assert_eq!(c.eval(1.6)[[0, 0]], C64::new(0.0, 0.0));
        assert_eq!(c.eval(1.0)[[0, 0]], C64::new(1.0, 0.0));
        // Halfway up the cosine ramp.
        let mid = c.eval(0.6)[[0, 0]].re;
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn analytic_1d_scales_as_sqrt_omega() {
        let c = CouplingModel::Analytic1d {
            omega_modes: array![2.0],
            boundary: array![0.3],
        };
        let w1 = c.eval(2.0)[[0, 0]].re;
        let w4 = c.eval(8.0)[[0, 0]].re;
        assert!((w4 / w1 - 2.0).abs() < 1e-12);
        // Derivative matches finite differences.
        let z = C64::new(3.0, 0.0);
        let d = c.derivative_analytic(z).unwrap()[[0, 0]];
        let h = 1e-6;
        let fd = (c.eval(3.0 + h)[[0, 0]] - c.eval(3.0 - h)[[0, 0]]) / (2.0 * h);
        assert!((d - fd).norm() < 1e-9);
    }

    #[test]
    fn model_rejects_dimension_mismatch() {
        let s = ModeSpectrum::comb(1.0, 1.0, 3).unwrap();
        let w = array![[C64::new(0.1, 0.0)], [C64::new(0.1, 0.0)]]; // 2 modes
        let c = CouplingModel::constant(w).unwrap();
        assert!(matches!(
            CavityModel::new(s, c, None),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn media_dimensions_checked() {
        let s = ModeSpectrum::comb(1.0, 1.0, 2).unwrap();
        let c = CouplingModel::gaussian_random(2, 1, 0.1, 0).unwrap();
        let kappa = Array2::<C64>::zeros((3, 1)); // wrong mode count
        let media = MediaCouplings::new(kappa, Array2::zeros((3, 0)), 0.0, 0.0).unwrap();
        assert!(CavityModel::new(s, c, Some(media)).is_err());
    }
}

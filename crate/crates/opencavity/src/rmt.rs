//! Random-matrix ensembles of cavities and the spectral statistics used to
//! test them: semicircle density, nearest-neighbour spacings against the
//! Wigner surmise, width statistics against Porter–Thomas, and ensemble
//! decay-rate distributions against the golden rule.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::emission::{decay_rate_direct, AtomSpec};
use crate::resonances::{find_poles, PoleMethod};
use crate::response::QuadSettings;
use crate::spectrum::{CavityModel, CouplingModel, ModeSpectrum};
use crate::{C64, Error, Result};

/// Decorrelated child seed for stream `index` of a master seed (SplitMix64
/// mixing). Used wherever an ensemble or trajectory bundle needs independent
/// reproducible streams.
pub fn derive_stream_seed(master: u64, index: u64) -> u64 {
    let mut s = master ^ index.wrapping_mul(0xA076_1D64_78BD_642F);
    let round = |state: &mut u64| {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let a = round(&mut s);
    let b = round(&mut s);
    a ^ b.rotate_left(32)
}

/// Symmetric GOE sample scaled so the eigenvalue density converges to the
/// unit semicircle on [−1, 1]: diagonal variance 1/(2N), off-diagonal 1/(4N).
pub fn sample_goe(n: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut h = Array2::<f64>::zeros((n, n));
    let sd_diag = (1.0 / (2.0 * n as f64)).sqrt();
    let sd_off = (1.0 / (4.0 * n as f64)).sqrt();
    for i in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        h[[i, i]] = sd_diag * x;
        for j in (i + 1)..n {
            let x: f64 = rng.sample(StandardNormal);
            h[[i, j]] = sd_off * x;
            h[[j, i]] = h[[i, j]];
        }
    }
    h
}

/// Ascending eigenvalues of one GOE sample (support → [−1, 1] as N grows).
pub fn goe_eigenvalues(n: usize, rng: &mut impl Rng) -> Result<Array1<f64>> {
    let h = sample_goe(n, rng);
    let (vals, _) = h.eigh(UPLO::Lower)?;
    Ok(vals)
}

/// Semicircle eigenvalue density on [−1, 1], normalized to 1.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        2.0 / std::f64::consts::PI * (1.0 - x * x).sqrt()
    }
}

/// Semicircle cumulative distribution.
pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) / std::f64::consts::PI
    }
}

/// ℓ¹ distance between the histogram of `eigs` (binned over [−1.1, 1.1],
/// outliers clipped into the end bins) and the semicircle law.
pub fn semicircle_l1_distance(eigs: &Array1<f64>, n_bins: usize) -> f64 {
    let (lo, hi) = (-1.1, 1.1);
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    for &x in eigs.iter() {
        let b = (((x - lo) / width).floor() as isize).clamp(0, n_bins as isize - 1);
        counts[b as usize] += 1;
    }
    let n = eigs.len() as f64;
    let mut l1 = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let a = lo + b as f64 * width;
        let mass = semicircle_cdf(a + width) - semicircle_cdf(a);
        l1 += (c as f64 / n - mass).abs();
    }
    l1
}

/// Map raw levels onto unit mean spacing by fitting a smooth polynomial of
/// `degree` to the cumulative counting staircase and evaluating it at the
/// levels. Levels must be sorted ascending.
pub fn unfold(levels: &Array1<f64>, degree: usize) -> Result<Array1<f64>> {
    let n = levels.len();
    if n < degree + 2 {
        return Err(Error::InvalidSpectrum(format!(
            "{n} levels cannot support a degree-{degree} unfolding fit"
        )));
    }
    if levels.windows(2).into_iter().any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpectrum(
            "levels must be sorted ascending for unfolding".into(),
        ));
    }
    // Scale abscissa to [−1, 1] to keep the normal equations conditioned.
    let (lo, hi) = (levels[0], levels[n - 1]);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let scale = |x: f64| 2.0 * (x - lo) / span - 1.0;

    let cols = degree + 1;
    let mut a = Array2::<f64>::zeros((n, cols));
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let x = scale(levels[i]);
        let mut p = 1.0;
        for c in 0..cols {
            a[[i, c]] = p;
            p *= x;
        }
        y[i] = i as f64 + 0.5;
    }
    // Solve the normal equations AᵀA c = Aᵀy via eigen-decomposition of the
    // (symmetric, modest-size) Gram matrix with pseudo-inverse cutoff.
    let at = a.t();
    let gram = at.dot(&a);
    let rhs = at.dot(&y);
    let (vals, vecs) = gram.eigh(UPLO::Lower)?;
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = vmax * 1e-12;
    let mut coeff = Array1::<f64>::zeros(cols);
    for k in 0..cols {
        if vals[k] > cutoff {
            let proj = vecs.column(k).dot(&rhs) / vals[k];
            coeff = coeff + vecs.column(k).mapv(|v| v * proj);
        }
    }
    let mut out = Array1::<f64>::zeros(n);
    for i in 0..n {
        let x = scale(levels[i]);
        let mut p = 1.0;
        let mut acc = 0.0;
        for c in 0..cols {
            acc += coeff[c] * p;
            p *= x;
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Nearest-neighbour spacings of unfolded levels, restricted to the central
/// `keep_central` fraction (edge levels unfold poorly), normalized to unit
/// sample mean.
pub fn nearest_neighbor_spacings(unfolded: &Array1<f64>, keep_central: f64) -> Result<Vec<f64>> {
    if !(0.0 < keep_central && keep_central <= 1.0) {
        return Err(Error::InvalidSpectrum(format!(
            "central fraction {keep_central} must lie in (0, 1]"
        )));
    }
    let n = unfolded.len();
    if n < 4 {
        return Err(Error::InvalidSpectrum(
            "need at least 4 levels for spacing statistics".into(),
        ));
    }
    let skip = ((n as f64 * (1.0 - keep_central)) / 2.0).floor() as usize;
    let hi = n - skip;
    let mut s: Vec<f64> = (skip..hi - 1)
        .map(|i| unfolded[i + 1] - unfolded[i])
        .collect();
    if s.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidSpectrum(
            "unfolding is non-monotone on the kept window".into(),
        ));
    }
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    if mean <= 0.0 {
        return Err(Error::InvalidSpectrum("degenerate spacings".into()));
    }
    for x in s.iter_mut() {
        *x /= mean;
    }
    Ok(s)
}

/// Level-repulsion surmise for orthogonal-class spacings:
/// F(s) = 1 − exp(−π s²/4).
pub fn wigner_surmise_cdf(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        1.0 - (-std::f64::consts::PI * s * s / 4.0).exp()
    }
}

/// CDF of the single-channel width distribution (χ² with one degree of
/// freedom, mean `mean`): F(x) = erf(√(x / 2·mean)).
pub fn porter_thomas_cdf(x: f64, mean: f64) -> f64 {
    if x <= 0.0 || mean <= 0.0 {
        0.0
    } else {
        libm::erf((x / (2.0 * mean)).sqrt())
    }
}

/// Kolmogorov–Smirnov statistic D_n = sup |F̂_n − F| of the samples against
/// a reference CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Large-sample KS acceptance threshold at significance `alpha`:
/// D_crit = √(−ln(α/2)/2) / √n  (1.3581/√n at α = 0.05).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// An ensemble of chaotic-cavity models: GOE spectra mapped onto a positive
/// band, with real Gaussian channel couplings.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub n_modes: usize,
    pub n_channels: usize,
    /// Band centre of the mapped spectrum.
    pub center: f64,
    /// Half-width of the mapped spectrum.
    pub half_width: f64,
    /// Per-element standard deviation of the coupling amplitudes.
    pub coupling_sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    /// Mean modal density at the band centre, 2N/(π·half_width).
    pub fn modal_density_center(&self) -> f64 {
        2.0 * self.n_modes as f64 / (std::f64::consts::PI * self.half_width)
    }
}

/// Draw the ensemble. Sample `i` uses child seeds (2i, 2i+1) of the master
/// seed for its spectrum and couplings, so any sample can be regenerated in
/// isolation.
pub fn sample_models(spec: &EnsembleSpec) -> Result<Vec<CavityModel>> {
    if spec.n_samples == 0 {
        return Err(Error::InvalidSpectrum("empty ensemble".into()));
    }
    let mut out = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let spectrum = ModeSpectrum::goe_band(
            spec.n_modes,
            derive_stream_seed(spec.seed, 2 * i as u64),
            spec.center,
            spec.half_width,
        )?;
        let coupling = CouplingModel::gaussian_random(
            spec.n_modes,
            spec.n_channels,
            spec.coupling_sigma,
            derive_stream_seed(spec.seed, 2 * i as u64 + 1),
        )?;
        out.push(CavityModel::new(spectrum, coupling, None)?);
    }
    Ok(out)
}

/// Resonance widths pooled over an ensemble, together with their first-order
/// perturbative values 2π(𝒲𝒲†)_λλ, both restricted to the central fraction
/// of each sample's spectrum.
#[derive(Debug)]
pub struct WidthStatistics {
    pub widths: Vec<f64>,
    pub perturbative: Vec<f64>,
    pub mean: f64,
}

pub fn ensemble_width_statistics(
    spec: &EnsembleSpec,
    keep_central: f64,
) -> Result<WidthStatistics> {
    if !(0.0 < keep_central && keep_central <= 1.0) {
        return Err(Error::InvalidSpectrum(format!(
            "central fraction {keep_central} must lie in (0, 1]"
        )));
    }
    let models = sample_models(spec)?;
    let qs = QuadSettings::default();
    let n = spec.n_modes;
    let skip = ((n as f64 * (1.0 - keep_central)) / 2.0).floor() as usize;
    let mut widths = Vec::new();
    let mut perturbative = Vec::new();
    for m in &models {
        let poles = find_poles(m, PoleMethod::Markov { omega_ref: None }, &qs)?;
        // Poles and modes are both sorted by (real) frequency; in the weak
        // coupling regime the index pairing is stable.
        let w = m.coupling.eval(1.0);
        for l in skip..(n - skip) {
            widths.push(poles.widths[l]);
            let diag: f64 = (0..spec.n_channels).map(|c| w[[l, c]].norm_sqr()).sum();
            perturbative.push(2.0 * std::f64::consts::PI * diag);
        }
    }
    let mean = widths.iter().sum::<f64>() / widths.len().max(1) as f64;
    Ok(WidthStatistics {
        widths,
        perturbative,
        mean,
    })
}

/// Emitter decay rates pooled over an ensemble, with the golden-rule mean
/// they should fluctuate around.
#[derive(Debug)]
pub struct DecayRateDistribution {
    /// One rate per (sample, emitter draw, grid frequency).
    pub rates: Vec<f64>,
    pub mean: f64,
    /// π ω₀ ⟨|η|²⟩ ρ_modal(ω₀) at the band centre.
    pub golden_rule: f64,
}

/// Sample emitter decay rates across the ensemble. Each ensemble member gets
/// `n_emitters` random emitters (real Gaussian η of per-mode deviation
/// `eta_sigma`), each evaluated on `n_grid` frequencies spanning one mean
/// level spacing around the band centre — the grid average removes the
/// Lorentzian comb structure that individual frequencies would see.
pub fn decay_rate_distribution(
    spec: &EnsembleSpec,
    eta_sigma: f64,
    n_emitters: usize,
    n_grid: usize,
) -> Result<DecayRateDistribution> {
    if n_emitters == 0 || n_grid == 0 {
        return Err(Error::InvalidSpectrum(
            "need at least one emitter draw and one grid frequency".into(),
        ));
    }
    if !(eta_sigma.is_finite() && eta_sigma > 0.0) {
        return Err(Error::InvalidCoupling(format!(
            "emitter coupling deviation {eta_sigma} must be positive"
        )));
    }
    let models = sample_models(spec)?;
    let qs = QuadSettings::default();
    let rho = spec.modal_density_center();
    let mean_spacing = 1.0 / rho;
    let mut rates = Vec::with_capacity(spec.n_samples * n_emitters * n_grid);
    for (i, m) in models.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(
            spec.seed ^ 0x00D1_5501_7E44_55AA,
            i as u64,
        ));
        for _ in 0..n_emitters {
            let eta = Array1::from_iter((0..spec.n_modes).map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                C64::new(eta_sigma * x, 0.0)
            }));
            for g in 0..n_grid {
                let frac = (g as f64 + 0.5) / n_grid as f64 - 0.5;
                let omega0 = spec.center + frac * mean_spacing;
                let atom = AtomSpec::new(omega0, eta.clone())?;
                let r = decay_rate_direct(m, &atom, &qs)?;
                rates.push(r.gamma);
            }
        }
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let golden_rule = std::f64::consts::PI * spec.center * eta_sigma * eta_sigma * rho;
    Ok(DecayRateDistribution {
        rates,
        mean,
        golden_rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_seeds_are_deterministic_and_distinct() {
        assert_eq!(derive_stream_seed(7, 3), derive_stream_seed(7, 3));
        assert_ne!(derive_stream_seed(7, 3), derive_stream_seed(7, 4));
        assert_ne!(derive_stream_seed(7, 3), derive_stream_seed(8, 3));
    }

    #[test]
    fn goe_eigenvalues_follow_the_semicircle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eigs = goe_eigenvalues(1000, &mut rng).unwrap();
        let l1 = semicircle_l1_distance(&eigs, 16);
        assert!(l1 < 0.15, "ℓ¹ distance {l1}");
        // Support is near [−1, 1].
        assert!(eigs[0] > -1.15 && eigs[999] < 1.15);
    }

    #[test]
    fn goe_matrix_is_symmetric_with_expected_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 300;
        let h = sample_goe(n, &mut rng);
        let mut off_sq = 0.0;
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(h[[i, j]], h[[j, i]]);
                off_sq += h[[i, j]] * h[[i, j]];
                count += 1;
            }
        }
        let var = off_sq / count as f64;
        let expect = 1.0 / (4.0 * n as f64);
        assert!((var / expect - 1.0).abs() < 0.05, "variance ratio {}", var / expect);
    }

    #[test]
    fn unfolding_a_uniform_comb_gives_unit_spacings() {
        let levels = Array1::from_iter((0..120).map(|k| 3.0 + 0.25 * k as f64));
        let unfolded = unfold(&levels, 7).unwrap();
        let s = nearest_neighbor_spacings(&unfolded, 0.5).unwrap();
        for &x in &s {
            assert!((x - 1.0).abs() < 1e-8, "spacing {x}");
        }
    }

    #[test]
    fn goe_spacings_match_the_level_repulsion_surmise() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let eigs = goe_eigenvalues(400, &mut rng).unwrap();
        let unfolded = unfold(&eigs, 7).unwrap();
        let s = nearest_neighbor_spacings(&unfolded, 0.5).unwrap();
        let d = ks_statistic(&s, wigner_surmise_cdf);
        let crit = ks_critical(s.len(), 0.05);
        assert!(d < crit, "KS {d} ≥ critical {crit} with {} spacings", s.len());
    }

    #[test]
    fn poisson_comb_fails_the_surmise() {
        // Uniform random (Poisson-like) levels must NOT look level-repelled.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut levels: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.0)).collect();
        levels.sort_by(f64::total_cmp);
        let unfolded = unfold(&Array1::from_vec(levels), 7).unwrap();
        let s = nearest_neighbor_spacings(&unfolded, 0.5).unwrap();
        let d = ks_statistic(&s, wigner_surmise_cdf);
        assert!(d > ks_critical(s.len(), 0.05), "Poisson spacings passed: {d}");
    }

    #[test]
    fn weak_coupling_widths_are_porter_thomas() {
        let spec = EnsembleSpec {
            n_modes: 40,
            n_channels: 1,
            center: 10.0,
            half_width: 4.0,
            coupling_sigma: 1e-3,
            n_samples: 30,
            seed: 11,
        };
        let ws = ensemble_width_statistics(&spec, 0.5).unwrap();
        // Exact widths agree with first-order perturbation theory. The
        // second-order correction is an absolute shift of order
        // mean·(width/spacing)², so near-zero χ²₁ widths need the bound
        // floored by a fraction of the ensemble mean.
        for (a, b) in ws.widths.iter().zip(ws.perturbative.iter()) {
            assert!(
                (a - b).abs() < 1e-3 * b.max(0.01 * ws.mean),
                "{a} vs {b}"
            );
        }
        // …and follow the single-channel χ²₁ law.
        let mean = ws.mean;
        let d = ks_statistic(&ws.widths, |x| porter_thomas_cdf(x, mean));
        let crit = ks_critical(ws.widths.len(), 0.05);
        assert!(d < crit, "KS {d} ≥ critical {crit}");
    }

    #[test]
    fn ks_statistic_detects_the_obvious() {
        let uniform: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let d_good = ks_statistic(&uniform, |x| x.clamp(0.0, 1.0));
        assert!(d_good < 0.01);
        let d_bad = ks_statistic(&uniform, |x| (x * x).clamp(0.0, 1.0));
        assert!(d_bad > 0.2);
    }

    #[test]
    fn ensemble_is_reproducible() {
        let spec = EnsembleSpec {
            n_modes: 10,
            n_channels: 2,
            center: 5.0,
            half_width: 2.0,
            coupling_sigma: 0.01,
            n_samples: 3,
            seed: 99,
        };
        let a = sample_models(&spec).unwrap();
        let b = sample_models(&spec).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.spectrum.omegas(), y.spectrum.omegas());
            assert_eq!(x.coupling.eval(1.0), y.coupling.eval(1.0));
        }
    }

    #[test]
    fn mean_decay_rate_tracks_the_golden_rule() {
        let spec = EnsembleSpec {
            n_modes: 80,
            n_channels: 2,
            center: 20.0,
            half_width: 6.0,
            coupling_sigma: 0.05,
            n_samples: 6,
            seed: 4,
        };
        let d = decay_rate_distribution(&spec, 0.01, 4, 16).unwrap();
        let rel = (d.mean - d.golden_rule).abs() / d.golden_rule;
        assert!(rel < 0.2, "mean {} vs golden rule {} (rel {rel})", d.mean, d.golden_rule);
    }
}

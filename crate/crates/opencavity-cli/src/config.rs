//! Config file schema and loading.
//!
//! TOML is the primary encoding; the identical schema is accepted as JSON
//! (files ending in `.json`). Every section is a flat key/value map that
//! mirrors the library constructors, and unknown keys are rejected
//! everywhere so a typo fails loudly instead of silently running defaults.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use opencavity::emission::AtomSpec;
use opencavity::rmt::{derive_stream_seed, EnsembleSpec};
use opencavity::spectrum::{CavityModel, CouplingModel, MediaCouplings, ModeSpectrum};
use opencavity::toy1d::Geometry1D;
use opencavity::C64;

use crate::error::CliError;

/// Stream indices for deriving per-consumer seeds from the master seed, so
/// adding a consumer never shifts the draws of an existing one.
pub const SEED_SPECTRUM: u64 = 1;
pub const SEED_COUPLING: u64 = 2;
pub const SEED_TRAJECTORIES: u64 = 3;
pub const SEED_ENSEMBLE: u64 = 4;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random consumer derives an independent stream.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker-pool cap; absent or 0 means one worker per core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub media: Option<MediaConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom: Option<AtomConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub langevin: Option<LangevinConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toy1d: Option<Toy1dConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

/// Mode frequencies: exactly one of an explicit list, an even comb, or a
/// GOE-sampled band (seeded from the master seed).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comb_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comb_spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comb_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goe_modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goe_center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goe_half_width: Option<f64>,
}

/// Channel coupling amplitudes: either explicit real/imaginary parts (rows =
/// modes, columns = channels) or Gaussian-random entries (seeded). An
/// optional band limit turns explicit amplitudes into a smooth band-limited
/// coupling with cosine roll-off of width `band_edge`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes_re: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes_im: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_edge: Option<f64>,
}

/// Absorbing (`kappa`) and amplifying (`gamma`) media couplings with their
/// thermal occupations. Omitted matrices mean zero channels of that type.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_re: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_im: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_re: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_im: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub n_abs: f64,
    #[serde(default)]
    pub n_amp: f64,
}

/// Emitter: transition frequency and per-mode coupling amplitudes, plus the
/// knobs of the discretized-bath oracle (`--oracle`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub omega0: f64,
    pub eta_re: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_im: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_band_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_band_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_fit_end: Option<f64>,
}

/// Even frequency grid for sweeps (`smatrix`) and emission-rate scans.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub count: usize,
}

/// Mode-dynamics run: thermal inputs, initial amplitudes, sampling grid, and
/// (optionally) a stochastic-trajectory cross-check of the moment method.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    /// Uniform channel occupation; mutually exclusive with `occupation`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bar: Option<f64>,
    /// Per-channel occupations; mutually exclusive with `n_bar`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occupation: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0_re: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0_im: Option<Vec<f64>>,
    pub t_max: f64,
    /// Number of sample times on (0, t_max]. Default 200.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Trajectory sampling stride (observation grid only; the one-step
    /// update is exact at any stride). Default 0.05.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Stochastic trajectories to average; 0 (default) runs moments only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    /// Trajectories per deterministic reduction chunk. Default 64.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunk: Option<usize>,
}

/// Random-matrix ensemble of cavities: GOE spectra mapped to a band, with
/// Gaussian channel couplings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_modes: usize,
    pub n_channels: usize,
    pub center: f64,
    pub half_width: f64,
    pub coupling_sigma: f64,
    pub n_samples: usize,
    /// Central fraction of each spectrum kept for statistics (band edges
    /// distort both widths and spacings). Default 0.5.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keep_central: Option<f64>,
}

/// Dielectric-slab testbed: geometry, mode-basis size, and how many
/// low-lying resonances to compare against the transfer-matrix oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toy1dConfig {
    pub length: f64,
    pub eps_in: f64,
    pub barrier: f64,
    pub n_modes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_track: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// "csv" (default) or "json".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

/// Parse a config file; the encoding is chosen by extension (`.json` is
/// JSON, everything else TOML). Parse errors keep the underlying
/// line/column diagnostic.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}:\n{e}", path.display())))
    }
}

/// Fetch a section, naming it and the subcommand in the error when absent.
pub fn require<'a, T>(opt: &'a Option<T>, section: &str, cmd: &str) -> Result<&'a T, CliError> {
    opt.as_ref().ok_or_else(|| {
        CliError::Config(format!(
            "the {cmd} subcommand needs a [{section}] section in the config"
        ))
    })
}

fn config_err(section: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("[{section}] {msg}"))
}

/// Rectangular nested list → complex matrix; the imaginary part (when given)
/// must have the same shape as the real part.
fn complex_matrix(
    re: &[Vec<f64>],
    im: Option<&Vec<Vec<f64>>>,
    section: &str,
    what: &str,
) -> Result<Array2<C64>, CliError> {
    let rows = re.len();
    let cols = re.first().map_or(0, Vec::len);
    if re.iter().any(|r| r.len() != cols) {
        return Err(config_err(section, format!("{what} rows have unequal lengths")));
    }
    let mut m = Array2::from_shape_fn((rows, cols), |(i, j)| C64::new(re[i][j], 0.0));
    if let Some(im) = im {
        if im.len() != rows || im.iter().any(|r| r.len() != cols) {
            return Err(config_err(
                section,
                format!("{what} imaginary part must match the {rows}×{cols} real part"),
            ));
        }
        for (i, row) in im.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[[i, j]] += C64::new(0.0, v);
            }
        }
    }
    Ok(m)
}

fn complex_vector(
    re: &[f64],
    im: Option<&Vec<f64>>,
    section: &str,
    what: &str,
) -> Result<Array1<C64>, CliError> {
    let mut v = Array1::from_iter(re.iter().map(|&x| C64::new(x, 0.0)));
    if let Some(im) = im {
        if im.len() != re.len() {
            return Err(config_err(
                section,
                format!("{what} imaginary part must match the real part's length {}", re.len()),
            ));
        }
        for (x, &y) in v.iter_mut().zip(im) {
            *x += C64::new(0.0, y);
        }
    }
    Ok(v)
}

fn build_spectrum(s: &SpectrumConfig, seed: u64) -> Result<ModeSpectrum, CliError> {
    let explicit = s.frequencies.is_some();
    let comb = s.comb_start.is_some() || s.comb_spacing.is_some() || s.comb_count.is_some();
    let goe = s.goe_modes.is_some() || s.goe_center.is_some() || s.goe_half_width.is_some();
    match (explicit, comb, goe) {
        (true, false, false) => {
            ModeSpectrum::explicit(s.frequencies.clone().unwrap())
                .map_err(|e| config_err("spectrum", e))
        }
        (false, true, false) => {
            let (start, spacing, count) = match (s.comb_start, s.comb_spacing, s.comb_count) {
                (Some(a), Some(d), Some(n)) => (a, d, n),
                _ => {
                    return Err(config_err(
                        "spectrum",
                        "a comb needs comb_start, comb_spacing, and comb_count",
                    ))
                }
            };
            ModeSpectrum::comb(start, spacing, count).map_err(|e| config_err("spectrum", e))
        }
        (false, false, true) => {
            let (n, center, half) = match (s.goe_modes, s.goe_center, s.goe_half_width) {
                (Some(n), Some(c), Some(h)) => (n, c, h),
                _ => {
                    return Err(config_err(
                        "spectrum",
                        "a GOE band needs goe_modes, goe_center, and goe_half_width",
                    ))
                }
            };
            ModeSpectrum::goe_band(n, derive_stream_seed(seed, SEED_SPECTRUM), center, half)
                .map_err(|e| config_err("spectrum", e))
        }
        _ => Err(config_err(
            "spectrum",
            "give exactly one of: frequencies, comb_* keys, or goe_* keys",
        )),
    }
}

fn build_coupling(
    c: &CouplingConfig,
    n_modes: usize,
    seed: u64,
) -> Result<CouplingModel, CliError> {
    let banded = c.band_lo.is_some() || c.band_hi.is_some() || c.band_edge.is_some();
    let model = match (&c.amplitudes_re, c.random_channels) {
        (Some(re), None) => {
            let w = complex_matrix(re, c.amplitudes_im.as_ref(), "coupling", "amplitudes")?;
            if w.nrows() != n_modes {
                return Err(config_err(
                    "coupling",
                    format!("amplitudes have {} rows for {} modes", w.nrows(), n_modes),
                ));
            }
            if banded {
                let (lo, hi) = match (c.band_lo, c.band_hi) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => {
                        return Err(config_err(
                            "coupling",
                            "band limiting needs both band_lo and band_hi",
                        ))
                    }
                };
                let edge = c.band_edge.unwrap_or(0.05 * (hi - lo));
                CouplingModel::band_limited(w, lo, hi, edge)
            } else {
                CouplingModel::constant(w)
            }
        }
        (None, Some(channels)) => {
            if banded {
                return Err(config_err(
                    "coupling",
                    "band limiting needs explicit amplitudes, not random ones",
                ));
            }
            let sigma = c.random_sigma.ok_or_else(|| {
                config_err("coupling", "random coupling needs random_sigma as well")
            })?;
            CouplingModel::gaussian_random(
                n_modes,
                channels,
                sigma,
                derive_stream_seed(seed, SEED_COUPLING),
            )
        }
        _ => {
            return Err(config_err(
                "coupling",
                "give exactly one of: amplitudes_re (with optional amplitudes_im) or \
                 random_channels + random_sigma",
            ))
        }
    };
    model.map_err(|e| config_err("coupling", e))
}

fn build_media(m: &MediaConfig, n_modes: usize) -> Result<MediaCouplings, CliError> {
    let build_side = |re: &Option<Vec<Vec<f64>>>,
                      im: &Option<Vec<Vec<f64>>>,
                      what: &str|
     -> Result<Array2<C64>, CliError> {
        match re {
            Some(rows) if !rows.is_empty() => {
                let m = complex_matrix(rows, im.as_ref(), "media", what)?;
                if m.nrows() != n_modes {
                    return Err(config_err(
                        "media",
                        format!("{what} has {} rows for {} modes", m.nrows(), n_modes),
                    ));
                }
                Ok(m)
            }
            _ => Ok(Array2::zeros((n_modes, 0))),
        }
    };
    let kappa = build_side(&m.kappa_re, &m.kappa_im, "kappa")?;
    let gamma = build_side(&m.gamma_re, &m.gamma_im, "gamma")?;
    MediaCouplings::new(kappa, gamma, m.n_abs, m.n_amp).map_err(|e| config_err("media", e))
}

/// Assemble the cavity model from `[spectrum]`, `[coupling]`, and (when
/// present) `[media]`. Errors in the values are config errors — the run
/// never started.
pub fn build_model(cfg: &RunConfig, cmd: &str, seed: u64) -> Result<CavityModel, CliError> {
    let spectrum = build_spectrum(require(&cfg.spectrum, "spectrum", cmd)?, seed)?;
    let n = spectrum.n_modes();
    let coupling = build_coupling(require(&cfg.coupling, "coupling", cmd)?, n, seed)?;
    let media = cfg.media.as_ref().map(|m| build_media(m, n)).transpose()?;
    CavityModel::new(spectrum, coupling, media).map_err(|e| CliError::Config(e.to_string()))
}

pub fn build_atom(cfg: &RunConfig, cmd: &str, n_modes: usize) -> Result<AtomSpec, CliError> {
    let a = require(&cfg.atom, "atom", cmd)?;
    if a.eta_re.len() != n_modes {
        return Err(config_err(
            "atom",
            format!("eta has {} entries for {} modes", a.eta_re.len(), n_modes),
        ));
    }
    let eta = complex_vector(&a.eta_re, a.eta_im.as_ref(), "atom", "eta")?;
    AtomSpec::new(a.omega0, eta).map_err(|e| config_err("atom", e))
}

pub fn build_grid(cfg: &RunConfig, cmd: &str) -> Result<Vec<f64>, CliError> {
    let s = require(&cfg.sweep, "sweep", cmd)?;
    grid_from(s)
}

pub fn grid_from(s: &SweepConfig) -> Result<Vec<f64>, CliError> {
    if !(s.omega_min.is_finite() && s.omega_max.is_finite() && s.omega_min < s.omega_max) {
        return Err(config_err(
            "sweep",
            format!("need omega_min < omega_max, got [{}, {}]", s.omega_min, s.omega_max),
        ));
    }
    if s.count == 0 {
        return Err(config_err("sweep", "count must be at least 1"));
    }
    if s.count == 1 {
        return Ok(vec![s.omega_min]);
    }
    let step = (s.omega_max - s.omega_min) / (s.count - 1) as f64;
    Ok((0..s.count).map(|k| s.omega_min + step * k as f64).collect())
}

pub fn build_ensemble(cfg: &RunConfig, cmd: &str, seed: u64) -> Result<(EnsembleSpec, f64), CliError> {
    let e = require(&cfg.ensemble, "ensemble", cmd)?;
    let spec = EnsembleSpec {
        n_modes: e.n_modes,
        n_channels: e.n_channels,
        center: e.center,
        half_width: e.half_width,
        coupling_sigma: e.coupling_sigma,
        n_samples: e.n_samples,
        seed: derive_stream_seed(seed, SEED_ENSEMBLE),
    };
    Ok((spec, e.keep_central.unwrap_or(0.5)))
}

pub fn build_geometry<'a>(
    cfg: &'a RunConfig,
    cmd: &str,
) -> Result<(Geometry1D, &'a Toy1dConfig), CliError> {
    let t = require(&cfg.toy1d, "toy1d", cmd)?;
    let geom =
        Geometry1D::new(t.length, t.eps_in, t.barrier).map_err(|e| config_err("toy1d", e))?;
    Ok((geom, t))
}

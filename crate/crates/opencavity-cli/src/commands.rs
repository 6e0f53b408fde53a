//! The six subcommand bodies. Each builds its inputs from the config,
//! delegates the numerics to the library, writes tables through the
//! [`ArtifactWriter`], and returns a JSON summary for the manifest.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde_json::{json, Value};

use opencavity::emission::{
    decay_rate_direct, decay_rate_modes, wigner_weisskopf_decay, AtomSpec, BathSpec,
};
use opencavity::langevin::{
    covariance_evolution, mean_evolution, simulate_trajectories, steady_state_covariance,
    ChannelOccupation, TrajectoryOptions,
};
use opencavity::ode::OdeOptions;
use opencavity::resonances::{find_poles, PoleMethod, PoleSet};
use opencavity::response::QuadSettings;
use opencavity::rmt::{
    derive_stream_seed, ensemble_width_statistics, ks_critical, ks_statistic,
    nearest_neighbor_spacings, porter_thomas_cdf, sample_models, unfold, wigner_surmise_cdf,
};
use opencavity::scattering::{io_transforms, sweep};
use opencavity::spectrum::CavityModel;
use opencavity::toy1d::{analytic_cavity, compare_resonances, delay_resonances, exact_resonances};
use opencavity::C64;

use crate::config::{self, RunConfig, SEED_TRAJECTORIES};
use crate::error::CliError;
use crate::output::{histogram_plot, line_plot, scatter_plot, ArtifactWriter, Table};

/// Pole method matched to the coupling: the closed-form eigendecomposition
/// when the coupling is frequency-independent, Newton refinement otherwise.
fn pole_method(model: &CavityModel) -> PoleMethod {
    if model.coupling.is_markov() {
        PoleMethod::Markov { omega_ref: None }
    } else {
        PoleMethod::newton(None)
    }
}

fn solve_poles(model: &CavityModel, qs: &QuadSettings) -> Result<PoleSet, CliError> {
    Ok(find_poles(model, pole_method(model), qs)?)
}

pub fn run_smatrix(
    cfg: &RunConfig,
    seed: u64,
    out: &mut ArtifactWriter,
) -> Result<Value, CliError> {
    let model = config::build_model(cfg, "smatrix", seed)?;
    let omegas = config::build_grid(cfg, "smatrix")?;
    let qs = QuadSettings::default();
    let m = model.n_channels();

    let with_media = !model.media.is_empty();
    let mut columns = vec!["omega".to_string()];
    let defect_col = if with_media {
        columns.push("flux_defect".to_string());
        "flux_defect"
    } else {
        columns.push("unitarity_defect".to_string());
        columns.push("condition".to_string());
        "unitarity_defect"
    };
    for i in 0..m {
        for j in 0..m {
            columns.push(format!("s{i}_{j}_re"));
            columns.push(format!("s{i}_{j}_im"));
        }
    }

    let mut table = Table::new(columns);
    let mut failed = 0usize;
    let mut max_defect = 0.0f64;
    if with_media {
        let points: Vec<_> = omegas
            .par_iter()
            .map(|&omega| io_transforms(&model, omega, &qs))
            .collect();
        for (&omega, point) in omegas.iter().zip(points) {
            match point {
                Ok(io) => {
                    let mut row = vec![omega, io.flux_defect];
                    push_matrix(&mut row, &io.s);
                    max_defect = max_defect.max(io.flux_defect);
                    table.push(row);
                }
                Err(_) => failed += 1,
            }
        }
    } else {
        for point in sweep(&model, &omegas, &qs).points {
            match point {
                Ok(res) => {
                    let mut row = vec![res.omega, res.unitarity_defect, res.condition];
                    push_matrix(&mut row, &res.s);
                    max_defect = max_defect.max(res.unitarity_defect);
                    table.push(row);
                }
                Err(_) => failed += 1,
            }
        }
    }

    let file = out.write_table("sweep", &table)?;
    out.write_plots(vec![line_plot(
        &file,
        "scattering defect across the sweep",
        "omega",
        &[defect_col],
        true,
    )])?;
    Ok(json!({
        "points": omegas.len(),
        "failed_points": failed,
        "max_defect": max_defect,
        "channels": m,
    }))
}

fn push_matrix(row: &mut Vec<f64>, s: &Array2<C64>) {
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            row.push(s[[i, j]].re);
            row.push(s[[i, j]].im);
        }
    }
}

pub fn run_poles(cfg: &RunConfig, seed: u64, out: &mut ArtifactWriter) -> Result<Value, CliError> {
    let model = config::build_model(cfg, "poles", seed)?;
    let poles = solve_poles(&model, &QuadSettings::default())?;

    let mut table = Table::new(
        ["mode", "omega_re", "omega_im", "width"]
            .map(String::from)
            .to_vec(),
    );
    for (k, (p, &w)) in poles.poles.iter().zip(poles.widths.iter()).enumerate() {
        table.push(vec![k as f64, p.re, p.im, w]);
    }
    let file = out.write_table("poles", &table)?;
    out.write_plots(vec![scatter_plot(
        &file,
        "resonance widths along the spectrum",
        "omega_re",
        "width",
    )])?;
    Ok(json!({
        "n_poles": poles.poles.len(),
        "width_sum": poles.widths.sum(),
    }))
}

fn build_occupation(
    cfg: &RunConfig,
    model: &CavityModel,
) -> Result<ChannelOccupation, CliError> {
    let lc = config::require(&cfg.langevin, "langevin", "langevin")?;
    let m = model.n_channels();
    match (&lc.occupation, lc.n_bar) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "[langevin] give either occupation or n_bar, not both".into(),
        )),
        (Some(list), None) => {
            if list.len() != m {
                return Err(CliError::Config(format!(
                    "[langevin] {} occupations for {} channels",
                    list.len(),
                    m
                )));
            }
            Ok(ChannelOccupation(Array1::from_vec(list.clone())))
        }
        (None, Some(n_bar)) => Ok(ChannelOccupation::uniform(m, n_bar)),
        (None, None) => Ok(ChannelOccupation::vacuum(m)),
    }
}

pub fn run_langevin(
    cfg: &RunConfig,
    seed: u64,
    out: &mut ArtifactWriter,
) -> Result<Value, CliError> {
    let model = config::build_model(cfg, "langevin", seed)?;
    let lc = config::require(&cfg.langevin, "langevin", "langevin")?;
    let occ = build_occupation(cfg, &model)?;
    let n = model.n_modes();

    if !(lc.t_max.is_finite() && lc.t_max > 0.0) {
        return Err(CliError::Config(format!(
            "[langevin] t_max {} must be positive",
            lc.t_max
        )));
    }
    let samples = lc.samples.unwrap_or(200).max(1);
    let times: Vec<f64> = (0..samples)
        .map(|j| lc.t_max * (j + 1) as f64 / samples as f64)
        .collect();

    let a0 = match &lc.a0_re {
        Some(re) => {
            if re.len() != n {
                return Err(CliError::Config(format!(
                    "[langevin] a0 has {} entries for {} modes",
                    re.len(),
                    n
                )));
            }
            let mut v = Array1::from_iter(re.iter().map(|&x| C64::new(x, 0.0)));
            if let Some(im) = &lc.a0_im {
                if im.len() != n {
                    return Err(CliError::Config(format!(
                        "[langevin] a0 imaginary part has {} entries for {} modes",
                        im.len(),
                        n
                    )));
                }
                for (x, &y) in v.iter_mut().zip(im) {
                    *x += C64::new(0.0, y);
                }
            }
            v
        }
        None => Array1::zeros(n),
    };

    let mean = mean_evolution(&model, &a0, &times)?;
    let c0 = Array2::<C64>::zeros((n, n));
    let cov = covariance_evolution(&model, &occ, &c0, &times, &OdeOptions::default())?;
    let (steady, residual) = steady_state_covariance(&model, &occ)?;

    let n_traj = lc.trajectories.unwrap_or(0);
    let stats = if n_traj > 0 {
        let opts = TrajectoryOptions {
            dt: lc.dt.unwrap_or(0.05),
            n_trajectories: n_traj,
            seed: derive_stream_seed(seed, SEED_TRAJECTORIES),
            chunk: lc.chunk.unwrap_or(64),
        };
        Some(simulate_trajectories(&model, &occ, &a0, &times, &opts)?)
    } else {
        None
    };

    let mut columns = vec!["t".to_string()];
    for k in 0..n {
        columns.push(format!("mean{k}_re"));
        columns.push(format!("mean{k}_im"));
        columns.push(format!("occupation{k}"));
    }
    if stats.is_some() {
        for k in 0..n {
            columns.push(format!("sampled_occupation{k}"));
            columns.push(format!("occupation_stderr{k}"));
        }
    }
    let occupation_cols: Vec<String> = (0..n).map(|k| format!("occupation{k}")).collect();

    let mut table = Table::new(columns);
    for (idx, &t) in times.iter().enumerate() {
        let mut row = vec![t];
        for k in 0..n {
            row.push(mean[[idx, k]].re);
            row.push(mean[[idx, k]].im);
            row.push(cov[idx][[k, k]].re);
        }
        if let Some(stats) = &stats {
            let sqrt_n = (stats.n_trajectories as f64).sqrt();
            for k in 0..n {
                let c_kk = stats.covariance[[idx, k, k]].re;
                row.push(c_kk);
                row.push(c_kk / sqrt_n);
            }
        }
        table.push(row);
    }
    let file = out.write_table("langevin", &table)?;

    let mut steady_table = Table::new(["mode", "occupation"].map(String::from).to_vec());
    for k in 0..n {
        steady_table.push(vec![k as f64, steady[[k, k]].re]);
    }
    out.write_table("steady", &steady_table)?;

    let col_refs: Vec<&str> = occupation_cols.iter().map(String::as_str).collect();
    out.write_plots(vec![line_plot(
        &file,
        "mode occupations relaxing to the steady state",
        "t",
        &col_refs,
        false,
    )])?;
    Ok(json!({
        "steady_residual": residual,
        "steady_occupations": (0..n).map(|k| steady[[k, k]].re).collect::<Vec<f64>>(),
        "trajectories": n_traj,
    }))
}

pub fn run_emission(
    cfg: &RunConfig,
    seed: u64,
    oracle: bool,
    out: &mut ArtifactWriter,
) -> Result<Value, CliError> {
    let model = config::build_model(cfg, "emission", seed)?;
    let atom = config::build_atom(cfg, "emission", model.n_modes())?;
    let qs = QuadSettings::default();

    let direct = decay_rate_direct(&model, &atom, &qs)?;
    let poles = solve_poles(&model, &qs)?;
    let modes = decay_rate_modes(&atom, &poles)?;
    let rel_diff = (modes.rates.gamma - direct.gamma).abs() / direct.gamma.abs().max(1e-300);

    let grid = match &cfg.sweep {
        Some(s) => config::grid_from(s)?,
        None => vec![atom.omega0],
    };
    let rates = grid
        .par_iter()
        .map(|&omega0| {
            let probe = AtomSpec::new(omega0, atom.eta.clone())?;
            decay_rate_direct(&model, &probe, &qs)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table::new(
        ["omega0", "gamma", "shift", "ldos"]
            .map(String::from)
            .to_vec(),
    );
    for (&omega0, r) in grid.iter().zip(&rates) {
        table.push(vec![omega0, r.gamma, r.shift, r.ldos]);
    }
    let file = out.write_table("emission", &table)?;

    let mut summary = json!({
        "omega0": atom.omega0,
        "gamma_direct": direct.gamma,
        "gamma_modes": modes.rates.gamma,
        "estimator_rel_diff": rel_diff,
        "degenerate_pole_cluster": modes.degenerate,
    });

    if oracle {
        let ac = config::require(&cfg.atom, "atom", "emission")?;
        let band = match (ac.oracle_band_lo, ac.oracle_band_hi) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "[atom] give both oracle_band_lo and oracle_band_hi or neither".into(),
                ))
            }
        };
        let bath = BathSpec {
            n_bins: ac.oracle_bins.unwrap_or(10_000),
            band,
            fit_end: ac.oracle_fit_end,
        };
        let decay = wigner_weisskopf_decay(&model, &atom, &bath, &poles)?;
        let rel_error = (decay.gamma - direct.gamma).abs() / direct.gamma.abs().max(1e-300);

        let mut comparison = Table::new(
            [
                "n_bins",
                "gamma_fit",
                "gamma_direct",
                "rel_error",
                "r_squared",
                "window_start",
                "window_end",
                "band_lo",
                "band_hi",
            ]
            .map(String::from)
            .to_vec(),
        );
        comparison.push(vec![
            decay.n_bins as f64,
            decay.gamma,
            direct.gamma,
            rel_error,
            decay.r_squared,
            decay.window.0,
            decay.window.1,
            decay.band.0,
            decay.band.1,
        ]);
        out.write_table("oracle", &comparison)?;

        let mut population = Table::new(["t", "population"].map(String::from).to_vec());
        for (&t, &p) in decay.times.iter().zip(&decay.population) {
            population.push(vec![t, p]);
        }
        let pop_file = out.write_table("population", &population)?;
        out.write_plots(vec![
            line_plot(&file, "emission rate across the band", "omega0", &["gamma"], false),
            line_plot(
                &pop_file,
                "discretized-bath emitter population",
                "t",
                &["population"],
                true,
            ),
        ])?;
        summary["oracle"] = json!({
            "gamma_fit": decay.gamma,
            "rel_error": rel_error,
            "r_squared": decay.r_squared,
            "n_bins": decay.n_bins,
        });
    } else {
        out.write_plots(vec![line_plot(
            &file,
            "emission rate across the band",
            "omega0",
            &["gamma"],
            false,
        )])?;
    }
    Ok(summary)
}

pub fn run_rmt(cfg: &RunConfig, seed: u64, out: &mut ArtifactWriter) -> Result<Value, CliError> {
    let (spec, keep_central) = config::build_ensemble(cfg, "rmt", seed)?;
    let ws = ensemble_width_statistics(&spec, keep_central)?;

    let mut width_table = Table::new(
        ["index", "width", "perturbative"]
            .map(String::from)
            .to_vec(),
    );
    for (k, (&w, &p)) in ws.widths.iter().zip(&ws.perturbative).enumerate() {
        width_table.push(vec![k as f64, w, p]);
    }
    let width_file = out.write_table("widths", &width_table)?;

    // Spacing statistics come from the same ensemble's spectra, unfolded to
    // unit mean density.
    let mut spacings = Vec::new();
    for model in sample_models(&spec)? {
        let unfolded = unfold(model.spectrum.omegas(), 7)?;
        spacings.extend(nearest_neighbor_spacings(&unfolded, keep_central)?);
    }
    let mut spacing_table = Table::new(["index", "spacing"].map(String::from).to_vec());
    for (k, &s) in spacings.iter().enumerate() {
        spacing_table.push(vec![k as f64, s]);
    }
    let spacing_file = out.write_table("spacings", &spacing_table)?;

    let ks_widths = ks_statistic(&ws.widths, |x| porter_thomas_cdf(x, ws.mean));
    let crit_widths = ks_critical(ws.widths.len(), 0.05);
    let ks_spacings = ks_statistic(&spacings, wigner_surmise_cdf);
    let crit_spacings = ks_critical(spacings.len(), 0.05);
    let stats = json!({
        "n_widths": ws.widths.len(),
        "mean_width": ws.mean,
        "ks_widths_vs_porter_thomas": ks_widths,
        "ks_critical_widths_5pct": crit_widths,
        "widths_consistent": ks_widths < crit_widths,
        "n_spacings": spacings.len(),
        "ks_spacings_vs_wigner": ks_spacings,
        "ks_critical_spacings_5pct": crit_spacings,
        "spacings_consistent": ks_spacings < crit_spacings,
    });
    out.write_json("stats.json", &stats)?;
    out.write_plots(vec![
        histogram_plot(&width_file, "pooled resonance widths", "width"),
        histogram_plot(&spacing_file, "unfolded nearest-neighbor spacings", "spacing"),
    ])?;
    Ok(stats)
}

pub fn run_oracle1d(
    cfg: &RunConfig,
    oracle: bool,
    out: &mut ArtifactWriter,
) -> Result<Value, CliError> {
    let (geom, tc) = config::build_geometry(cfg, "oracle1d")?;
    let cavity = analytic_cavity(&geom, tc.n_modes).map_err(|e| {
        CliError::Config(format!("[toy1d] {e}"))
    })?;
    let n_track = tc.n_track.unwrap_or(10).min(tc.n_modes);
    if n_track == 0 {
        return Err(CliError::Config("[toy1d] nothing to track".into()));
    }

    let omega_ref = cavity.modes[n_track / 2].omega;
    let poles = find_poles(
        &cavity.model,
        PoleMethod::newton(Some(omega_ref)),
        &QuadSettings::default(),
    )?;
    let tracked: Vec<C64> = poles.poles.iter().take(n_track).copied().collect();
    let exact = exact_resonances(&geom, &cavity.modes[..n_track])?;
    let cmp = compare_resonances(&geom, &tracked, &exact)?;

    let mut columns = [
        "mode",
        "model_re",
        "model_im",
        "oracle_re",
        "oracle_im",
        "position_error_over_fsr",
        "width_relative_error",
    ]
    .map(String::from)
    .to_vec();
    let delays = if oracle {
        columns.push("delay_omega".to_string());
        columns.push("delay_width".to_string());
        Some(delay_resonances(&geom, &cavity.modes[..n_track])?)
    } else {
        None
    };

    let mut table = Table::new(columns);
    for (k, (model_pole, oracle_pole)) in cmp.pairs.iter().enumerate() {
        let mut row = vec![
            k as f64,
            model_pole.re,
            model_pole.im,
            oracle_pole.re,
            oracle_pole.im,
            cmp.position_error_over_fsr[k],
            cmp.width_relative_error[k],
        ];
        if let Some(delays) = &delays {
            row.push(delays[k].omega);
            row.push(delays[k].width);
        }
        table.push(row);
    }
    let file = out.write_table("comparison", &table)?;
    out.write_plots(vec![scatter_plot(
        &file,
        "pipeline-vs-oracle pole errors",
        "mode",
        "position_error_over_fsr",
    )])?;
    Ok(json!({
        "free_spectral_range": geom.free_spectral_range(),
        "n_tracked": n_track,
        "max_position_error_over_fsr": cmp.max_position_error(),
        "max_width_relative_error": cmp.max_width_error(),
        "delay_oracle": oracle,
    }))
}

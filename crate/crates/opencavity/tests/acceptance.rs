//! Acceptance suite: twelve end-to-end checks, one per shipped correctness
//! claim. Every test prints a single `[PASS]`/`[FAIL]` line — run
//! `cargo test --test acceptance -- --nocapture` to see them all — and then
//! asserts, so the suite also fails loudly under plain `cargo test`.

use ndarray::{array, Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use opencavity::emission::{
    decay_rate_direct, decay_rate_modes, decay_rate_nonrwa, wigner_weisskopf_decay, AtomSpec,
    BathSpec,
};
use opencavity::langevin::{
    simulate_trajectories, steady_state_covariance, ChannelOccupation, TrajectoryOptions,
};
use opencavity::linalg::adjoint;
use opencavity::resonances::{find_poles, PoleMethod};
use opencavity::response::QuadSettings;
use opencavity::rmt::{
    derive_stream_seed, ensemble_width_statistics, goe_eigenvalues, ks_critical, ks_statistic,
    nearest_neighbor_spacings, porter_thomas_cdf, sample_models, unfold, wigner_surmise_cdf,
    EnsembleSpec,
};
use opencavity::scattering::{io_transforms, smatrix, sweep, IoTransforms};
use opencavity::spectrum::{CavityModel, CouplingModel, MediaCouplings, ModeSpectrum};
use opencavity::toy1d::{analytic_cavity, compare_resonances, exact_resonances, Geometry1D};
use opencavity::{C64, Error};

fn report(id: u32, what: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] C{id}: {what} — {detail}");
    assert!(ok, "C{id} {what}: {detail}");
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| {
        C64::new(
            scale * rng.gen_range(-1.0..1.0),
            scale * rng.gen_range(-1.0..1.0),
        )
    })
}

/// C1 — without media couplings the S-matrix is unitary at every real
/// frequency, across mode and channel counts.
#[test]
fn c01_lossless_scattering_is_unitary() {
    let cases = [(50, 8), (35, 6), (20, 3), (5, 1)];
    let qs = QuadSettings::default();
    let mut worst = 0.0_f64;
    let mut total = 0usize;
    for (i, &(n, m)) in cases.iter().enumerate() {
        let spectrum = ModeSpectrum::goe_band(n, 11 + i as u64, 5.0, 2.0).unwrap();
        let coupling = CouplingModel::gaussian_random(n, m, 0.02, 900 + i as u64).unwrap();
        let model = CavityModel::new(spectrum, coupling, None).unwrap();
        let omegas: Vec<f64> = (0..500)
            .map(|k| 2.0 + 6.0 * (k as f64 + 0.5) / 500.0)
            .collect();
        let result = sweep(&model, &omegas, &qs);
        assert_eq!(result.n_failed(), 0, "sweep failures for {n} modes");
        worst = worst.max(result.max_unitarity_defect());
        total += omegas.len();
    }
    report(
        1,
        "lossless S-matrices are unitary",
        worst < 1e-10,
        &format!("max ‖SS† − 1‖ = {worst:.2e} over {total} frequencies"),
    );
}

/// C2 — with absorbing/amplifying media the input–output transforms obey
/// UU† − VV† = 1 − SS†, and 1 − SS† is semi-definite with the sign of the
/// medium.
#[test]
fn c02_flux_identity_and_media_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let n = 6;
    let freqs = vec![1.0, 1.18, 1.39, 1.55, 1.74, 1.96];
    let coupling = CouplingModel::gaussian_random(n, 2, 0.05, 2020).unwrap();
    let kappa = random_matrix(&mut rng, n, 3, 0.04);
    let gamma = random_matrix(&mut rng, n, 2, 0.04);

    let make = |kap: Array2<C64>, gam: Array2<C64>| {
        CavityModel::new(
            ModeSpectrum::explicit(freqs.clone()).unwrap(),
            coupling.clone(),
            Some(MediaCouplings::new(kap, gam, 0.4, 0.6).unwrap()),
        )
        .unwrap()
    };
    let absorbing = make(kappa.clone(), Array2::zeros((n, 0)));
    let amplifying = make(Array2::zeros((n, 0)), gamma.clone());
    let mixed = make(kappa, gamma);

    let qs = QuadSettings::default();
    let eigs = |io: &IoTransforms| {
        let m = io.s.nrows();
        let one_minus = Array2::<C64>::eye(m) - io.s.dot(&adjoint(&io.s));
        one_minus.eigh(UPLO::Lower).unwrap().0
    };
    let mut worst_flux = 0.0_f64;
    let mut min_abs_eig = f64::INFINITY;
    let mut max_amp_eig = f64::NEG_INFINITY;
    for k in 0..200 {
        let omega = 0.6 + 1.8 * k as f64 / 199.0;
        for model in [&absorbing, &amplifying, &mixed] {
            let io = io_transforms(model, omega, &qs).unwrap();
            worst_flux = worst_flux.max(io.flux_defect);
        }
        for &e in eigs(&io_transforms(&absorbing, omega, &qs).unwrap()).iter() {
            min_abs_eig = min_abs_eig.min(e);
        }
        for &e in eigs(&io_transforms(&amplifying, omega, &qs).unwrap()).iter() {
            max_amp_eig = max_amp_eig.max(e);
        }
    }
    let ok = worst_flux < 1e-10 && min_abs_eig >= -1e-10 && max_amp_eig <= 1e-10;
    report(
        2,
        "flux identity holds and media act with the right sign",
        ok,
        &format!(
            "max ‖(UU†−VV†) − (1−SS†)‖ = {worst_flux:.2e}; absorbing min eig(1−SS†) = \
             {min_abs_eig:.2e}; amplifying max eig = {max_amp_eig:.2e}"
        ),
    );
}

/// C3 — a single mode on a single channel reflects with S(ω₁) = −1, has its
/// pole at ω₁ − iπw², and winds the phase by 2π across the resonance.
#[test]
fn c03_single_resonance_line_shape() {
    let w = 0.01;
    let omega1 = 2.0;
    let half_width = PI * w * w;
    let model = CavityModel::new(
        ModeSpectrum::explicit(vec![omega1]).unwrap(),
        CouplingModel::constant(array![[C64::new(w, 0.0)]]).unwrap(),
        None,
    )
    .unwrap();
    let qs = QuadSettings::default();

    let s_res = smatrix(&model, omega1, &qs).unwrap().s[[0, 0]];
    let res_err = (s_res + 1.0).norm();

    let poles = find_poles(&model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();
    let pole_err = (poles.poles[0] - C64::new(omega1, -half_width)).norm();

    // Phase winding across ±2000 half-widths, tangent-spaced so the grid
    // resolves the resonance core. A window that wide misses exactly
    // 4·atan(1/2000) of the full 2π.
    let reach = 2000.0_f64;
    let theta_max = reach.atan();
    let n_pts = 4001;
    let mut winding = 0.0;
    let mut prev = 0.0;
    for j in 0..n_pts {
        let theta = -theta_max + 2.0 * theta_max * j as f64 / (n_pts - 1) as f64;
        let omega = omega1 + half_width * theta.tan();
        let phase = smatrix(&model, omega, &qs).unwrap().s[[0, 0]].arg();
        if j > 0 {
            let mut d = phase - prev;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            winding += d;
        }
        prev = phase;
    }
    let expected = 2.0 * PI - 4.0 * (1.0 / reach).atan();
    let ok = res_err < 1e-12
        && pole_err < 1e-12
        && (winding - expected).abs() < 1e-6
        && (winding - 2.0 * PI).abs() < 0.01;
    report(
        3,
        "single-mode line shape is Breit–Wigner",
        ok,
        &format!(
            "|S(ω₁) + 1| = {res_err:.1e}; pole error = {pole_err:.1e}; phase winding = \
             {:.6}·2π",
            winding / (2.0 * PI)
        ),
    );
}

/// C4 — two degenerate modes on one channel split into a superradiant pole of
/// twice the single-mode width and a trapped pole on the real axis; an
/// emitter coupled symmetrically never sees the trapped mode.
#[test]
fn c04_superradiant_pair_hides_the_dark_mode() {
    let omega_deg = 5.0;
    let w = 0.2;
    let model = CavityModel::new(
        ModeSpectrum::explicit(vec![omega_deg, omega_deg]).unwrap(),
        CouplingModel::constant(array![[C64::new(w, 0.0)], [C64::new(w, 0.0)]]).unwrap(),
        None,
    )
    .unwrap();
    let qs = QuadSettings::default();
    let poles = find_poles(&model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();
    let (bright, dark) = if poles.poles[0].im < poles.poles[1].im {
        (0, 1)
    } else {
        (1, 0)
    };
    let bright_err = (poles.poles[bright] - C64::new(omega_deg, -2.0 * PI * w * w)).norm();
    let dark_err = (poles.poles[dark] - C64::new(omega_deg, 0.0)).norm();

    let eta = array![C64::new(0.03, 0.0), C64::new(0.03, 0.0)];
    let atom = AtomSpec::new(5.3, eta).unwrap();
    let modes = decay_rate_modes(&atom, &poles).unwrap();
    let term = |k: usize| modes.residues[k] / (C64::new(atom.omega0, 0.0) - poles.poles[k]);
    let dark_fraction = term(dark).norm() / (term(bright) + term(dark)).norm();

    let ok = bright_err < 1e-10 && dark_err < 1e-10 && dark_fraction < 1e-12;
    report(
        4,
        "degenerate pair forms one superradiant and one trapped mode",
        ok,
        &format!(
            "superradiant pole error = {bright_err:.1e}; trapped pole error = {dark_err:.1e}; \
             trapped share of a symmetric emitter's self-energy = {dark_fraction:.1e}"
        ),
    );
}

/// C5 — the resonance widths of every sample sum to 2π·tr(WW†) (trace
/// invariance of the effective Hamiltonian).
#[test]
fn c05_width_sum_matches_coupling_trace() {
    let spec = EnsembleSpec {
        n_modes: 200,
        n_channels: 2,
        center: 10.0,
        half_width: 4.0,
        coupling_sigma: 0.01,
        n_samples: 100,
        seed: 515,
    };
    let models = sample_models(&spec).unwrap();
    let qs = QuadSettings::default();
    let mut worst = 0.0_f64;
    for model in &models {
        let poles = find_poles(model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();
        let sum: f64 = poles.widths.iter().sum();
        let trace: f64 = model
            .coupling
            .eval(spec.center)
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        let expected = 2.0 * PI * trace;
        worst = worst.max(((sum - expected) / expected).abs());
    }
    report(
        5,
        "widths sum to 2π·tr(WW†)",
        worst < 1e-9,
        &format!(
            "worst relative defect = {worst:.2e} over {} samples of 200 modes",
            models.len()
        ),
    );
}

/// C6 — the direct (response-matrix) and mode-resolved (pole-sum) emission
/// estimators agree to numerical precision on random cavities.
#[test]
fn c06_direct_and_mode_resolved_rates_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let qs = QuadSettings::default();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let m = rng.gen_range(1..=3);
        let mut freqs: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..2.0)).collect();
        freqs.sort_by(f64::total_cmp);
        for i in 1..n {
            if freqs[i] - freqs[i - 1] < 1e-3 {
                freqs[i] = freqs[i - 1] + 1e-3;
            }
        }
        let model = CavityModel::new(
            ModeSpectrum::explicit(freqs).unwrap(),
            CouplingModel::gaussian_random(n, m, 0.005, rng.gen()).unwrap(),
            None,
        )
        .unwrap();
        let eta = Array1::from_shape_fn(n, |_| {
            C64::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05))
        });
        let atom = AtomSpec::new(rng.gen_range(1.0..2.0), eta).unwrap();
        let direct = decay_rate_direct(&model, &atom, &qs).unwrap();
        let poles = find_poles(&model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();
        let modes = decay_rate_modes(&atom, &poles).unwrap();
        worst = worst.max(((modes.rates.gamma - direct.gamma) / direct.gamma).abs());
    }
    report(
        6,
        "direct and mode-resolved emission rates agree",
        worst < 1e-9,
        &format!("worst relative difference = {worst:.2e} over 100 random cavities"),
    );
}

/// C7 — integrating the emitter against an explicitly discretized bath
/// reproduces the direct rate, and refining the bath shrinks the error.
/// The fit window is pinned so both resolutions measure the same systematic;
/// at 10³ bins the state revives inside the window, the fit degrades below
/// the R² gate, and the rejected fit's own estimate is the honest number.
#[test]
fn c07_discretized_bath_oracle_converges() {
    let model = CavityModel::new(
        ModeSpectrum::explicit(vec![7.0, 14.0]).unwrap(),
        CouplingModel::constant(array![[C64::new(0.5, 0.0)], [C64::new(0.3, 0.0)]]).unwrap(),
        None,
    )
    .unwrap();
    let eta = array![C64::new(0.0356, 0.0), C64::new(0.01, 0.0)];
    let atom = AtomSpec::new(7.0, eta).unwrap();
    let qs = QuadSettings::default();
    let direct = decay_rate_direct(&model, &atom, &qs).unwrap();
    let poles = find_poles(&model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();

    let fine = wigner_weisskopf_decay(
        &model,
        &atom,
        &BathSpec {
            n_bins: 10_000,
            band: None,
            fit_end: Some(168.0),
        },
        &poles,
    )
    .unwrap();
    let err_fine = (fine.gamma - direct.gamma) / direct.gamma;

    let coarse = BathSpec {
        n_bins: 1000,
        band: None,
        fit_end: Some(168.0),
    };
    let gamma_coarse = match wigner_weisskopf_decay(&model, &atom, &coarse, &poles) {
        Ok(o) => o.gamma,
        Err(Error::FitRejected { gamma_estimate, .. }) => gamma_estimate,
        Err(e) => panic!("bath oracle failed outright at 1000 bins: {e}"),
    };
    let err_coarse = (gamma_coarse - direct.gamma) / direct.gamma;

    let ok = err_fine.abs() < 0.02 && err_fine.abs() < err_coarse.abs();
    report(
        7,
        "discretized-bath decay converges to the direct rate",
        ok,
        &format!(
            "10⁴ bins: {:+.2}% (R² = {:.4}); 10³ bins: {:+.2}%",
            100.0 * err_fine,
            fine.r_squared,
            100.0 * err_coarse
        ),
    );
}

/// C8 — for lines a millionth of the carrier wide, keeping the
/// counter-rotating pole images changes the rate by less than 1e-5.
#[test]
fn c08_counter_rotating_correction_vanishes_for_narrow_lines() {
    let w = (1e-3 / (2.0 * PI)).sqrt(); // per-mode width 2πw² = 1e-3 = 1e-6·ω₀
    let model = CavityModel::new(
        ModeSpectrum::explicit(vec![1000.0, 1000.004]).unwrap(),
        CouplingModel::constant(array![[C64::new(w, 0.0)], [C64::new(w, 0.0)]]).unwrap(),
        None,
    )
    .unwrap();
    let qs = QuadSettings::default();
    let poles = find_poles(&model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();
    let eta = array![C64::new(2e-4, 0.0), C64::new(1.5e-4, 0.0)];
    let atom = AtomSpec::new(1000.001, eta).unwrap();
    let rwa = decay_rate_modes(&atom, &poles).unwrap().rates.gamma;
    let full = decay_rate_nonrwa(&atom, &poles).unwrap().rates.gamma;
    let rel = ((full - rwa) / rwa).abs();
    report(
        8,
        "counter-rotating correction is negligible for narrow lines",
        rel < 1e-5,
        &format!("Γ/ω₀ = 1e-6 ⇒ relative rate difference = {rel:.2e}"),
    );
}

/// C9 — the mode-space pipeline applied to the 1D dielectric slab reproduces
/// the transfer-matrix resonances: positions to 1% of the spacing, widths to
/// 5%.
#[test]
fn c09_one_dimensional_cavity_end_to_end() {
    let geom = Geometry1D::new(1.0, 1.0, 200.0).unwrap();
    let cavity = analytic_cavity(&geom, 24).unwrap();
    assert!(!cavity.truncation_warning);
    let qs = QuadSettings::default();
    let omega_ref = cavity.modes[4].omega;
    let poles = find_poles(&cavity.model, PoleMethod::newton(Some(omega_ref)), &qs).unwrap();
    let exact = exact_resonances(&geom, &cavity.modes).unwrap();
    let model_poles: Vec<C64> = poles.poles.iter().take(10).copied().collect();
    let cmp = compare_resonances(&geom, &model_poles, &exact[..10]).unwrap();
    let pos = cmp.max_position_error();
    let wid = cmp.max_width_error();
    // Narrow-resonance regime: even the widest compared resonance stays well
    // below the free spectral range.
    let overlap = -2.0 * exact[9].im / geom.free_spectral_range();
    let ok = pos < 0.01 && wid < 0.05 && overlap < 0.05;
    report(
        9,
        "1D slab pipeline matches the transfer-matrix oracle",
        ok,
        &format!(
            "first 10 resonances: worst position error = {:.3}% of the spacing, worst width \
             error = {:.2}% (width/spacing = {overlap:.3})",
            100.0 * pos,
            100.0 * wid
        ),
    );
}

/// C10 — the pole deviation from first-order perturbation theory scales as
/// the fourth power of the coupling strength.
#[test]
fn c10_weak_damping_deviation_is_quartic() {
    let omegas = vec![1.0, 1.23, 1.51, 1.82];
    let w_base = array![
        [C64::new(0.06, 0.02), C64::new(-0.03, 0.05)],
        [C64::new(0.05, -0.04), C64::new(0.04, 0.03)],
        [C64::new(-0.07, 0.01), C64::new(0.02, -0.06)],
        [C64::new(0.03, 0.03), C64::new(-0.05, -0.02)],
    ];
    let qs = QuadSettings::default();
    let scales = [1.0, 0.5, 0.25, 0.125];
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &s in &scales {
        let w = w_base.mapv(|z| z * s);
        let model = CavityModel::new(
            ModeSpectrum::explicit(omegas.clone()).unwrap(),
            CouplingModel::constant(w.clone()).unwrap(),
            None,
        )
        .unwrap();
        let poles = find_poles(&model, PoleMethod::Markov { omega_ref: None }, &qs).unwrap();
        let mut dev = 0.0_f64;
        for l in 0..4 {
            let diag: f64 = (0..2).map(|m| w[[l, m]].norm_sqr()).sum();
            let predicted = C64::new(omegas[l], -PI * diag);
            dev = dev.max((poles.poles[l] - predicted).norm());
        }
        lx.push(s.ln());
        ly.push(dev.ln());
    }
    let xm = lx.iter().sum::<f64>() / 4.0;
    let ym = ly.iter().sum::<f64>() / 4.0;
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / lx.iter().map(|x| (x - xm).powi(2)).sum::<f64>();
    report(
        10,
        "deviation from first-order poles scales as the fourth power",
        (slope - 4.0).abs() <= 0.3,
        &format!("fitted exponent = {slope:.3} over s ∈ {{1, ½, ¼, ⅛}}"),
    );
}

/// C11 — 10⁴ stochastic trajectories reproduce the Lyapunov steady
/// covariance within sampling error, and a single thermally driven mode
/// settles at exactly the channel occupation.
#[test]
fn c11_trajectories_reproduce_the_steady_covariance() {
    let model = CavityModel::new(
        ModeSpectrum::explicit(vec![1.0, 1.3]).unwrap(),
        CouplingModel::constant(array![
            [C64::new(0.12, 0.05), C64::new(-0.06, 0.02)],
            [C64::new(0.03, -0.08), C64::new(0.10, 0.04)],
        ])
        .unwrap(),
        None,
    )
    .unwrap();
    let occ = ChannelOccupation::uniform(2, 0.7);
    let (c_ss, residual) = steady_state_covariance(&model, &occ).unwrap();
    assert!(residual < 1e-10, "Lyapunov residual {residual:.2e}");

    let opts = TrajectoryOptions {
        dt: 0.05,
        n_trajectories: 10_000,
        seed: 1111,
        chunk: 125,
    };
    let a0 = Array1::zeros(2);
    let stats = simulate_trajectories(&model, &occ, &a0, &[80.0], &opts).unwrap();
    let mut worst_sigma = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            let se =
                (c_ss[[i, i]].re * c_ss[[j, j]].re / opts.n_trajectories as f64).sqrt();
            let dev = (stats.covariance[[0, i, j]] - c_ss[[i, j]]).norm() / se;
            worst_sigma = worst_sigma.max(dev);
        }
    }

    let single = CavityModel::new(
        ModeSpectrum::explicit(vec![2.0]).unwrap(),
        CouplingModel::constant(array![[C64::new(0.15, 0.0)]]).unwrap(),
        None,
    )
    .unwrap();
    let n_bar = 1.3;
    let (c_single, _) = steady_state_covariance(&single, &ChannelOccupation::uniform(1, n_bar))
        .unwrap();
    let occ_err = (c_single[[0, 0]] - C64::new(n_bar, 0.0)).norm();

    let ok = worst_sigma < 3.0 && occ_err < 1e-10;
    report(
        11,
        "trajectory statistics match the Lyapunov steady state",
        ok,
        &format!(
            "10⁴ trajectories: worst covariance deviation = {worst_sigma:.2} SE; single-mode \
             occupation error = {occ_err:.1e}"
        ),
    );
}

/// C12 — a weakly coupled single-channel ensemble has Porter–Thomas widths,
/// and unfolded GOE spectra have Wigner-surmise spacings, both by
/// Kolmogorov–Smirnov at the 5% level.
#[test]
fn c12_random_matrix_statistics() {
    let spec = EnsembleSpec {
        n_modes: 200,
        n_channels: 1,
        center: 10.0,
        half_width: 4.0,
        coupling_sigma: 2e-3,
        n_samples: 100,
        seed: 909,
    };
    let ws = ensemble_width_statistics(&spec, 0.5).unwrap();
    let d_pt = ks_statistic(&ws.widths, |x| porter_thomas_cdf(x, ws.mean));
    let crit_pt = ks_critical(ws.widths.len(), 0.05);

    let mut spacings = Vec::new();
    for i in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_stream_seed(34_343, i));
        let levels = goe_eigenvalues(200, &mut rng).unwrap();
        let unfolded = unfold(&levels, 7).unwrap();
        spacings.extend(nearest_neighbor_spacings(&unfolded, 0.5).unwrap());
    }
    let d_w = ks_statistic(&spacings, wigner_surmise_cdf);
    let crit_w = ks_critical(spacings.len(), 0.05);

    let ok = d_pt < crit_pt && d_w < crit_w;
    report(
        12,
        "width and spacing statistics match random-matrix laws",
        ok,
        &format!(
            "Porter–Thomas: D = {d_pt:.4} < {crit_pt:.4} (n = {}); Wigner: D = {d_w:.4} < \
             {crit_w:.4} (n = {})",
            ws.widths.len(),
            spacings.len()
        ),
    );
}

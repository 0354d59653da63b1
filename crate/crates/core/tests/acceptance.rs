//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
//! measured numbers. Exits 0 regardless of the verdicts unless
//! `ACCEPTANCE_STRICT=1` is set, so the report is always produced.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rmt_anomaly::analysis::{
    core_width, diffusion_from_spreading, log_log_slope, rescale_collapse, theory_diffusion,
    theory_spreading, universal_diffusion, universal_diffusion_explicit, wigner_time,
    DiffusionRegime, SystemScales, fgr_rate,
};
use rmt_anomaly::dynamics::{
    central_adiabatic_state, ldos, log_time_grid, run_driven, to_complex, PropagatorOptions,
    RunGuards, RunMode, SpreadingCurve,
};
use rmt_anomaly::ensemble::{
    build_frozen_hamiltonian, AdiabaticCoupling, BandProfile, DrivenSystem, LevelSpectrum,
};
use rmt_anomaly::harness::runner::{run_ensembles, time_grid, PointSpec};
use rmt_anomaly::harness::{run_fig2, RunConfig};
use rmt_anomaly::linalg::{dense_apply, operator_moments};
use rmt_anomaly::spectral::{estimate_c, kubo_diffusion, DrivingSpec, SpectralSamples};

struct Report {
    failures: usize,
}

impl Report {
    fn verdict(&mut self, id: &str, title: &str, pass: bool, details: &[String], secs: f64) {
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} {id} {title} ({secs:.1} s)",
            if pass { "PASS" } else { "FAIL" }
        );
        for d in details {
            println!("    {d}");
        }
    }
}

fn base_config() -> RunConfig {
    RunConfig {
        realizations: 16,
        ..RunConfig::default()
    }
}

fn kubo(eps: f64, gamma: f64, omega0: f64, omega_cl: f64) -> f64 {
    let spec = DrivingSpec::from_gamma(eps, 2.0, gamma).unwrap();
    kubo_diffusion(1.0, &spec, omega0, omega_cl).unwrap().diffusion
}

fn criterion_1(rep: &mut Report) {
    let start = Instant::now();
    let mut pass = true;
    let mut details = vec![];
    for eps in [1.0, 5.0, 12.0] {
        let d = kubo(eps, 0.01, 1.0, 50.0);
        let rel = d / (PI * eps * eps) - 1.0;
        let doubled = [
            kubo(eps, 0.02, 1.0, 50.0),
            kubo(eps, 0.01, 2.0, 50.0),
            kubo(eps, 0.01, 1.0, 100.0),
        ];
        let worst = doubled
            .iter()
            .map(|x| (x / d - 1.0).abs())
            .fold(0.0, f64::max);
        pass &= rel.abs() < 0.01 && worst < 0.02;
        details.push(format!(
            "eps={eps}: D/(pi eps^2) - 1 = {rel:+.2e} (tol 1e-2); max change on doubling gamma, omega0, omega_cl = {worst:.2e} (tol 2e-2)"
        ));
    }
    rep.verdict("C1", "Kubo oracle D = pi eps^2", pass, &details, start.elapsed().as_secs_f64());
}

fn criterion_2(rep: &mut Report) {
    let start = Instant::now();
    let (dim, band, m) = (256, 50, 200);
    let mut pass = true;
    let mut details = vec![];
    for (k, s_lambda) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let profile = BandProfile::with_exponent(s_lambda, band).unwrap();
        let mut raw = vec![];
        let mut adiabatic = vec![];
        let mut w = vec![];
        for r in 0..m {
            let seed = 1_000_000 * (k as u64 + 1) + r as u64;
            let sys =
                DrivenSystem::generate(&profile, dim, 1.0, seed, LevelSpectrum::PicketFence)
                    .unwrap();
            let levels = sys.diag.clone();
            raw.push(estimate_c(sys.v2.to_dense().as_ref(), &levels, 1.0, band).unwrap());
            let c = AdiabaticCoupling::new(&sys).unwrap();
            adiabatic.push(estimate_c(c.v_adiabatic.as_ref(), &c.energies, 1.0, band).unwrap());
            w.push(estimate_c(c.w_matrix_imag().as_ref(), &c.energies, 1.0, band).unwrap());
        }
        let slope = |e: &[SpectralSamples]| {
            let mean = SpectralSamples::mean(e).unwrap();
            log_log_slope(&mean.omega_bins, &mean.values, 3.0, 30.0).unwrap()
        };
        let (c_raw, _) = slope(&raw);
        let (c_ad, c_err) = slope(&adiabatic);
        let (w_ad, w_err) = slope(&w);
        let ok_c = (c_ad - (s_lambda - 1.0)).abs() <= 0.1;
        let ok_w = (w_ad - (s_lambda - 3.0)).abs() <= 0.15;
        pass &= ok_c && ok_w;
        details.push(format!(
            "s_lambda={s_lambda}: C slope (adiabatic basis) {c_ad:+.3} +- {c_err:.3} vs {:+.1} +- 0.1 [{}]; W slope {w_ad:+.3} +- {w_err:.3} vs {:+.1} +- 0.15 [{}]; C slope in the unperturbed basis {c_raw:+.3}",
            s_lambda - 1.0,
            if ok_c { "ok" } else { "off" },
            s_lambda - 3.0,
            if ok_w { "ok" } else { "off" },
        ));
    }
    details.push(format!("{m} realizations, N={dim}, b={band}, fit over 3 <= omega <= 30"));
    rep.verdict(
        "C2",
        "spectral equivalence of the generated ensembles",
        pass,
        &details,
        start.elapsed().as_secs_f64(),
    );
}

fn curve<'a>(curves: &'a [SpreadingCurve], mode: RunMode, s0: f64, fdot: f64) -> &'a SpreadingCurve {
    curves
        .iter()
        .find(|c| c.mode == mode && c.params.s0 == s0 && c.params.fdot == fdot)
        .unwrap_or_else(|| panic!("missing {} curve s0={s0} fdot={fdot}", mode.as_str()))
}

fn late_mean(c: &SpreadingCurve, from: f64) -> f64 {
    let v: Vec<f64> = c
        .times
        .iter()
        .zip(&c.variance)
        .filter(|(t, _)| **t >= from)
        .map(|(_, v)| *v)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn criteria_3_4(rep: &mut Report) {
    let start = Instant::now();
    let cfg = base_config();
    let p5 = PointSpec::driven(&cfg, 0, 1.0, 5.0);
    let p12 = PointSpec::driven(&cfg, 1, 1.0, 12.0);
    let t5 = p5.t_eps(RunMode::Driven, 1.0).unwrap();
    let t12 = p12.t_eps(RunMode::Driven, 1.0).unwrap();
    let g5 = time_grid(&cfg, t5).unwrap();
    let jobs = vec![
        (p5, RunMode::Driven, g5.clone()),
        (p5, RunMode::Frozen, g5),
        (p12, RunMode::Driven, time_grid(&cfg, t12).unwrap()),
    ];
    let res = run_ensembles(&cfg, &jobs).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut flagged = vec![];
    for f in &res.failures {
        flagged.push(format!("flagged realization: {} {}", f.mode.as_str(), f.message));
    }

    let driven = curve(&res.curves, RunMode::Driven, 1.0, 5.0);
    let frozen = curve(&res.curves, RunMode::Frozen, 1.0, 5.0);
    let t_max = *driven.times.last().unwrap();
    let (fs, fs_err) = log_log_slope(&frozen.times, &frozen.variance, 3.0 * t5, t_max).unwrap();
    let level = late_mean(frozen, 3.0 * t5);
    let target = (1.0 / t5).powi(2);
    let ratio = level / target;
    let (ds, ds_err) = log_log_slope(&driven.times, &driven.variance, 3.0 * t5, t_max).unwrap();
    let growth = driven.variance.last().unwrap()
        / driven
            .times
            .iter()
            .zip(&driven.variance)
            .find(|(t, _)| **t >= 3.0 * t5)
            .unwrap()
            .1;
    let ok_fs = fs.abs() < 0.2;
    let ok_level = (0.5..=2.0).contains(&ratio);
    let ok_ds = (ds - 1.0).abs() <= 0.2;
    let mut details = vec![
        format!("t_eps = {t5:.4}, window [{:.4}, {t_max:.4}], {} realizations", 3.0 * t5, driven.n_realizations),
        format!("frozen slope {fs:+.3} +- {fs_err:.3} (|slope| < 0.2) [{}]", if ok_fs { "ok" } else { "off" }),
        format!(
            "frozen level {level:.2} vs (hbar/t_eps)^2 = {target:.2}, ratio {ratio:.2} (within 2x) [{}]",
            if ok_level { "ok" } else { "off" }
        ),
        format!("driven slope {ds:+.3} +- {ds_err:.3} (1 +- 0.2) [{}]", if ok_ds { "ok" } else { "off" }),
        format!("driven growth from 3 t_eps to 10 t_eps: x{growth:.2}"),
    ];
    details.extend(flagged);
    rep.verdict(
        "C3",
        "frozen saturation versus driven persistence",
        ok_fs && ok_level && ok_ds,
        &details,
        secs,
    );

    let start = Instant::now();
    let d12 = curve(&res.curves, RunMode::Driven, 1.0, 12.0);
    let collapse = rescale_collapse(&[driven.clone(), d12.clone()], &SystemScales::default()).unwrap();
    let metric = collapse.transient_metric().unwrap();
    let (lo, hi) = collapse.transient_window;
    rep.verdict(
        "C4",
        "Wigner-time collapse of fdot = 5 and 12",
        metric < 0.2,
        &[format!(
            "max relative spread {metric:.3} (< 0.2) over t/t_eps in [{lo:.3}, {hi:.3}]"
        )],
        start.elapsed().as_secs_f64(),
    );
}

fn criterion_5(rep: &mut Report) {
    let start = Instant::now();
    let cfg = base_config();
    let scales = SystemScales::default();
    // t_eps = t_H / 4 puts [3 t_cl, t_eps / 2] well inside the coherent stage
    let t_eps = PI / 2.0;
    let mut jobs = vec![];
    for (k, s0) in [1.5, 0.5].into_iter().enumerate() {
        let s = s0 - 2.0;
        let eps = t_eps.powf(-(2.0 - s) / 2.0);
        let p = PointSpec::driven(&cfg, k, s0, eps / cfg.lambda.sqrt());
        jobs.push((p, RunMode::Driven, log_time_grid(scales.t_cl() / 10.0, t_eps, 60)));
    }
    let res = run_ensembles(&cfg, &jobs).unwrap();
    let mut pass = true;
    let mut details = vec![];
    for (c, tol) in res.curves.iter().zip([0.15, 0.2]) {
        let s = c.params.s();
        let (lo, hi) = (3.0 * scales.t_cl(), t_eps / 2.0);
        let (slope, err) = log_log_slope(&c.times, &c.variance, lo, hi).unwrap();
        let ok = (slope - s.abs()).abs() <= tol;
        pass &= ok;
        details.push(format!(
            "s0={} (s={s}), eps={:.4}: slope {slope:.3} +- {err:.3} on [{lo:.3}, {hi:.3}] vs {} +- {tol} [{}]",
            c.params.s0,
            c.params.eps,
            s.abs(),
            if ok { "ok" } else { "off" }
        ));
    }
    details.push(format!("t_eps = pi/2 for both points, {} realizations", cfg.realizations));
    rep.verdict("C5", "transient spreading exponent", pass, &details, start.elapsed().as_secs_f64());
}

fn criteria_6_7(rep: &mut Report) {
    let start = Instant::now();
    let cfg = RunConfig {
        realizations: 16,
        ..RunConfig::fig2_defaults()
    };
    let record = run_fig2(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let omega_cl = cfg.band as f64;
    let series = |s0: f64, drive_limited: bool| {
        let mut pts: Vec<(f64, f64, String, f64)> = record
            .estimates
            .iter()
            .filter(|e| e.s0 == s0 && (!drive_limited || e.fdot < omega_cl))
            .map(|e| {
                (
                    e.x,
                    e.y,
                    format!(
                        "X={:.3} fdot={:.3} D={:.4e} +- {:.1e} Y={:.4} [{:?}]",
                        e.x, e.fdot, e.d, e.stderr, e.y, e.quality
                    ),
                    e.fdot,
                )
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    };
    let mut extra: Vec<String> = record.warnings.iter().map(|w| format!("warning: {w}")).collect();
    extra.extend(record.failures.iter().map(|f| {
        format!("flagged: s0={} fdot={:.3} realization {}: {}", f.s0, f.fdot, f.realization, f.message)
    }));
    extra.extend(record.failed_points.iter().map(|p| format!("failed point: {p}")));

    let ohmic = series(1.0, false);
    let ys: Vec<f64> = ohmic.iter().map(|p| p.1).collect();
    let within = !ys.is_empty() && ys.iter().all(|y| *y >= PI / 2.0 && *y <= 2.0 * PI);
    let spread = ys.iter().cloned().fold(f64::MIN, f64::max) / ys.iter().cloned().fold(f64::MAX, f64::min);
    let span = ohmic.last().map_or(0.0, |p| p.0) / ohmic.first().map_or(1.0, |p| p.0);
    let mut details: Vec<String> = ohmic.iter().map(|p| p.2.clone()).collect();
    details.push(format!(
        "all Y within [pi/2, 2 pi]: {within}; max/min Y = {spread:.3} (< 2); X span x{span:.1} (>= 10)"
    ));
    details.extend(extra.iter().cloned());
    rep.verdict(
        "C6",
        "Ohmic diffusion Y = D/eps^2 near pi across a decade of X",
        within && spread < 2.0 && ys.len() == cfg.x_list.len() && span >= 9.99,
        &details,
        secs,
    );

    let start = Instant::now();
    let mut pass = true;
    let mut details = vec![];
    // super-Ohmic deviates at small X, sub-Ohmic at large X; in both cases the
    // effective dephasing time drops below t_eps
    for (s0, from_small_end, sign) in [(1.5, true, 1.0), (0.5, false, -1.0)] {
        // a perturbation rotating faster than the bandwidth stops absorbing
        // for a reason unrelated to dephasing, so those points are only shown
        for p in series(s0, false).iter().filter(|p| p.3 >= omega_cl) {
            details.push(format!("s0={s0}: excluded, fdot >= omega_cl: {}", p.2));
        }
        let pts = series(s0, true);
        let k = pts.len();
        if k < 5 {
            pass = false;
            details.push(format!("s0={s0}: only {k} estimates"));
            continue;
        }
        let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if !from_small_end {
            ys.reverse();
        }
        // ys[0] is the deviating end, the middle of the sweep is the reference
        let central: Vec<f64> = ys[k / 2 - 1..=k / 2].to_vec();
        let central_mean = central.iter().sum::<f64>() / central.len() as f64;
        let central_flat = central[0].max(central[1]) / central[0].min(central[1]) < 2.0;
        let dev0 = (ys[0] / central_mean).ln() * sign;
        let dev1 = (ys[1] / central_mean).ln() * sign;
        let ok = dev0 > 0.0 && dev0 > dev1 && central_flat;
        pass &= ok;
        for p in &pts {
            details.push(format!("s0={s0}: {}", p.2));
        }
        details.push(format!(
            "s0={s0}: expected Y {} at {} X; ln(Y_end/Y_central) = {:+.3}, next {:+.3}; central flat: {central_flat} [{}]",
            if sign > 0.0 { "rising" } else { "falling" },
            if from_small_end { "small" } else { "large" },
            dev0 * sign,
            dev1 * sign,
            if ok { "ok" } else { "off" }
        ));
    }
    rep.verdict(
        "C7",
        "direction of the non-Ohmic departures from universality",
        pass,
        &details,
        start.elapsed().as_secs_f64(),
    );
}

fn criterion_8(rep: &mut Report) {
    let start = Instant::now();
    let mut details = vec![];

    // unitarity and step halving on a full-size driven run
    let profile = BandProfile::with_exponent(1.0, 50).unwrap();
    let sys = DrivenSystem::generate(&profile, 1024, 5.0, 8, LevelSpectrum::PicketFence).unwrap();
    let frozen = build_frozen_hamiltonian(&sys).unwrap();
    let psi0 = central_adiabatic_state(&frozen);
    let t_eps = wigner_time(5.0, -1.0, 1.0).unwrap();
    let times = log_time_grid(0.0126, 10.0 * t_eps, 40);
    let guards = RunGuards::new(50);
    let opts = PropagatorOptions::for_driving(5.0, 50.0);
    let coarse = run_driven(&sys, &psi0, &times, &opts, &guards).unwrap();
    let halved = PropagatorOptions {
        max_step: opts.max_step / 2.0,
        ..opts
    };
    let fine = run_driven(&sys, &psi0, &times, &halved, &guards).unwrap();
    let drift = coarse.max_norm_drift.max(fine.max_norm_drift);
    let (a, b) = (*coarse.variance.last().unwrap(), *fine.variance.last().unwrap());
    let halving = ((a - b) / b).abs();
    let ok_unitary = drift < 1e-8;
    let ok_halving = halving < 1e-3;
    details.push(format!("max norm drift {drift:.2e} (< 1e-8), step {}", opts.max_step));
    details.push(format!("step halving changes dE^2(T_max) by {halving:.2e} (< 1e-3)"));

    // LDoS second moment against <dH^2> - <dH>^2
    let small = DrivenSystem::generate(
        &BandProfile::with_exponent(1.0, 20).unwrap(),
        200,
        3.0,
        5,
        LevelSpectrum::PicketFence,
    )
    .unwrap();
    let fz = build_frozen_hamiltonian(&small).unwrap();
    let h0 = to_complex(small.build_hamiltonian(0.0).as_ref());
    let n0 = 100;
    let dist = ldos(h0.as_ref(), fz.h_frozen.as_ref(), n0).unwrap();
    let mean = dist.mean();
    let var: f64 = dist
        .energies
        .iter()
        .zip(&dist.probabilities)
        .map(|(e, p)| p * (e - mean).powi(2))
        .sum();
    let state: Vec<_> = psi_of(&fz, n0);
    let dh = rmt_anomaly::dynamics::to_complex(
        faer::Mat::<f64>::from_fn(200, 200, |i, j| fz.h_frozen[(i, j)].im).as_ref(),
    );
    let dh = faer::Mat::from_fn(200, 200, |i, j| {
        num_complex::Complex64::new(0.0, 1.0) * dh[(i, j)]
    });
    let (_, moment) = operator_moments(&state, |x, y| dense_apply(dh.as_ref(), x, y));
    let ldos_rel = ((var - moment) / moment).abs();
    let ok_ldos = ldos_rel < 1e-8;
    details.push(format!("LDoS second-moment identity relative error {ldos_rel:.2e} (< 1e-8)"));

    let (worst, count) = substitution_identities();
    let ok_ident = worst < 1e-12;
    details.push(format!(
        "substitution identities: worst relative error {worst:.2e} over {count} random parameter sets (< 1e-12)"
    ));
    rep.verdict(
        "C8",
        "numerical hygiene",
        ok_unitary && ok_halving && ok_ldos && ok_ident,
        &details,
        start.elapsed().as_secs_f64(),
    );
}

fn psi_of(fz: &rmt_anomaly::ensemble::FrozenSystem, n0: usize) -> Vec<num_complex::Complex64> {
    (0..fz.dim())
        .map(|i| num_complex::Complex64::new(fz.reference.basis[(i, n0)], 0.0))
        .collect()
}

/// Worst relative mismatch across the closed-form relations between the
/// theory formulas at random parameters.
fn substitution_identities() -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut rel = |a: f64, b: f64| worst = worst.max(((a - b) / b).abs());
    let samples = 500;
    for _ in 0..samples {
        let hbar = rng.random_range(0.5..2.0);
        let eps = rng.random_range(0.1..10.0);
        let omega_cl = rng.random_range(10.0..200.0);
        let sc = SystemScales {
            omega0: 1.0,
            omega_cl,
            hbar,
            rho: 1.0,
        };
        let s_neg = -rng.random_range(0.1..1.9);
        let s_pos = rng.random_range(0.1..1.9);
        let s_any = if rng.random_bool(0.5) { s_neg } else { s_pos };

        // D_eps = hbar^2 / t_eps^3 in both written forms
        rel(
            universal_diffusion_explicit(eps, s_any, hbar).unwrap(),
            universal_diffusion(eps, s_any, hbar).unwrap(),
        );
        rel(
            universal_diffusion(eps, s_any, hbar).unwrap(),
            hbar * hbar / wigner_time(eps, s_any, hbar).unwrap().powi(3),
        );
        // golden-rule and breaktime forms of t_eps
        rel(
            wigner_time(eps, 1.0, hbar).unwrap() / (hbar / fgr_rate(eps, hbar)),
            2.0 * PI,
        );
        rel(
            wigner_time(eps, -1.0, hbar).unwrap() / (hbar * hbar / (PI * eps * eps)).cbrt(),
            PI.cbrt(),
        );

        // s > 0: diffusion from the saturated width equals half the hopping estimate
        let t_phi = sc.t_cl() * rng.random_range(1.0..100.0);
        let de = theory_spreading(s_pos, eps, t_phi, &sc).unwrap();
        rel(
            diffusion_from_spreading(de, t_phi),
            0.5 * theory_diffusion(s_pos, eps, t_phi, &sc, DiffusionRegime::Lrt).unwrap(),
        );

        // s < 0, weak and strong driving
        let t_eps = wigner_time(eps, s_neg, hbar).unwrap();
        if t_eps > sc.t_cl() * 1.001 {
            let t_phi = sc.t_cl() * (t_eps / sc.t_cl()).powf(rng.random_range(0.0..1.0));
            let t_phi = t_phi.clamp(sc.t_cl(), t_eps * (1.0 - 1e-12));
            let de = theory_spreading(s_neg, eps, t_phi, &sc).unwrap();
            rel(
                diffusion_from_spreading(de, t_phi),
                0.5 * theory_diffusion(s_neg, eps, t_phi, &sc, DiffusionRegime::Lrt).unwrap(),
            );
        }
        let t_phi = t_eps.max(sc.t_cl()) * rng.random_range(1.0..50.0);
        let de = theory_spreading(s_neg, eps, t_phi, &sc).unwrap();
        rel(
            diffusion_from_spreading(de, t_phi),
            0.5 * theory_diffusion(s_neg, eps, t_phi, &sc, DiffusionRegime::StrongDriving).unwrap(),
        );
        // strong-driving result at t_phi = t_eps is the universal one
        rel(
            theory_diffusion(s_neg, eps, t_eps, &sc, DiffusionRegime::StrongDriving).unwrap(),
            universal_diffusion(eps, s_neg, hbar).unwrap(),
        );
        // the two terms of the core width coincide at t_eps
        let a = -s_neg;
        let g = core_width(s_neg, eps, t_eps, hbar).unwrap();
        rel(g, (2.0 * t_eps.powf(a)).powf(-1.0 / a));
    }
    (worst, samples)
}

fn criterion_9(rep: &mut Report) {
    let start = Instant::now();
    let cfg = base_config();
    let scales = SystemScales::default();
    let eps_fgr = 0.7;
    let gamma = fgr_rate(eps_fgr, 1.0);
    let linear: Vec<f64> = (1..=120).map(|k| k as f64 * 0.01).collect();
    let levels_eps = [0.05, 0.1, 0.2, 0.4];
    let t_cl = scales.t_cl();
    let grid = log_time_grid(t_cl / 10.0, 3.0, 40);
    let mut jobs = vec![(PointSpec::quench(0, 1.0, eps_fgr), RunMode::Quench, linear)];
    for (k, &e) in levels_eps.iter().enumerate() {
        jobs.push((PointSpec::quench(1 + k, 1.5, e), RunMode::Quench, grid.clone()));
    }
    let res = run_ensembles(&cfg, &jobs).unwrap();

    let c = &res.curves[0];
    let surv = c.survival.as_ref().unwrap();
    let (lo, hi) = (0.2 / gamma, 1.0 / gamma);
    let (t, lp): (Vec<f64>, Vec<f64>) = c
        .times
        .iter()
        .zip(surv)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, p)| (*t, p.ln()))
        .unzip();
    let n = t.len() as f64;
    let (tm, lm) = (t.iter().sum::<f64>() / n, lp.iter().sum::<f64>() / n);
    let slope = t.iter().zip(&lp).map(|(a, b)| (a - tm) * (b - lm)).sum::<f64>()
        / t.iter().map(|a| (a - tm).powi(2)).sum::<f64>();
    let rate = -slope;
    let ok_rate = (rate / gamma - 1.0).abs() <= 0.2;

    let levels: Vec<f64> = res.curves[1..].iter().map(|c| late_mean(c, t_cl)).collect();
    let eps2: Vec<f64> = levels_eps.iter().map(|e| e * e).collect();
    let (lslope, lerr) = log_log_slope(&eps2, &levels, 0.0, f64::INFINITY).unwrap();
    let ok_level = (lslope - 1.0).abs() <= 0.1;
    let flat: Vec<f64> = res.curves[1..]
        .iter()
        .map(|c| log_log_slope(&c.times, &c.variance, t_cl, 3.0).unwrap().0)
        .collect();
    let ok_flat = flat.iter().all(|s| s.abs() < 0.1);

    let mut details = vec![
        format!(
            "s0=1, eps={eps_fgr}: survival decay rate {rate:.3} vs Gamma_E = {gamma:.3}, ratio {:.3} (within 20%) over t in [{lo:.3}, {hi:.3}] [{}]",
            rate / gamma,
            if ok_rate { "ok" } else { "off" }
        ),
        format!(
            "s0=1.5: saturation levels {:?} at eps^2 = {:?}",
            levels.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>(),
            eps2
        ),
        format!("s0=1.5: level versus eps^2 log-log slope {lslope:.3} +- {lerr:.3} (1 +- 0.1) [{}]", if ok_level { "ok" } else { "off" }),
        format!(
            "s0=1.5: log-log slope of dE^2 after t_cl {:?} (|slope| < 0.1) [{}]",
            flat.iter().map(|s| format!("{s:+.3}")).collect::<Vec<_>>(),
            if ok_flat { "ok" } else { "off" }
        ),
        format!(
            "eps^2 omega_cl^1.5 at eps = 0.1: {:.3}, measured {:.3}",
            0.01 * 50f64.powf(1.5),
            levels[1]
        ),
    ];
    details.extend(res.failures.iter().map(|f| format!("flagged: {}", f.message)));
    rep.verdict(
        "C9",
        "quench golden-rule decay and saturation",
        ok_rate && ok_level && ok_flat,
        &details,
        start.elapsed().as_secs_f64(),
    );
}

fn main() {
    // cargo passes test-harness flags through; only listing needs an answer
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut rep = Report { failures: 0 };
    criterion_1(&mut rep);
    criterion_8(&mut rep);
    criterion_9(&mut rep);
    criterion_2(&mut rep);
    criteria_3_4(&mut rep);
    criterion_5(&mut rep);
    criteria_6_7(&mut rep);
    println!("acceptance: {} of 9 criteria failed", rep.failures);
    if rep.failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

//! Acceptance gate: every shipped guarantee, one test each, at its stated
//! tolerance and runtime budget.
//!
//! Each test prints the measured numbers next to the window it must hit, so
//! a failure log shows the margin, not just the verdict. Criteria that
//! specify a wall-clock budget assert it with [`Instant`]; the budgets are
//! generous on purpose — they exist to catch algorithmic regressions
//! (quadratic loops, runaway iteration), not scheduler jitter.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mclink_core::config::ExperimentConfig;
use mclink_core::fitting::{fit_isotherm, fit_kinetics, FitOptions};
use mclink_core::kinetics::{
    association_trace_ua, dissociation_trace_ua, equilibrium_occupancy, fixtures,
    isotherm_response_ua, transduction_constant_a, BindingKinetics, SensingPoint,
};
use mclink_core::lambertw::lambert_w0;
use mclink_core::pulse::{pulse_response_ua, PulseModelParams};
use mclink_core::txrx::{ber_sweep, detect_bits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mclink")
}

fn reference_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

fn reference_config() -> ExperimentConfig {
    let text = std::fs::read_to_string(reference_config_path()).unwrap();
    let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
    cfg.validate().unwrap();
    cfg
}

/// Run the binary, demand success, return stdout.
fn stdout_of(args: &[&str]) -> String {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "mclink {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Pull one `key = value` float out of a report.
fn report_f64(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| {
            let (k, v) = l.split_once(" = ")?;
            (k == key).then(|| v.parse().unwrap())
        })
        .unwrap_or_else(|| panic!("no `{key}` in report:\n{report}"))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn assert_within(label: &str, actual: f64, expected: f64, tol: f64) {
    println!("  {label}: {actual} (expected {expected} ± {tol})");
    assert!(
        (actual - expected).abs() <= tol,
        "{label} = {actual} outside {expected} ± {tol}"
    );
}

fn assert_budget(start: Instant, budget_s: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("  runtime: {elapsed:.3} s (budget {budget_s} s)");
    assert!(elapsed < budget_s, "took {elapsed:.3} s, budget {budget_s} s");
}

/// Reference single-pulse kernel shared by the pulse-property criterion:
/// tDNA kinetics driven at 1 µM, mildly transport-limited, 30 s residence.
fn reference_pulse() -> PulseModelParams {
    let q = transduction_constant_a(-28.0, 1.943e-18, 6.58e-2).unwrap();
    PulseModelParams::new(
        fixtures::tdna(),
        fixtures::EQUILIBRIUM_DELTA_I_UA,
        q,
        1e-6,
        1.3e10,
        55.0,
        85.0,
    )
    .unwrap()
}

#[test]
fn criterion_1_physchem_numbers_match_the_reference_device() {
    let start = Instant::now();
    let cfg = reference_config_path();
    let report = stdout_of(&["--config", cfg.to_str().unwrap(), "physchem"]);

    assert_within("Re", report_f64(&report, "reynolds_number"), 0.4839, 1e-3);
    assert_within(
        "u [µm/s]",
        report_f64(&report, "mean_velocity_um_per_s"),
        222.2,
        0.5,
    );
    assert_within(
        "λ_D hybridization [nm]",
        report_f64(&report, "debye_length_hybridization_nm"),
        0.775,
        5e-3,
    );
    assert_within(
        "λ_D measurement [nm]",
        report_f64(&report, "debye_length_measurement_nm"),
        7.746,
        1e-2,
    );
    let cg_hyb = report_f64(&report, "gate_capacitance_hybridization_nf");
    assert_within("C_G hybridization [nF]", cg_hyb, 7.83e-2, 0.01 * 7.83e-2);
    let cg_meas = report_f64(&report, "gate_capacitance_measurement_nf");
    assert_within("C_G measurement [nF]", cg_meas, 6.58e-2, 0.01 * 6.58e-2);
    assert_budget(start, 1.0);
}

#[test]
fn criterion_2_isotherm_fit_recovers_kd_and_saturation() {
    let start = Instant::now();
    let kd = fixtures::ISOTHERM_KD_MOLAR;
    let sat = fixtures::ISOTHERM_DELTA_I_SAT_UA;
    let clean: Vec<SensingPoint> = fixtures::ISOTHERM_CONCENTRATIONS_M
        .iter()
        .map(|&c| SensingPoint {
            concentration_molar: c,
            delta_i_ua: isotherm_response_ua(c, kd, sat).unwrap(),
        })
        .collect();

    // Zero noise: six significant digits on both constants.
    let fit = fit_isotherm(&clean, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert_within("zero-noise K_D [M]", fit.kd_molar, kd, 5e-7 * kd);
    assert_within("zero-noise ΔI_sat [µA]", fit.delta_i_sat_ua, sat, 5e-7 * sat);

    // 2% multiplicative noise: median over 20 seeds within 5%.
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut kds = Vec::new();
    let mut sats = Vec::new();
    for seed in 1..=20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let noisy: Vec<SensingPoint> = clean
            .iter()
            .map(|p| SensingPoint {
                concentration_molar: p.concentration_molar,
                delta_i_ua: p.delta_i_ua * (1.0 + 0.02 * normal.sample(&mut rng)),
            })
            .collect();
        let fit = fit_isotherm(&noisy, &FitOptions::default()).unwrap();
        assert!(fit.converged, "seed {seed} did not converge");
        kds.push(fit.kd_molar);
        sats.push(fit.delta_i_sat_ua);
    }
    assert_within("2%-noise median K_D [M]", median(&mut kds), kd, 0.05 * kd);
    assert_within(
        "2%-noise median ΔI_sat [µA]",
        median(&mut sats),
        sat,
        0.05 * sat,
    );
    assert_budget(start, 5.0);
}

#[test]
fn criterion_3_kinetics_fit_recovers_all_three_probe_target_pairs() {
    let start = Instant::now();
    let c = 1e-6;
    let t_d = 1800.0;
    let rows: [(&str, BindingKinetics); 3] = [
        ("tDNA", fixtures::tdna()),
        ("ntDNA1", fixtures::ntdna1()),
        ("ntDNA2", fixtures::ntdna2()),
    ];

    let mut fitted_kd = Vec::new();
    for (seed, (name, kin)) in rows.iter().enumerate() {
        // Clean two-phase transient: 1800 s association, 1200 s
        // dissociation, 1 s sampling, amplitude set by the isotherm.
        let occ = equilibrium_occupancy(c, kin).unwrap();
        let di_eq = -fixtures::ISOTHERM_DELTA_I_SAT_UA * occ;
        let times: Vec<f64> = (0..=3000).map(f64::from).collect();
        let di_td = association_trace_ua(t_d, c, kin, di_eq).unwrap();
        let clean: Vec<f64> = times
            .iter()
            .map(|&t| {
                if t <= t_d {
                    association_trace_ua(t, c, kin, di_eq).unwrap()
                } else {
                    dissociation_trace_ua(t, t_d, kin.k_off_per_s, di_td).unwrap()
                }
            })
            .collect();

        // 1% measurement noise relative to the equilibrium step.
        let mut rng = ChaCha12Rng::seed_from_u64(seed as u64 + 1);
        let noise = Normal::new(0.0, 0.01 * di_eq.abs()).unwrap();
        let noisy: Vec<f64> = clean.iter().map(|&y| y + noise.sample(&mut rng)).collect();

        let fit = fit_kinetics(&times, &noisy, c, t_d, 1.0, &FitOptions::default()).unwrap();
        assert!(fit.converged, "{name} fit did not converge");
        println!("  {name}:");
        assert_within(
            "  k_on [1/(M·s)]",
            fit.k_on_per_molar_s,
            kin.k_on_per_molar_s,
            0.05 * kin.k_on_per_molar_s,
        );
        assert_within(
            "  k_off [1/s]",
            fit.k_off_per_s,
            kin.k_off_per_s,
            0.05 * kin.k_off_per_s,
        );
        fitted_kd.push(fit.kd_molar);
    }

    // Selectivity ordering of the fitted dissociation constants survives.
    println!("  fitted K_D ordering: {fitted_kd:?}");
    assert!(fitted_kd[0] < fitted_kd[1] && fitted_kd[1] < fitted_kd[2]);
    assert_budget(start, 30.0);
}

#[test]
fn criterion_4_lambert_w_round_trip_and_branch_values() {
    let n = 10_000;
    let mut worst = 0.0f64;
    for i in 0..n {
        let w = -1.0 + 21.0 * i as f64 / (n - 1) as f64;
        let back = lambert_w0(w * w.exp()).unwrap();
        let rel = (back - w).abs() / w.abs();
        worst = worst.max(rel);
        assert!(rel <= 1e-10, "w={w}: back={back}, rel={rel:e}");
    }
    println!("  worst round-trip relative error over {n} points: {worst:e}");

    let e = std::f64::consts::E;
    assert_within("W₀(0)", lambert_w0(0.0).unwrap(), 0.0, 1e-12);
    assert_within("W₀(e)", lambert_w0(e).unwrap(), 1.0, 1e-12);
    assert_within("W₀(−1/e)", lambert_w0(-1.0 / e).unwrap(), -1.0, 1e-12);
}

#[test]
fn criterion_5_pulse_model_properties() {
    let p = reference_pulse();
    let scale = p.delta_i_eq_ua.abs();

    // Exactly zero up to arrival — bitwise, not approximately.
    for t in [0.0, 10.0, 54.999_999, p.t_a_s] {
        assert_eq!(pulse_response_ua(t, &p).unwrap(), 0.0, "t={t}");
    }
    println!("  response ≡ 0 for t ≤ t_a: exact");

    // Continuous at the flush instant to 1e-9·|ΔI_eq|.
    let before = pulse_response_ua(p.t_d_s, &p).unwrap();
    let after = pulse_response_ua(p.t_d_s + 1e-9, &p).unwrap();
    println!("  flush discontinuity: {:e} (cap {:e})", (before - after).abs(), 1e-9 * scale);
    assert!((before - after).abs() <= 1e-9 * scale);

    // Reaction-limited limit: once transport is overwhelming, the response
    // collapses onto the ideal first-order association/dissociation
    // transient, checked brute-force on a 1 s grid.
    let n_eq = p.equilibrium_receptors();
    let k_t = 1e6 * p.kinetics.k_on_per_molar_s * n_eq / p.c_avg_molar;
    let lang = PulseModelParams::new(
        p.kinetics.clone(),
        p.delta_i_eq_ua,
        p.transduction_a,
        p.c_avg_molar,
        k_t,
        p.t_a_s,
        p.t_d_s,
    )
    .unwrap();
    let rate = lang.kinetics.association_rate_per_s(lang.c_avg_molar);
    let di_td = lang.delta_i_eq_ua * (1.0 - (-rate * (lang.t_d_s - lang.t_a_s)).exp());
    let mut worst = 0.0f64;
    for i in 0..=2000 {
        let t = f64::from(i);
        let model = pulse_response_ua(t, &lang).unwrap();
        let ideal = if t <= lang.t_a_s {
            0.0
        } else if t <= lang.t_d_s {
            association_trace_ua(t - lang.t_a_s, lang.c_avg_molar, &lang.kinetics, lang.delta_i_eq_ua)
                .unwrap()
        } else {
            dissociation_trace_ua(t, lang.t_d_s, lang.kinetics.k_off_per_s, di_td).unwrap()
        };
        worst = worst.max((model - ideal).abs());
        assert!(
            (model - ideal).abs() <= 5e-3 * scale,
            "t={t}: model={model}, ideal={ideal}"
        );
    }
    println!("  worst Langmuir-limit deviation: {worst:e} (cap {:e})", 5e-3 * scale);

    // Longer residence binds more: 60 s peak dominates the 30 s peak.
    let p60 = p.with_window(p.t_a_s, p.t_a_s + 60.0).unwrap();
    let peak30 = pulse_response_ua(p.t_d_s, &p).unwrap().abs();
    let peak60 = pulse_response_ua(p60.t_d_s, &p60).unwrap().abs();
    println!("  peaks: 30 s → {peak30}, 60 s → {peak60}");
    assert!(peak60 >= peak30);
}

#[test]
fn criterion_6_end_to_end_bit_error_rates() {
    let start = Instant::now();
    let seeds: Vec<u64> = (1..=50).collect();
    let sweep = |bit_period_s: f64, filtered: bool| -> f64 {
        let mut cfg = reference_config();
        cfg.tx.bit_period_s = bit_period_s;
        cfg.rx.filter_enabled = filtered;
        let mut bers = ber_sweep(&cfg.link_params().unwrap(), &seeds).unwrap();
        median(&mut bers)
    };

    let filtered_120 = sweep(120.0, true);
    println!("  filtered, T_b = 120 s: median BER = {filtered_120}");
    assert_eq!(filtered_120, 0.0);

    for bit_period_s in [60.0, 360.0] {
        let m = sweep(bit_period_s, false);
        println!("  unfiltered, T_b = {bit_period_s} s: median BER = {m}");
        assert!((0.0..=0.15).contains(&m), "median {m} outside [0, 0.15]");
        assert!((m - 0.05).abs() <= 0.05, "median {m} not near 0.05");
    }
    assert_budget(start, 60.0);
}

#[test]
fn criterion_7_difference_detector_is_affine_invariant() {
    // The decoder must depend only on the ordering of decision samples, so
    // any r → a·r + b with a > 0 leaves every decoded bit unchanged.
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let indices: Vec<usize> = (0..=20).map(|i| i * 9).collect();
    for vector in 0..100 {
        let samples: Vec<f64> = (0..200).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let reference = detect_bits(&samples, &indices);
        for _ in 0..100 {
            let a: f64 = rng.gen_range(1e-3..1e3);
            let b: f64 = rng.gen_range(-1e4..1e4);
            let transformed: Vec<f64> = samples.iter().map(|&r| a * r + b).collect();
            assert_eq!(
                detect_bits(&transformed, &indices),
                reference,
                "vector {vector}, transform a={a}, b={b}"
            );
        }
    }
    println!("  100 vectors × 100 affine transforms: all decodes identical");
}

#[test]
fn criterion_8_simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config_path();
    let run = |name: &str| {
        let out = dir.path().join(name);
        stdout_of(&[
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for name in [
        "clean.csv",
        "noisy.csv",
        "filtered.csv",
        "normalized.csv",
        "sent.bits",
        "decoded.bits",
        "decisions.csv",
        "report.txt",
        "manifest.toml",
    ] {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        let bytes_b = std::fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between identical runs");
    }
    println!("  two runs, nine artifacts each: byte-identical");
}

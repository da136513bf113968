//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcs_core::calibration::{
    fit_two_gate_batch, fixed_offset_miscalibration, identity_calibration, CouplerRun, FitConfig, NativeParams,
};
use rcs_core::circuit::{coupler_circuit, generate_random_circuit, generate_variant, Cut, Variant};
use rcs_core::dataio::{
    parse_amplitudes, parse_circuit, parse_samples, sample_amplitudes, verify_alignment, write_amplitudes,
    write_circuit, write_file, write_samples, DatasetManifest, ManifestEntry,
};
use rcs_core::estimators::{f_xeb_from_probs, porter_thomas_check, product_fidelity_averaged};
use rcs_core::layout::{Edge, GridQubit, PatternKind};
use rcs_core::noise::{
    apply_readout_errors, pauli_trajectory_sample, sample_noise_model, ComponentErrorRates, ReadoutRates,
};
use rcs_core::protocol::{
    challenge, respond, verify, CalibrationOrder, ChallengeConfig, OffsetKind, ProverConfig, ProverNoise, Published,
};
use rcs_core::simulator::{exact_sample, simulate, simulate_patch_factored, SimConfig};
use rcs_core::spectral::{fit_secondary_fidelity, fwht, level_fidelity_with_bands};

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 2^n Σ p² − 1 summed directly.
fn xeb_oracle(probs: &[f64]) -> f64 {
    probs.len() as f64 * probs.iter().map(|p| p * p).sum::<f64>() - 1.0
}

fn c1_product_formula() -> Outcome {
    let start = Instant::now();
    let value = product_fidelity_averaged(53, 1113, 430);
    let elapsed = start.elapsed();
    // Exact rational (9984/10⁴)^1113 (9938/10⁴)^430 (962/10³)^53, to 60 digits.
    let num = BigUint::from(9984u32).pow(1113) * BigUint::from(9938u32).pow(430) * BigUint::from(962u32).pow(53);
    let den_exp = 4 * 1113 + 4 * 430 + 3 * 53;
    let digits = 60u32;
    let scaled = num * BigUint::from(10u32).pow(digits) / BigUint::from(10u32).pow(den_exp);
    let text = scaled.to_string();
    let exponent = text.len() as i32 - digits as i32 - 1;
    let oracle: f64 = format!("{}.{}e{}", &text[..1], &text[1..25], exponent).parse().unwrap();
    assert!(text.len() > 50, "oracle keeps at least 50 significant digits");
    let rel = (value - oracle).abs() / oracle;
    outcome(
        value > 1e-3 && rel < 1e-12 && elapsed < Duration::from_millis(1),
        format!("phi={value:.6e} oracle={oracle:.6e} rel_err={rel:.1e} eval={elapsed:?}"),
    )
}

fn c2_formula_predicts_trajectories() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [10, 12, 14] {
        let c = generate_random_circuit(7, n, 14, PatternKind::Efgh).unwrap();
        let rates = ComponentErrorRates::uniform(&c, 0.0016, 0.0062, 0.038);
        let run = pauli_trajectory_sample(&c, &identity_calibration(&c), &rates, 500_000, 11).unwrap();
        let probs = simulate(&c, None).unwrap().probabilities();
        let measured = f_xeb_from_probs(&run.samples, &probs).unwrap().estimate;
        let predicted = product_fidelity_averaged(n, c.one_qubit_count(), c.two_qubit_count());
        let rel = (measured - predicted) / predicted;
        pass &= rel.abs() < 0.2;
        parts.push(format!(
            "n={n}: F={measured:.4} pred={predicted:.4} dev={:+.1}%",
            100.0 * rel
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c3_mixture_estimator() -> Outcome {
    let c = generate_random_circuit(3, 12, 14, PatternKind::Efgh).unwrap();
    let probs = simulate(&c, None).unwrap().probabilities();
    let ideal = xeb_oracle(&probs);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, phi) in [0.0, 0.25, 0.5, 1.0].into_iter().enumerate() {
        let s = sample_noise_model(&probs, &c.qubits, phi, 500_000, 100 + i as u64).unwrap();
        let x = f_xeb_from_probs(&s, &probs).unwrap();
        let z = (x.estimate - phi * ideal) / x.std_error;
        pass &= z.abs() <= 3.0;
        parts.push(format!("phi={phi}: z={z:+.2}"));
    }
    outcome(pass, parts.join(" "))
}

fn c4_patch_factorization() -> Outcome {
    let c = generate_variant(5, 16, 14, PatternKind::Efgh, Variant::Patch).unwrap();
    let cut = Cut::vertical_bisection(&c.qubits);
    let sizes = (cut.left.len(), cut.right.len());
    let factored = simulate_patch_factored(&c, &cut, None).unwrap().joint_probabilities();
    let direct = simulate(&c, None).unwrap().probabilities();
    let max = factored
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        sizes == (8, 8) && factored.len() == 65_536 && max < 1e-10,
        format!(
            "cut={}+{} outcomes={} max_dev={max:.1e}",
            sizes.0,
            sizes.1,
            factored.len()
        ),
    )
}

fn c5_porter_thomas() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [12, 14, 16] {
        let mut ks_pass = 0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for seed in 0..20 {
            let c = generate_random_circuit(1000 + seed, n, 14, PatternKind::Efgh).unwrap();
            let probs = simulate(&c, None).unwrap().probabilities();
            if porter_thomas_check(&probs).unwrap().p_value >= 1e-3 {
                ks_pass += 1;
            }
            let second = xeb_oracle(&probs) + 1.0;
            lo = lo.min(second);
            hi = hi.max(second);
        }
        pass &= ks_pass >= 19 && lo >= 1.8 && hi <= 2.2;
        parts.push(format!("n={n}: KS {ks_pass}/20, 2^nΣp² in [{lo:.3}, {hi:.3}]"));
    }
    outcome(pass, parts.join("; "))
}

fn c6_spectral_decay() -> Outcome {
    let e = 0.05;
    let c = generate_random_circuit(17, 12, 14, PatternKind::Efgh).unwrap();
    let probs = simulate(&c, None).unwrap().probabilities();
    let clean = exact_sample(&probs, &c.qubits, 1_000_000, 5).unwrap();
    let noisy = apply_readout_errors(&clean, &[ReadoutRates::symmetric(e); 12], 6).unwrap();
    let spectrum = level_fidelity_with_bands(&noisy, &probs, 200, 3).unwrap();
    let mut worst_z = 0.0f64;
    let mut checked = 0;
    for (k, phi_k) in spectrum.usable_levels() {
        if let Some(Some(sd)) = spectrum.band_sd.as_ref().map(|b| b[k]) {
            worst_z = worst_z.max((phi_k - (1.0 - 2.0 * e).powi(k as i32)).abs() / sd);
            checked += 1;
        }
    }
    let fit = fit_secondary_fidelity(&spectrum, 1..=8).unwrap();
    let primary = f_xeb_from_probs(&noisy, &probs).unwrap().estimate / xeb_oracle(&probs);
    let implied = fit.implied_xeb_fidelity(&spectrum);
    let implied_rel = (implied - primary).abs() / primary;
    outcome(
        checked > 0 && worst_z <= 3.0 && (fit.e_hat - e).abs() <= 0.01 && (fit.phi_hat - 1.0).abs() <= 0.15 && implied_rel <= 0.15,
        format!(
            "levels={checked} max|z|={worst_z:.2} e_hat={:.4} phi_hat={:.3} implied={implied:.4} primary={primary:.4} ({:.1}%)",
            fit.e_hat,
            fit.phi_hat,
            100.0 * implied_rel
        ),
    )
}

fn c7_calibration() -> Outcome {
    let edge = Edge::new(GridQubit::new(3, 3), GridQubit::new(3, 4)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut recovered = 0;
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let planted = NativeParams {
            theta: PI / 2.0 + rng.random_range(-0.3..0.3),
            phi: PI / 6.0 + rng.random_range(-0.3..0.3),
        };
        // 50k samples per trial, spread over ten random coupler circuits.
        let runs: Vec<CouplerRun> = (0..10)
            .map(|i| {
                let ideal = coupler_circuit(1000 * trial + i, edge, 14);
                let mut cal = identity_calibration(&ideal);
                cal.native.insert(edge, planted);
                let device = simulate(&ideal, Some(&cal)).unwrap().probabilities();
                let samples = exact_sample(&device, &ideal.qubits, 5_000, 1000 * trial + i + 500).unwrap();
                CouplerRun { ideal, samples }
            })
            .collect();
        let config = FitConfig {
            seed: trial,
            ..FitConfig::default()
        };
        let fit = fit_two_gate_batch(&runs, &config).unwrap();
        let err = (fit.theta_hat - planted.theta)
            .abs()
            .max((fit.phi_hat - planted.phi).abs());
        worst = worst.max(err);
        if err <= 0.02 {
            recovered += 1;
        }
    }

    let mut ignored = Vec::new();
    for seed in 0..3 {
        let c = generate_random_circuit(300 + seed, 12, 14, PatternKind::Efgh).unwrap();
        let actual = fixed_offset_miscalibration(&c, seed, 0.3).unwrap();
        let device = simulate(&c, Some(&actual)).unwrap().probabilities();
        let samples = exact_sample(&device, &c.qubits, 500_000, seed).unwrap();
        let assumed = simulate(&c, None).unwrap().probabilities();
        ignored.push(f_xeb_from_probs(&samples, &assumed).unwrap().estimate);
    }
    let max_ignored = ignored.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        recovered >= 19 && max_ignored < 0.05,
        format!(
            "recovered {recovered}/20 (worst err {worst:.4} rad); F_XEB with calibration ignored: {}",
            ignored.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c8_fwht() -> Outcome {
    let n = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = fwht(&x).unwrap();
    let z = fwht(&y).unwrap();
    let scale = (1u64 << n) as f64;
    let max_x = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let involution = x.iter().zip(&z).map(|(a, b)| (b / scale - a).abs()).fold(0.0, f64::max) / max_x;
    let ex: f64 = x.iter().map(|v| v * v).sum();
    let ey: f64 = y.iter().map(|v| v * v).sum();
    let parseval = (ey / scale - ex).abs() / ex;
    let mut delta = vec![0.0; 1 << n];
    delta[0] = 1.0;
    let ones = fwht(&delta).unwrap().iter().all(|&v| v == 1.0);
    outcome(
        involution < 1e-9 && parseval < 1e-9 && ones,
        format!("involution rel_err={involution:.1e} parseval rel_err={parseval:.1e} delta→ones={ones}"),
    )
}

fn blind_verdicts(ch: &Path, rs: &Path, threshold: f64) -> (bool, Vec<f64>, String) {
    let v = verify(ch, rs, Some(threshold), &SimConfig::default()).unwrap();
    let text = serde_json::to_string(&v).unwrap();
    (v.iter().all(|v| v.pass), v.iter().map(|v| v.f_xeb).collect(), text)
}

fn c9_blind_protocol() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let ch = root.path().join("challenge");
    challenge(
        &ch,
        &ChallengeConfig {
            n: 12,
            depth: 14,
            pattern: PatternKind::Efgh,
            variant: Variant::Full,
            count: 3,
            seed: 90,
            samples: 500_000,
            calibration_order: CalibrationOrder::Before,
        },
    )
    .unwrap();
    let prover = |dir: &str, noise, publish, offsets| {
        let out = root.path().join(dir);
        let config = ProverConfig {
            noise,
            miscalibration_seed: 4,
            miscalibration: 0.3,
            offsets,
            publish,
            seed: 6,
        };
        respond(&ch, &out, &config).unwrap();
        out
    };
    let honest = prover(
        "honest",
        ProverNoise::Mixture { phi: 0.4, readout: 0.0 },
        Published::Actual,
        OffsetKind::Uniform,
    );
    let uniform = prover("uniform", ProverNoise::Uniform, Published::Actual, OffsetKind::Uniform);
    let hidden = prover(
        "hidden",
        ProverNoise::Mixture { phi: 1.0, readout: 0.0 },
        Published::Standard,
        OffsetKind::Fixed,
    );
    let (honest_pass, honest_f, first) = blind_verdicts(&ch, &honest, 0.2);
    let (_, _, second) = blind_verdicts(&ch, &honest, 0.2);
    let (uniform_pass, uniform_f, _) = blind_verdicts(&ch, &uniform, 0.05);
    let (hidden_pass, hidden_f, _) = blind_verdicts(&ch, &hidden, 0.05);
    let fmt = |f: &[f64]| f.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("/");
    outcome(
        honest_pass && !uniform_pass && !hidden_pass && first == second,
        format!(
            "honest {} ({}), uniform {} ({}), withheld calibration {} ({}), deterministic={}",
            if honest_pass { "pass" } else { "fail" },
            fmt(&honest_f),
            if uniform_pass { "pass" } else { "fail" },
            fmt(&uniform_f),
            if hidden_pass { "pass" } else { "fail" },
            fmt(&hidden_f),
            first == second
        ),
    )
}

fn c10_round_trips() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut entries = Vec::new();
    let mut in_memory = Vec::new();
    for (i, (n, variant)) in [(10, Variant::Full), (12, Variant::Elided), (12, Variant::Patch)]
        .into_iter()
        .enumerate()
    {
        let c = generate_variant(40 + i as u64, n, 14, PatternKind::Abcdcdab, variant).unwrap();
        let text = write_circuit(&c);
        pass &= write_circuit(&parse_circuit(text.as_bytes()).unwrap()) == text;

        let table = simulate(&c, None).unwrap();
        let probs = table.probabilities();
        let samples = sample_noise_model(&probs, &c.qubits, 0.7, 20_000, i as u64).unwrap();
        let stext = write_samples(&samples);
        pass &= write_samples(&parse_samples(stext.as_bytes(), n).unwrap()) == stext;
        let atext = write_amplitudes(&sample_amplitudes(&samples, &table.amplitudes).unwrap());
        pass &= write_amplitudes(&parse_amplitudes(atext.as_bytes()).unwrap()) == atext;

        let (cf, sf, af) = (format!("c{i}.json"), format!("s{i}.txt"), format!("a{i}.txt"));
        write_file(&root.path().join(&cf), &text).unwrap();
        write_file(&root.path().join(&sf), &stext).unwrap();
        write_file(&root.path().join(&af), &atext).unwrap();
        entries.push(ManifestEntry {
            circuit: cf.into(),
            samples: sf.into(),
            amplitudes: Some(af.into()),
            n,
            m: 14,
            pattern: PatternKind::Abcdcdab,
            variant,
        });
        in_memory.push(f_xeb_from_probs(&samples, &probs).unwrap().estimate);
    }
    let manifest = DatasetManifest {
        root: ".".into(),
        circuits: entries,
    };
    let mpath = root.path().join("manifest.json");
    write_file(&mpath, manifest.to_json()).unwrap();
    let loaded = DatasetManifest::load(&mpath).unwrap();
    let mut worst = 0.0f64;
    for (entry, expected) in loaded.circuits.iter().zip(&in_memory) {
        let r = verify_alignment(&loaded.root, entry, &SimConfig::default()).unwrap();
        worst = worst.max((r.f_xeb.estimate - expected).abs());
    }
    outcome(
        pass && worst <= 1e-12,
        format!("idempotent={pass} max F_XEB diff={worst:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "product formula at 53 qubits",
            c1_product_formula,
            Duration::from_secs(1),
        ),
        (
            "product formula predicts Pauli trajectories",
            c2_formula_predicts_trajectories,
            Duration::from_secs(600),
        ),
        (
            "mixture-model XEB calibration",
            c3_mixture_estimator,
            Duration::from_secs(120),
        ),
        ("patch factorization", c4_patch_factorization, Duration::from_secs(60)),
        ("Porter-Thomas statistics", c5_porter_thomas, Duration::from_secs(300)),
        (
            "Fourier-Walsh readout decay",
            c6_spectral_decay,
            Duration::from_secs(300),
        ),
        (
            "calibration plant-and-recover",
            c7_calibration,
            Duration::from_secs(300),
        ),
        ("FWHT correctness", c8_fwht, Duration::from_secs(10)),
        ("blind protocol end to end", c9_blind_protocol, Duration::from_secs(300)),
        ("data round trips", c10_round_trips, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {} [{:.1}s / {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::path::Path;
use std::process::ExitCode;

use rcs_core::calibration::{
    apply_calibration, fit_two_gate_batch, fixed_offset_miscalibration, random_miscalibration, CalibrationMap,
    CouplerRun, FitConfig,
};
use rcs_core::circuit::{coupler_circuit, generate_variant, Circuit, Variant};
use rcs_core::dataio::{
    attach_sidecar, circuit_hash, parse_amplitudes, parse_calibration, parse_circuit, parse_samples, parse_sidecar,
    read_file, sample_amplitudes, sidecar_path, verify_alignment, write_amplitude_dump, write_amplitudes,
    write_calibration, write_circuit, write_file, write_json, write_samples, AmplitudeSidecar, DatasetManifest,
    SampleSidecar,
};
use rcs_core::estimators::{
    empirical_model_distance, f_xeb, f_xeb_from_probs, ideal_xeb, product_fidelity, product_fidelity_averaged_with,
    AveragedRates, FidelityReport,
};
use rcs_core::layout::{Edge, GridQubit, PatternKind};
use rcs_core::noise::{
    apply_readout_errors, pauli_trajectory_sample, sample_noise_model, ComponentErrorRates, ReadoutRates,
};
use rcs_core::protocol::{self, CalibrationOrder, ChallengeConfig, OffsetKind, ProverConfig, ProverNoise, Published};
use rcs_core::samples::SampleSet;
use rcs_core::simulator::{simulate, SimConfig};
use rcs_core::spectral::{fit_secondary_fidelity, level_fidelity, level_fidelity_with_bands};
use rcs_core::{Error, Result};
use serde_json::json;

use super::*;

impl From<Pattern> for PatternKind {
    fn from(p: Pattern) -> Self {
        match p {
            Pattern::Efgh => PatternKind::Efgh,
            Pattern::Abcdcdab => PatternKind::Abcdcdab,
        }
    }
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => Variant::Full,
            VariantArg::Elided => Variant::Elided,
            VariantArg::Patch => Variant::Patch,
        }
    }
}

impl From<Order> for CalibrationOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Before => CalibrationOrder::Before,
            Order::After => CalibrationOrder::After,
        }
    }
}

impl From<Offsets> for OffsetKind {
    fn from(o: Offsets) -> Self {
        match o {
            Offsets::Uniform => OffsetKind::Uniform,
            Offsets::Fixed => OffsetKind::Fixed,
        }
    }
}

impl From<Publish> for Published {
    fn from(p: Publish) -> Self {
        match p {
            Publish::Actual => Published::Actual,
            Publish::Standard => Published::Standard,
        }
    }
}

pub(crate) fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Coupler(a) => coupler(a),
        Command::Miscalibrate(a) => miscalibrate(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Sample(a) => sample(a),
        Command::Xeb(a) => xeb(a),
        Command::Predict(a) => predict(a),
        Command::Spectral(a) => spectral(a),
        Command::Calfit(a) => calfit(a),
        Command::Distance(a) => distance(a),
        Command::Blind(BlindCommand::Challenge(a)) => challenge(a),
        Command::Blind(BlindCommand::Respond(a)) => respond(a),
        Command::Blind(BlindCommand::Verify(a)) => verify(a),
    }
}

fn emit<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("report serializes"));
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    parse_circuit(&read_file(path)?)
}

/// Loads a circuit with its optional calibration already applied.
fn load_input(input: &CircuitInput) -> Result<Circuit> {
    let circuit = load_circuit(&input.circuit)?;
    match &input.calibration {
        Some(p) => apply_calibration(&circuit, &parse_calibration(&read_file(p)?)?),
        None => Ok(circuit),
    }
}

/// Reads a sample file for `circuit`, checking its sidecar when present.
fn load_samples(path: &Path, circuit: &Circuit) -> Result<SampleSet> {
    let mut samples = parse_samples(&read_file(path)?, circuit.n())?;
    samples.qubit_order = circuit.qubits.clone();
    let side = sidecar_path(path);
    if side.exists() {
        let sidecar: SampleSidecar = parse_sidecar(&read_file(&side)?)?;
        samples = attach_sidecar(samples, &sidecar)?;
        if samples.qubit_order != circuit.qubits {
            return Err(Error::Alignment(format!(
                "{}: qubit order differs from the circuit",
                path.display()
            )));
        }
    }
    Ok(samples)
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let s = &a.shape;
    for i in 0..s.count {
        let c = generate_variant(s.seed + i, s.n, s.m, s.pattern.into(), s.variant.into())?;
        write_file(&a.out.join(format!("circuit_{i:03}.json")), write_circuit(&c))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_qubit(s: &str) -> Result<GridQubit> {
    let bad = || Error::InvalidArgument(format!("qubit {s:?} (expected row,col)"));
    let (r, c) = s.split_once(',').ok_or_else(bad)?;
    Ok(GridQubit::new(
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn coupler(a: CouplerArgs) -> Result<ExitCode> {
    let (x, y) = a
        .edge
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("edge {:?} (expected row,col:row,col)", a.edge)))?;
    let edge = Edge::new(parse_qubit(x)?, parse_qubit(y)?)?;
    for i in 0..a.count {
        let c = coupler_circuit(a.seed + i, edge, a.m);
        write_file(&a.out.join(format!("coupler_{i:03}.json")), write_circuit(&c))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn miscalibrate(a: MiscalibrateArgs) -> Result<ExitCode> {
    let circuit = load_circuit(&a.circuit)?;
    let calib: CalibrationMap = match a.offsets {
        Offsets::Uniform => random_miscalibration(&circuit, a.seed, a.magnitude)?,
        Offsets::Fixed => fixed_offset_miscalibration(&circuit, a.seed, a.magnitude)?,
    };
    write_file(&a.out, write_calibration(&calib))?;
    Ok(ExitCode::SUCCESS)
}

fn simulate_cmd(a: SimulateArgs) -> Result<ExitCode> {
    let circuit = load_input(&a.input)?;
    let table = simulate(&circuit, None)?;
    let sidecar = AmplitudeSidecar {
        n: circuit.n(),
        qubit_order: circuit.qubits.clone(),
        circuit_hash: circuit_hash(&load_circuit(&a.input.circuit)?),
    };
    if let Some(sp) = &a.samples {
        let samples = load_samples(sp, &circuit)?;
        write_file(
            &a.out,
            write_amplitudes(&sample_amplitudes(&samples, &table.amplitudes)?),
        )?;
    } else if a.binary {
        write_file(&a.out, write_amplitude_dump(&table.amplitudes))?;
    } else {
        write_file(&a.out, write_amplitudes(&table.amplitudes))?;
    }
    write_file(&sidecar_path(&a.out), write_json(&sidecar))?;
    Ok(ExitCode::SUCCESS)
}

fn sample(a: SampleArgs) -> Result<ExitCode> {
    let circuit = load_circuit(&a.input.circuit)?;
    let samples = match a.noise {
        SampleNoise::Mixture => {
            let calibrated = load_input(&a.input)?;
            let probs = simulate(&calibrated, None)?.probabilities();
            let s = sample_noise_model(&probs, &circuit.qubits, a.phi, a.count, a.seed)?;
            if a.readout > 0.0 {
                apply_readout_errors(&s, &vec![ReadoutRates::symmetric(a.readout); circuit.n()], a.seed)?
            } else {
                s
            }
        }
        SampleNoise::Pauli => {
            let calib = match &a.input.calibration {
                Some(p) => parse_calibration(&read_file(p)?)?,
                None => rcs_core::calibration::identity_calibration(&circuit),
            };
            let rates = ComponentErrorRates::uniform(&circuit, a.rates.e1, a.rates.e2, a.rates.eq);
            pauli_trajectory_sample(&circuit, &calib, &rates, a.count, a.seed)?.samples
        }
    };
    write_file(&a.out, write_samples(&samples))?;
    let sidecar = SampleSidecar {
        n: circuit.n(),
        qubit_order: circuit.qubits.clone(),
        provenance: samples.provenance.clone(),
        seed: Some(a.seed),
        circuit_hash: Some(circuit_hash(&circuit)),
    };
    write_file(&sidecar_path(&a.out), write_json(&sidecar))?;
    Ok(ExitCode::SUCCESS)
}

fn averaged(rates: &RateArgs) -> AveragedRates {
    AveragedRates {
        e1: rates.e1,
        e2: rates.e2,
        eq: rates.eq,
    }
}

fn xeb(a: XebArgs) -> Result<ExitCode> {
    if let Some(path) = &a.manifest {
        let manifest = DatasetManifest::load(path)?;
        for entry in &manifest.circuits {
            let report = verify_alignment(&manifest.root, entry, &SimConfig::default())?;
            emit(
                &FidelityReport {
                    circuit: Some(entry.circuit.display().to_string()),
                    ..Default::default()
                }
                .with_xeb(&report.f_xeb),
            );
        }
        return Ok(ExitCode::SUCCESS);
    }
    let circuit_path = a.circuit.as_ref().expect("clap enforces --circuit");
    let input = CircuitInput {
        circuit: circuit_path.clone(),
        calibration: a.calibration.clone(),
    };
    let circuit = load_input(&input)?;
    let samples = load_samples(a.samples.as_ref().expect("clap enforces --samples"), &circuit)?;
    let mut report = FidelityReport {
        circuit: Some(circuit_path.display().to_string()),
        predicted_phi_averaged: Some(product_fidelity_averaged_with(
            circuit.n(),
            circuit.one_qubit_count(),
            circuit.two_qubit_count(),
            &AveragedRates::default(),
        )),
        ..Default::default()
    };
    let estimate = match &a.amplitudes {
        Some(p) => {
            let amplitudes = parse_amplitudes(&read_file(p)?)?;
            if amplitudes.len() != samples.len() {
                return Err(Error::Alignment(format!(
                    "{} amplitude lines for {} samples",
                    amplitudes.len(),
                    samples.len()
                )));
            }
            let mut line = 0usize;
            f_xeb(&samples, |_| {
                let p = amplitudes[line].norm_sqr();
                line += 1;
                Some(p)
            })?
        }
        None => {
            let probs = simulate(&circuit, None)?.probabilities();
            report.ideal_xeb = Some(ideal_xeb(&probs));
            f_xeb_from_probs(&samples, &probs)?
        }
    };
    emit(&report.with_xeb(&estimate));
    Ok(ExitCode::SUCCESS)
}

fn predict(a: PredictArgs) -> Result<ExitCode> {
    let rates = averaged(&a.rates);
    if a.averaged {
        let (n, g1, g2) = (a.n.unwrap_or(0), a.g1.unwrap_or(0), a.g2.unwrap_or(0));
        emit(&json!({
            "n": n,
            "g1": g1,
            "g2": g2,
            "predicted_phi_averaged": product_fidelity_averaged_with(n, g1, g2, &rates),
        }));
        return Ok(ExitCode::SUCCESS);
    }
    let circuit = load_circuit(a.circuit.as_ref().expect("clap enforces --circuit"))?;
    let (g1, g2) = (circuit.one_qubit_count(), circuit.two_qubit_count());
    let per_component = ComponentErrorRates::uniform(&circuit, rates.e1, rates.e2, rates.eq);
    emit(&json!({
        "n": circuit.n(),
        "g1": g1,
        "g2": g2,
        "predicted_phi": product_fidelity(&per_component, &circuit)?,
        "predicted_phi_averaged": product_fidelity_averaged_with(circuit.n(), g1, g2, &rates),
    }));
    Ok(ExitCode::SUCCESS)
}

fn parse_levels(s: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::InvalidArgument(format!("level range {s:?} (expected lo:hi)"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn spectral(a: SpectralArgs) -> Result<ExitCode> {
    let levels = a.fit.as_deref().map(parse_levels).transpose()?;
    let circuit = load_input(&a.input)?;
    let samples = load_samples(&a.samples, &circuit)?;
    let probs = simulate(&circuit, None)?.probabilities();
    let spectrum = if a.bootstrap == 0 {
        level_fidelity(&samples, &probs)?
    } else {
        level_fidelity_with_bands(&samples, &probs, a.bootstrap, a.seed)?
    };
    match &a.out {
        Some(p) => write_file(p, spectrum.to_csv())?,
        None => print!("{}", spectrum.to_csv()),
    }
    if let Some(range) = levels {
        let fit = fit_secondary_fidelity(&spectrum, range)?;
        let primary = f_xeb_from_probs(&samples, &probs)?.estimate / ideal_xeb(&probs);
        let report = json!({
            "phi_hat": fit.phi_hat,
            "e_hat": fit.e_hat,
            "levels_used": fit.levels_used,
            "implied_fidelity": fit.implied_xeb_fidelity(&spectrum),
            "primary_fidelity": primary,
        });
        // Keep stdout pure CSV when the spectrum goes there.
        if a.out.is_some() {
            emit(&report);
        } else {
            eprintln!("{report}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn calfit(a: CalfitArgs) -> Result<ExitCode> {
    if a.circuit.len() != a.samples.len() {
        return Err(Error::InvalidArgument(format!(
            "{} circuits but {} sample files",
            a.circuit.len(),
            a.samples.len()
        )));
    }
    let runs = a
        .circuit
        .iter()
        .zip(&a.samples)
        .map(|(c, s)| {
            let ideal = load_circuit(c)?;
            let samples = load_samples(s, &ideal)?;
            Ok(CouplerRun { ideal, samples })
        })
        .collect::<Result<Vec<_>>>()?;
    let config = FitConfig {
        restarts: a.restarts,
        seed: a.seed,
        ..FitConfig::default()
    };
    let fit = fit_two_gate_batch(&runs, &config)?;
    emit(&json!({
        "theta_hat": fit.theta_hat,
        "phi_hat": fit.phi_hat,
        "objective": fit.objective,
        "f_xeb": fit.f_xeb,
        "evaluations": fit.evaluations,
    }));
    Ok(ExitCode::SUCCESS)
}

fn distance(a: DistanceArgs) -> Result<ExitCode> {
    let circuit = load_input(&a.input)?;
    let samples = load_samples(&a.samples, &circuit)?;
    let probs = simulate(&circuit, None)?.probabilities();
    emit(&json!({
        "phi": a.phi,
        "n_samples": samples.len(),
        "total_variation": empirical_model_distance(&samples, &probs, a.phi)?,
    }));
    Ok(ExitCode::SUCCESS)
}

fn challenge(a: ChallengeArgs) -> Result<ExitCode> {
    let s = &a.shape;
    let config = ChallengeConfig {
        n: s.n,
        depth: s.m,
        pattern: s.pattern.into(),
        variant: s.variant.into(),
        count: s.count as usize,
        seed: s.seed,
        samples: a.samples,
        calibration_order: a.calibration_order.into(),
    };
    protocol::challenge(&a.out, &config)?;
    Ok(ExitCode::SUCCESS)
}

fn respond(a: RespondArgs) -> Result<ExitCode> {
    let noise = match a.noise {
        ProverNoiseArg::Mixture => ProverNoise::Mixture {
            phi: a.phi,
            readout: a.readout,
        },
        ProverNoiseArg::Uniform => ProverNoise::Uniform,
        ProverNoiseArg::Pauli => ProverNoise::Pauli {
            e1: a.rates.e1,
            e2: a.rates.e2,
            eq: a.rates.eq,
        },
    };
    let config = ProverConfig {
        noise,
        miscalibration_seed: a.miscalibration_seed,
        miscalibration: a.miscalibration,
        offsets: a.offsets.into(),
        publish: a.publish.into(),
        seed: a.seed,
    };
    protocol::respond(&a.challenge, &a.out, &config)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let verdicts = protocol::verify(&a.challenge, &a.response, a.threshold, &SimConfig::default())?;
    for v in &verdicts {
        emit(v);
    }
    Ok(if verdicts.iter().all(|v| v.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

//! Blind challenge / respond / verify exchange over directories.
//!
//! The challenger writes circuits without simulating them. The prover (a
//! simulated device with private calibration and noise) returns samples and
//! the calibration it claims to have applied. The verifier reads only those
//! two directories, simulates each calibrated circuit and scores the
//! samples.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{
    apply_calibration, fixed_offset_miscalibration, identity_calibration, random_miscalibration, CalibrationMap,
};
use crate::circuit::{generate_variant, Circuit, Variant};
use crate::dataio::{
    circuit_hash, parse_calibration, parse_circuit, parse_samples, read_file, sidecar_path, write_calibration,
    write_circuit, write_file, write_json, write_samples, SampleSidecar,
};
use crate::error::{Error, Result};
use crate::estimators::{f_xeb_from_probs, product_fidelity_averaged};
use crate::layout::PatternKind;
use crate::noise::{
    apply_readout_errors, pauli_trajectory_sample, sample_noise_model, ComponentErrorRates, ReadoutRates,
};
use crate::samples::SampleSet;
use crate::simulator::{simulate, simulate_with, SimConfig};

pub const CHALLENGE_FILE: &str = "challenge.json";
pub const RESPONSE_FILE: &str = "response.json";

/// Whether the prover publishes its calibration before or after sampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationOrder {
    #[default]
    Before,
    After,
}

impl std::str::FromStr for CalibrationOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before" => Ok(Self::Before),
            "after" => Ok(Self::After),
            _ => Err(Error::InvalidArgument(format!(
                "calibration order {s:?} (before|after)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengeConfig {
    pub n: usize,
    pub depth: usize,
    pub pattern: PatternKind,
    pub variant: Variant,
    pub count: usize,
    pub seed: u64,
    pub samples: usize,
    pub calibration_order: CalibrationOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengeEntry {
    pub id: String,
    pub circuit: String,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Challenge {
    pub samples: usize,
    pub calibration_order: CalibrationOrder,
    pub circuits: Vec<ChallengeEntry>,
}

/// Writes `count` circuits and the challenge index into `dir`.
pub fn challenge(dir: &Path, config: &ChallengeConfig) -> Result<Challenge> {
    let mut circuits = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let c = generate_variant(
            config.seed + i as u64,
            config.n,
            config.depth,
            config.pattern,
            config.variant,
        )?;
        let id = format!("circuit_{i:03}");
        let file = format!("{id}.circuit.json");
        write_file(&dir.join(&file), write_circuit(&c))?;
        circuits.push(ChallengeEntry {
            id,
            circuit: file,
            hash: circuit_hash(&c),
        });
    }
    let ch = Challenge {
        samples: config.samples,
        calibration_order: config.calibration_order,
        circuits,
    };
    write_file(&dir.join(CHALLENGE_FILE), write_json(&ch))?;
    Ok(ch)
}

/// How the simulated device corrupts its output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProverNoise {
    /// White-noise mixture with fidelity `phi`, then symmetric readout flips.
    Mixture { phi: f64, readout: f64 },
    /// Uniformly random bitstrings.
    Uniform,
    /// Pauli trajectories with uniform component rates.
    Pauli { e1: f64, e2: f64, eq: f64 },
}

/// How the device's actual gates deviate from the standard gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetKind {
    /// Independent uniform offsets in `[-magnitude, magnitude]`.
    #[default]
    Uniform,
    /// Offsets of exactly `±magnitude`.
    Fixed,
}

/// Which calibration the prover publishes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Published {
    /// The calibration the device actually applied.
    #[default]
    Actual,
    /// The standard gates, hiding the device's real calibration.
    Standard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProverConfig {
    pub noise: ProverNoise,
    pub miscalibration_seed: u64,
    pub miscalibration: f64,
    pub offsets: OffsetKind,
    pub publish: Published,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseEntry {
    pub id: String,
    /// Hash of the challenge circuit the samples answer.
    pub circuit_hash: String,
    pub samples: String,
    pub calibration: String,
    pub calibration_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub calibration_order: CalibrationOrder,
    pub circuits: Vec<ResponseEntry>,
}

fn load_challenge(dir: &Path) -> Result<Challenge> {
    let path = dir.join(CHALLENGE_FILE);
    crate::dataio::parse_sidecar(&read_file(&path)?)
}

/// Reads a challenge circuit and checks it against the recorded hash.
fn load_circuit(dir: &Path, entry: &ChallengeEntry) -> Result<Circuit> {
    let c = parse_circuit(&read_file(&dir.join(&entry.circuit))?)?;
    let hash = circuit_hash(&c);
    if hash != entry.hash {
        return Err(Error::Integrity(format!(
            "{} does not match its recorded hash",
            entry.circuit
        )));
    }
    Ok(c)
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

fn device_samples(
    circuit: &Circuit,
    actual: &CalibrationMap,
    config: &ProverConfig,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    match config.noise {
        ProverNoise::Mixture { phi, readout } => {
            let probs = simulate(circuit, Some(actual))?.probabilities();
            let s = sample_noise_model(&probs, &circuit.qubits, phi, count, seed)?;
            if readout > 0.0 {
                apply_readout_errors(&s, &vec![ReadoutRates::symmetric(readout); circuit.n()], seed)
            } else {
                Ok(s)
            }
        }
        ProverNoise::Uniform => {
            let uniform = vec![1.0 / (1u64 << circuit.n()) as f64; 1usize << circuit.n()];
            sample_noise_model(&uniform, &circuit.qubits, 0.0, count, seed)
        }
        ProverNoise::Pauli { e1, e2, eq } => {
            let rates = ComponentErrorRates::uniform(circuit, e1, e2, eq);
            Ok(pauli_trajectory_sample(circuit, actual, &rates, count, seed)?.samples)
        }
    }
}

/// Plays the device: samples every challenge circuit under the prover's
/// private calibration and noise and publishes samples plus calibration.
pub fn respond(challenge_dir: &Path, response_dir: &Path, config: &ProverConfig) -> Result<Response> {
    let ch = load_challenge(challenge_dir)?;
    let mut entries = Vec::with_capacity(ch.circuits.len());
    for (i, entry) in ch.circuits.iter().enumerate() {
        let circuit = load_circuit(challenge_dir, entry)?;
        let actual = match config.offsets {
            OffsetKind::Uniform => random_miscalibration(&circuit, config.miscalibration_seed, config.miscalibration)?,
            OffsetKind::Fixed => {
                fixed_offset_miscalibration(&circuit, config.miscalibration_seed, config.miscalibration)?
            }
        };
        let published = match config.publish {
            Published::Actual => actual.clone(),
            Published::Standard => identity_calibration(&circuit),
        };
        let cal_file = format!("{}.calibration.json", entry.id);
        let cal_text = write_calibration(&published);
        let sample_file = format!("{}.samples.txt", entry.id);
        let write_cal = || write_file(&response_dir.join(&cal_file), &cal_text);
        if ch.calibration_order == CalibrationOrder::Before {
            write_cal()?;
        }
        let seed = config.seed.wrapping_add(i as u64);
        let samples = device_samples(&circuit, &actual, config, ch.samples, seed)?;
        let sample_path = response_dir.join(&sample_file);
        write_file(&sample_path, write_samples(&samples))?;
        let sidecar = SampleSidecar {
            n: circuit.n(),
            qubit_order: circuit.qubits.clone(),
            provenance: "blind response".into(),
            seed: Some(seed),
            circuit_hash: Some(entry.hash.clone()),
        };
        write_file(&sidecar_path(&sample_path), write_json(&sidecar))?;
        if ch.calibration_order == CalibrationOrder::After {
            write_cal()?;
        }
        entries.push(ResponseEntry {
            id: entry.id.clone(),
            circuit_hash: entry.hash.clone(),
            samples: sample_file,
            calibration: cal_file,
            calibration_hash: sha256_hex(cal_text.as_bytes()),
        });
    }
    let response = Response {
        calibration_order: ch.calibration_order,
        circuits: entries,
    };
    write_file(&response_dir.join(RESPONSE_FILE), write_json(&response))?;
    Ok(response)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub f_xeb: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Half the averaged product-formula prediction for the circuit's size.
pub fn default_threshold(circuit: &Circuit) -> f64 {
    0.5 * product_fidelity_averaged(circuit.n(), circuit.one_qubit_count(), circuit.two_qubit_count())
}

/// Scores every response. A circuit passes iff `F_XEB − 3σ > threshold`;
/// `threshold = None` uses [`default_threshold`] per circuit.
pub fn verify(
    challenge_dir: &Path,
    response_dir: &Path,
    threshold: Option<f64>,
    config: &SimConfig,
) -> Result<Vec<Verdict>> {
    let ch = load_challenge(challenge_dir)?;
    let response_path = response_dir.join(RESPONSE_FILE);
    if !response_path.exists() {
        return Err(Error::MissingResponse(format!("{} not found", response_path.display())));
    }
    let response: Response = crate::dataio::parse_sidecar(&read_file(&response_path)?)?;
    let mut verdicts = Vec::with_capacity(ch.circuits.len());
    for entry in &ch.circuits {
        let answer = response
            .circuits
            .iter()
            .find(|r| r.id == entry.id)
            .ok_or_else(|| Error::MissingResponse(format!("no response for {}", entry.id)))?;
        if answer.circuit_hash != entry.hash {
            return Err(Error::Integrity(format!(
                "response for {} answers a different circuit",
                entry.id
            )));
        }
        let circuit = load_circuit(challenge_dir, entry)?;
        let cal_bytes = read_file(&response_dir.join(&answer.calibration))?;
        if sha256_hex(&cal_bytes) != answer.calibration_hash {
            return Err(Error::Integrity(format!(
                "calibration for {} changed after publication",
                entry.id
            )));
        }
        let calib = parse_calibration(&cal_bytes)?;
        let samples = parse_samples(&read_file(&response_dir.join(&answer.samples))?, circuit.n())?;
        if samples.len() != ch.samples {
            return Err(Error::Alignment(format!(
                "{}: {} samples returned, {} requested",
                entry.id,
                samples.len(),
                ch.samples
            )));
        }
        let calibrated = apply_calibration(&circuit, &calib)?;
        let probs = simulate_with(&calibrated, None, config)?.probabilities();
        let x = f_xeb_from_probs(&samples, &probs)?;
        let threshold = threshold.unwrap_or_else(|| default_threshold(&circuit));
        verdicts.push(Verdict {
            id: entry.id.clone(),
            f_xeb: x.estimate,
            std_error: x.std_error,
            n_samples: x.n_samples,
            threshold,
            pass: x.estimate - 3.0 * x.std_error > threshold,
        });
    }
    Ok(verdicts)
}

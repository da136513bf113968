//! File formats: canonical circuit and calibration JSON, sample and
//! amplitude text files, binary amplitude dumps, JSON sidecars and dataset
//! manifests.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{CalibrationMap, NativeParams, RotationAngles};
use crate::circuit::{Circuit, FSimGate, Moment, OneQubitGate, OneQubitKind, RzGate, Variant};
use crate::error::{Error, Result};
use crate::estimators::{f_xeb, XebEstimate};
use crate::layout::{Edge, GridQubit, PatternKind};
use crate::samples::{format_bits, SampleSet};
use crate::simulator::{simulate_with, SimConfig};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitDoc {
    qubits: Vec<GridQubit>,
    pattern: PatternKind,
    depth: usize,
    variant: Variant,
    seed: u64,
    moments: Vec<MomentDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum MomentDoc {
    Ones(Vec<OneDoc>),
    Twos(Vec<TwoDoc>),
    Rz(Vec<RzDoc>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OneDoc {
    q: GridQubit,
    kind: OneQubitKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TwoDoc {
    q: [GridQubit; 2],
    theta: f64,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RzDoc {
    q: GridQubit,
    angle: f64,
}

impl From<&Circuit> for CircuitDoc {
    fn from(c: &Circuit) -> Self {
        let moments = c
            .moments
            .iter()
            .map(|m| match m {
                Moment::Ones(g) => MomentDoc::Ones(
                    g.iter()
                        .map(|g| OneDoc {
                            q: g.target,
                            kind: g.kind,
                        })
                        .collect(),
                ),
                Moment::Twos(g) => MomentDoc::Twos(
                    g.iter()
                        .map(|g| TwoDoc {
                            q: [g.a, g.b],
                            theta: g.theta,
                            phi: g.phi,
                        })
                        .collect(),
                ),
                Moment::Rz(g) => MomentDoc::Rz(
                    g.iter()
                        .map(|g| RzDoc {
                            q: g.target,
                            angle: g.angle,
                        })
                        .collect(),
                ),
            })
            .collect();
        Self {
            qubits: c.qubits.clone(),
            pattern: c.pattern,
            depth: c.depth,
            variant: c.variant,
            seed: c.seed,
            moments,
        }
    }
}

impl From<CircuitDoc> for Circuit {
    fn from(d: CircuitDoc) -> Self {
        let moments = d
            .moments
            .into_iter()
            .map(|m| match m {
                MomentDoc::Ones(g) => Moment::Ones(
                    g.into_iter()
                        .map(|g| OneQubitGate {
                            kind: g.kind,
                            target: g.q,
                        })
                        .collect(),
                ),
                MomentDoc::Twos(g) => Moment::Twos(
                    g.into_iter()
                        .map(|g| FSimGate {
                            theta: g.theta,
                            phi: g.phi,
                            a: g.q[0],
                            b: g.q[1],
                        })
                        .collect(),
                ),
                MomentDoc::Rz(g) => Moment::Rz(
                    g.into_iter()
                        .map(|g| RzGate {
                            target: g.q,
                            angle: g.angle,
                        })
                        .collect(),
                ),
            })
            .collect();
        Circuit {
            qubits: d.qubits,
            depth: d.depth,
            pattern: d.pattern,
            variant: d.variant,
            seed: d.seed,
            moments,
        }
    }
}

/// Byte offset of a 1-based (line, column) position reported by the JSON
/// parser.
fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    let mut start = 0;
    for _ in 1..line {
        match text[start..].iter().position(|b| *b == b'\n') {
            Some(i) => start += i + 1,
            None => break,
        }
    }
    (start + column.saturating_sub(1)).min(text.len())
}

fn json_error(text: &[u8], e: serde_json::Error) -> Error {
    let offset = byte_offset(text, e.line(), e.column());
    Error::parse(
        format!("byte {offset} (line {}, column {})", e.line(), e.column()),
        e.to_string(),
    )
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &[u8]) -> Result<T> {
    serde_json::from_slice(text).map_err(|e| json_error(text, e))
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serializable document");
    s.push('\n');
    s
}

/// Canonical JSON text of a circuit: compact, fields in fixed order,
/// angles as shortest round-trip decimals, newline-terminated.
pub fn write_circuit(circuit: &Circuit) -> String {
    to_json_line(&CircuitDoc::from(circuit))
}

pub fn parse_circuit(text: &[u8]) -> Result<Circuit> {
    let doc: CircuitDoc = parse_json(text)?;
    let circuit = Circuit::from(doc);
    circuit.validate()?;
    Ok(circuit)
}

/// SHA-256 (hex) of the canonical circuit text.
pub fn circuit_hash(circuit: &Circuit) -> String {
    hex::encode(Sha256::digest(write_circuit(circuit).as_bytes()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeDoc {
    edge: Edge,
    theta: f64,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RotationDoc {
    edge: Edge,
    k: usize,
    angles: RotationAngles,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationDoc {
    native: Vec<NativeDoc>,
    rotations: Vec<RotationDoc>,
}

pub fn write_calibration(calib: &CalibrationMap) -> String {
    let doc = CalibrationDoc {
        native: calib
            .native
            .iter()
            .map(|(e, p)| NativeDoc {
                edge: *e,
                theta: p.theta,
                phi: p.phi,
            })
            .collect(),
        rotations: calib
            .rotations
            .iter()
            .map(|((e, k), a)| RotationDoc {
                edge: *e,
                k: *k,
                angles: *a,
            })
            .collect(),
    };
    to_json_line(&doc)
}

pub fn parse_calibration(text: &[u8]) -> Result<CalibrationMap> {
    let doc: CalibrationDoc = parse_json(text)?;
    let mut map = CalibrationMap::default();
    for (i, n) in doc.native.into_iter().enumerate() {
        if !n.theta.is_finite() || !n.phi.is_finite() {
            return Err(Error::validation(format!("native entry {i}"), "non-finite angle"));
        }
        let params = NativeParams {
            theta: n.theta,
            phi: n.phi,
        };
        if map.native.insert(n.edge, params).is_some() {
            return Err(Error::validation(
                format!("native entry {i}"),
                format!("duplicate coupler {}", n.edge),
            ));
        }
    }
    for (i, r) in doc.rotations.into_iter().enumerate() {
        if r.angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::validation(format!("rotation entry {i}"), "non-finite angle"));
        }
        if map.rotations.insert((r.edge, r.k), r.angles).is_some() {
            return Err(Error::validation(
                format!("rotation entry {i}"),
                format!("duplicate occurrence {} of coupler {}", r.k, r.edge),
            ));
        }
    }
    Ok(map)
}

/// Lines of `text`, tolerating one trailing newline and CRLF endings.
fn lines(text: &[u8]) -> impl Iterator<Item = (usize, &[u8])> {
    let body = text.strip_suffix(b"\n").unwrap_or(text);
    let empty = text.is_empty();
    body.split(|b| *b == b'\n')
        .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(move |_| !empty)
}

/// One bitstring of `n` ASCII '0'/'1' characters per line.
///
/// The result has no qubit order; callers attach one from a sidecar or
/// circuit.
pub fn parse_samples(text: &[u8], n: usize) -> Result<SampleSet> {
    if n == 0 || n > 64 {
        return Err(Error::InvalidArgument(format!("bitstring length {n} outside 1..=64")));
    }
    let mut bits = Vec::new();
    for (line, l) in lines(text) {
        if l.len() != n {
            return Err(Error::parse(
                format!("line {line}"),
                format!("expected {n} characters, found {}", l.len()),
            ));
        }
        let mut x = 0u64;
        for (col, c) in l.iter().enumerate() {
            x = (x << 1)
                | match c {
                    b'0' => 0,
                    b'1' => 1,
                    _ => {
                        return Err(Error::parse(
                            format!("line {line}, column {}", col + 1),
                            format!("illegal character {:?}", char::from(*c)),
                        ))
                    }
                };
        }
        bits.push(x);
    }
    Ok(SampleSet {
        n,
        qubit_order: Vec::new(),
        bits,
        provenance: String::new(),
    })
}

pub fn write_samples(samples: &SampleSet) -> String {
    let mut out = String::with_capacity(samples.len() * (samples.n + 1));
    for &x in &samples.bits {
        out.push_str(&format_bits(x, samples.n));
        out.push('\n');
    }
    out
}

/// One `re im` pair per line.
pub fn parse_amplitudes(text: &[u8]) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for (line, l) in lines(text) {
        let l = std::str::from_utf8(l).map_err(|_| Error::parse(format!("line {line}"), "not UTF-8"))?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                format!("line {line}"),
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let mut parts = [0.0; 2];
        for (i, f) in fields.iter().enumerate() {
            parts[i] = f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::parse(
                    format!("line {line}, field {}", i + 1),
                    format!("not a finite number: {f:?}"),
                )
            })?;
        }
        out.push(Complex64::new(parts[0], parts[1]));
    }
    Ok(out)
}

pub fn write_amplitudes(amplitudes: &[Complex64]) -> String {
    let mut out = String::new();
    for a in amplitudes {
        out.push_str(&format!("{:?} {:?}\n", a.re, a.im));
    }
    out
}

/// Little-endian `(re, im)` f64 pairs in index order.
pub fn write_amplitude_dump(amplitudes: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(amplitudes.len() * 16);
    for a in amplitudes {
        out.extend_from_slice(&a.re.to_le_bytes());
        out.extend_from_slice(&a.im.to_le_bytes());
    }
    out
}

pub fn read_amplitude_dump(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::parse(
            format!("byte {}", bytes.len() - bytes.len() % 16),
            "truncated amplitude record",
        ));
    }
    let count = bytes.len() / 16;
    if !count.is_power_of_two() {
        return Err(Error::validation(
            "amplitude dump",
            format!("{count} amplitudes is not a power of two"),
        ));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// Metadata stored next to a sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub n: usize,
    pub qubit_order: Vec<GridQubit>,
    #[serde(default)]
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit_hash: Option<String>,
}

/// Metadata stored next to an amplitude dump or amplitude text file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSidecar {
    pub n: usize,
    pub qubit_order: Vec<GridQubit>,
    pub circuit_hash: String,
}

pub fn write_json<T: Serialize>(value: &T) -> String {
    to_json_line(value)
}

pub fn parse_sidecar<T: serde::de::DeserializeOwned>(text: &[u8]) -> Result<T> {
    parse_json(text)
}

/// Attaches the sidecar's qubit order and provenance to parsed samples.
pub fn attach_sidecar(mut samples: SampleSet, sidecar: &SampleSidecar) -> Result<SampleSet> {
    if sidecar.n != samples.n || sidecar.qubit_order.len() != samples.n {
        return Err(Error::Alignment(format!(
            "sidecar describes {} qubits ({} in order), samples have {}",
            sidecar.n,
            sidecar.qubit_order.len(),
            samples.n
        )));
    }
    samples.qubit_order = sidecar.qubit_order.clone();
    samples.provenance = sidecar.provenance.clone();
    Ok(samples)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Sidecar path of a data file: `name.ext` → `name.ext.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// One circuit of a dataset. Paths are relative to the manifest root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub circuit: PathBuf,
    pub samples: PathBuf,
    /// Per-sample amplitudes, line `i` belonging to sample line `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<PathBuf>,
    pub n: usize,
    pub m: usize,
    pub pattern: PatternKind,
    pub variant: Variant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub circuits: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &[u8]) -> Result<Self> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        to_json_line(self)
    }

    /// Reads a manifest file; a relative `root` is resolved against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut m = Self::parse(&read_file(path)?)?;
        if m.root.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            m.root = base.join(&m.root);
        }
        Ok(m)
    }
}

/// Per-sample amplitude lines for a sample set, looked up in a full table.
pub fn sample_amplitudes(samples: &SampleSet, table: &[Complex64]) -> Result<Vec<Complex64>> {
    samples
        .bits
        .iter()
        .map(|&x| {
            table
                .get(x as usize)
                .copied()
                .ok_or_else(|| Error::MissingProbability(format_bits(x, samples.n)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub samples: usize,
    pub amplitudes: usize,
    pub f_xeb: XebEstimate,
    /// Largest `|amp_file − amp_simulated|` over the samples, when the
    /// circuit was re-simulated.
    pub max_amplitude_deviation: Option<f64>,
}

/// Tolerance for matching file amplitudes against re-simulation.
pub const ALIGNMENT_TOLERANCE: f64 = 1e-6;

/// Recomputes F_XEB of one dataset entry from its files alone, and, when
/// the circuit fits in the simulator, checks every amplitude line against a
/// fresh simulation.
pub fn verify_alignment(root: &Path, entry: &ManifestEntry, config: &SimConfig) -> Result<AlignmentReport> {
    let amp_path = entry
        .amplitudes
        .as_ref()
        .ok_or_else(|| Error::Alignment(format!("entry {} has no amplitude file", entry.samples.display())))?;
    let samples = parse_samples(&read_file(&root.join(&entry.samples))?, entry.n)?;
    let amplitudes = parse_amplitudes(&read_file(&root.join(amp_path))?)?;
    if samples.is_empty() {
        return Err(Error::Alignment("sample file is empty".into()));
    }
    if amplitudes.len() != samples.len() {
        return Err(Error::Alignment(format!(
            "{} amplitude lines for {} samples",
            amplitudes.len(),
            samples.len()
        )));
    }
    let circuit = parse_circuit(&read_file(&root.join(&entry.circuit))?)?;
    if circuit.n() != entry.n {
        return Err(Error::Alignment(format!(
            "circuit has {} qubits, entry declares {}",
            circuit.n(),
            entry.n
        )));
    }
    let mut line = 0usize;
    let f = f_xeb(&samples, |_| {
        let p = amplitudes[line].norm_sqr();
        line += 1;
        Some(p)
    })?;
    let deviation = if circuit.n() <= config.max_qubits {
        let table = simulate_with(&circuit, None, config)?;
        let dev = samples
            .bits
            .iter()
            .zip(&amplitudes)
            .map(|(x, a)| (table.amplitudes[*x as usize] - a).norm())
            .fold(0.0, f64::max);
        if dev > ALIGNMENT_TOLERANCE {
            return Err(Error::Alignment(format!(
                "amplitude lines disagree with simulation (max deviation {dev:e})"
            )));
        }
        Some(dev)
    } else {
        None
    };
    Ok(AlignmentReport {
        samples: samples.len(),
        amplitudes: amplitudes.len(),
        f_xeb: f,
        max_amplitude_deviation: deviation,
    })
}

//! Calibration maps: per-coupler native fSim parameters and per-occurrence
//! z-rotations inserted around every 2-gate, plus fitting of the native
//! parameters from device samples.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use crate::circuit::{Circuit, Moment, RzGate, STANDARD_PHI, STANDARD_THETA};
use crate::error::{Error, Result};
use crate::layout::Edge;
use crate::optimize::{nelder_mead, NelderMeadConfig};
use crate::rng::{stream, Purpose};
use crate::samples::SampleSet;
use crate::simulator::{compile, StateVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NativeParams {
    pub theta: f64,
    pub phi: f64,
}

impl NativeParams {
    pub const STANDARD: NativeParams = NativeParams {
        theta: STANDARD_THETA,
        phi: STANDARD_PHI,
    };
}

/// Rotation angles around the k-th occurrence of a coupler:
/// `[pre_a, pre_b, post_a, post_b]`, `a` being the edge's smaller qubit.
pub type RotationAngles = [f64; 4];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CalibrationMap {
    pub native: BTreeMap<Edge, NativeParams>,
    pub rotations: BTreeMap<(Edge, usize), RotationAngles>,
}

impl CalibrationMap {
    pub fn rotation_count(&self) -> usize {
        self.rotations.len() * 4
    }
}

/// `(edge, k)` for every 2-gate in circuit order, `k` counting earlier
/// occurrences of the same edge.
pub fn occurrences(circuit: &Circuit) -> Result<Vec<(Edge, usize)>> {
    let mut seen: BTreeMap<Edge, usize> = BTreeMap::new();
    circuit
        .two_qubit_gates()
        .map(|g| {
            let edge = g.edge()?;
            let k = seen.entry(edge).or_insert(0);
            let out = (edge, *k);
            *k += 1;
            Ok(out)
        })
        .collect()
}

/// Standard parameters on every coupler, all rotations zero.
pub fn identity_calibration(circuit: &Circuit) -> CalibrationMap {
    let mut map = CalibrationMap::default();
    for (edge, k) in occurrences(circuit).expect("generated circuits use adjacent couplers") {
        map.native.insert(edge, NativeParams::STANDARD);
        map.rotations.insert((edge, k), [0.0; 4]);
    }
    map
}

/// Standard parameters plus independent uniform offsets in
/// `[-magnitude, magnitude]`, and uniform rotation angles in the same range.
///
/// Each value is drawn from a stream keyed by its edge (and occurrence), so
/// the offsets of a coupler do not depend on which circuit asked for them.
pub fn random_miscalibration(circuit: &Circuit, seed: u64, magnitude: f64) -> Result<CalibrationMap> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("magnitude {magnitude} must be >= 0")));
    }
    let offset = |rng: &mut rand_chacha::ChaCha8Rng| (2.0 * rng.random::<f64>() - 1.0) * magnitude + 0.0;
    let mut map = CalibrationMap::default();
    for (edge, k) in occurrences(circuit)? {
        map.native.entry(edge).or_insert_with(|| {
            let mut rng = stream(seed, Purpose::Miscalibration, edge.key(), u64::MAX);
            NativeParams {
                theta: STANDARD_THETA + offset(&mut rng),
                phi: STANDARD_PHI + offset(&mut rng),
            }
        });
        let mut rng = stream(seed, Purpose::Miscalibration, edge.key(), k as u64);
        map.rotations.insert(
            (edge, k),
            [offset(&mut rng), offset(&mut rng), offset(&mut rng), offset(&mut rng)],
        );
    }
    Ok(map)
}

/// Like [`random_miscalibration`] but every angle is off by exactly
/// `magnitude`, with a random sign.
pub fn fixed_offset_miscalibration(circuit: &Circuit, seed: u64, magnitude: f64) -> Result<CalibrationMap> {
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("magnitude {magnitude} must be >= 0")));
    }
    let offset = |rng: &mut rand_chacha::ChaCha8Rng| if rng.random::<bool>() { magnitude } else { -magnitude };
    let mut map = CalibrationMap::default();
    for (edge, k) in occurrences(circuit)? {
        map.native.entry(edge).or_insert_with(|| {
            let mut rng = stream(seed, Purpose::Miscalibration, edge.key(), u64::MAX);
            NativeParams {
                theta: STANDARD_THETA + offset(&mut rng),
                phi: STANDARD_PHI + offset(&mut rng),
            }
        });
        let mut rng = stream(seed, Purpose::Miscalibration, edge.key(), k as u64);
        map.rotations.insert(
            (edge, k),
            [offset(&mut rng), offset(&mut rng), offset(&mut rng), offset(&mut rng)],
        );
    }
    Ok(map)
}

/// Replaces every 2-gate's parameters with its coupler's native values and
/// brackets each 2-gate layer with z-rotation layers.
pub fn apply_calibration(circuit: &Circuit, calib: &CalibrationMap) -> Result<Circuit> {
    let mut seen: BTreeMap<Edge, usize> = BTreeMap::new();
    let mut moments = Vec::with_capacity(circuit.moments.len() * 2);
    for moment in &circuit.moments {
        let Moment::Twos(gates) = moment else {
            moments.push(moment.clone());
            continue;
        };
        if gates.is_empty() {
            moments.push(moment.clone());
            continue;
        }
        let mut pre = Vec::with_capacity(2 * gates.len());
        let mut post = Vec::with_capacity(2 * gates.len());
        let mut twos = Vec::with_capacity(gates.len());
        for g in gates {
            let edge = g.edge()?;
            let k = seen.entry(edge).or_insert(0);
            let native = calib
                .native
                .get(&edge)
                .ok_or_else(|| Error::Coverage(format!("coupler {edge}")))?;
            let angles = calib
                .rotations
                .get(&(edge, *k))
                .ok_or_else(|| Error::Coverage(format!("occurrence {} of coupler {edge}", *k)))?;
            *k += 1;
            pre.push(RzGate {
                target: edge.a(),
                angle: angles[0],
            });
            pre.push(RzGate {
                target: edge.b(),
                angle: angles[1],
            });
            post.push(RzGate {
                target: edge.a(),
                angle: angles[2],
            });
            post.push(RzGate {
                target: edge.b(),
                angle: angles[3],
            });
            let mut g = *g;
            g.theta = native.theta;
            g.phi = native.phi;
            twos.push(g);
        }
        moments.push(Moment::Rz(pre));
        moments.push(Moment::Twos(twos));
        moments.push(Moment::Rz(post));
    }
    Ok(Circuit {
        moments,
        ..circuit.clone()
    })
}

const GRID_THETA: usize = 24;
const GRID_PHI: usize = 48;

#[derive(Clone, Debug)]
pub struct FitConfig {
    pub min_samples: usize,
    pub restarts: usize,
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            min_samples: 10_000,
            restarts: 5,
            tolerance: 1e-4,
            max_evaluations: 2_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub theta_hat: f64,
    pub phi_hat: f64,
    /// Normalized XEB score at the optimum (the maximised quantity).
    pub objective: f64,
    /// Plain F_XEB of the samples against the fitted circuit.
    pub f_xeb: f64,
    pub evaluations: usize,
}

fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Output distribution of `ideal` with every 2-gate set to `(theta, phi)`.
fn coupler_distribution(ideal: &Circuit, theta: f64, phi: f64) -> Vec<f64> {
    let mut circuit = ideal.clone();
    for m in &mut circuit.moments {
        if let Moment::Twos(gates) = m {
            for g in gates {
                g.theta = theta;
                g.phi = phi;
            }
        }
    }
    let mut state = StateVector::zero(circuit.n());
    for op in compile(&circuit) {
        op.apply(&mut state);
    }
    state.probabilities()
}

/// One coupler circuit with the device samples collected for it.
#[derive(Clone, Debug)]
pub struct CouplerRun {
    pub ideal: Circuit,
    pub samples: SampleSet,
}

/// Fits the native `(theta, phi)` of a single coupler by maximising the XEB
/// agreement between `samples` and the coupler circuit `ideal`.
///
/// Equivalent to [`fit_two_gate_batch`] with one run.
pub fn fit_two_gate(ideal: &Circuit, samples: &SampleSet, config: &FitConfig) -> Result<FitResult> {
    fit_two_gate_batch(
        &[CouplerRun {
            ideal: ideal.clone(),
            samples: samples.clone(),
        }],
        config,
    )
}

/// Fits the native `(theta, phi)` shared by all runs (the same coupler under
/// different random 1-gate sequences).
///
/// The maximised score is the pooled F_XEB divided by the square root of the
/// candidates' own pooled XEB, `Σ (2^n Σp² − 1)`. Plain F_XEB rewards
/// candidates sharper than the device distribution; the normalized score
/// peaks where the candidates' deviations from uniform point along the
/// device's, and a global depolarizing factor does not move the peak. A
/// single 2-qubit circuit leaves that direction with as many degrees of
/// freedom as there are parameters, so several runs are needed to make the
/// peak unique.
pub fn fit_two_gate_batch(runs: &[CouplerRun], config: &FitConfig) -> Result<FitResult> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no coupler runs".into()));
    }
    for run in runs {
        if run.ideal.n() != 2 || run.samples.n != 2 {
            return Err(Error::InvalidArgument(format!(
                "coupler fit needs 2-qubit circuits and samples, got {} qubits / {}-bit samples",
                run.ideal.n(),
                run.samples.n
            )));
        }
        run.ideal.validate()?;
    }
    let total_samples: usize = runs.iter().map(|r| r.samples.len()).sum();
    if total_samples < config.min_samples {
        return Err(Error::InsufficientData(format!(
            "{total_samples} samples, need at least {}",
            config.min_samples
        )));
    }
    let freqs: Vec<Vec<f64>> = runs.iter().map(|r| frequencies(&r.samples)).collect();

    let scores_at = |theta: f64, phi: f64| {
        let theta = theta.clamp(0.0, PI);
        let phi = wrap_angle(phi);
        let (mut cross, mut own) = (0.0, 0.0);
        for (run, freq) in runs.iter().zip(&freqs) {
            let probs = coupler_distribution(&run.ideal, theta, phi);
            let (c, o) = xeb_terms(freq, &probs);
            cross += c;
            own += o;
        }
        let k = runs.len() as f64;
        (cross / k, cross / own.max(1e-12).sqrt())
    };
    let nm = NelderMeadConfig {
        step: vec![0.2, 0.4],
        tolerance: config.tolerance,
        max_evaluations: config.max_evaluations,
    };

    // The landscape has many local maxima. Restarts begin at the standard
    // gate, at the best cells of a coarse grid scan, and at random points.
    let mut evaluations = 0;
    let mut starts = vec![[STANDARD_THETA, STANDARD_PHI]];
    let mut grid = Vec::with_capacity(GRID_THETA * GRID_PHI);
    for i in 0..GRID_THETA {
        for j in 0..GRID_PHI {
            let theta = (i as f64 + 0.5) * PI / GRID_THETA as f64;
            let phi = (j as f64 + 0.5) * 2.0 * PI / GRID_PHI as f64;
            grid.push((scores_at(theta, phi).1, theta, phi));
            evaluations += 1;
        }
    }
    grid.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.extend(grid.iter().take(config.restarts).map(|g| [g.1, g.2]));
    let mut rng = stream(config.seed, Purpose::FitRestarts, 0, 0);
    for _ in 0..config.restarts {
        starts.push([rng.random::<f64>() * PI, rng.random::<f64>() * 2.0 * PI]);
    }

    let mut best: Option<(f64, f64, f64)> = None;
    let mut any_converged = false;
    for start in starts {
        let m = nelder_mead(|x| -scores_at(x[0], x[1]).1, &start, &nm);
        evaluations += m.evaluations;
        any_converged |= m.converged;
        let (theta, phi) = (m.x[0].clamp(0.0, PI), wrap_angle(m.x[1]));
        let score = -m.value;
        if best.is_none_or(|b| score > b.2) {
            best = Some((theta, phi, score));
        }
    }
    let (theta_hat, phi_hat, objective) = best.expect("at least one start");
    if !any_converged {
        return Err(Error::Convergence {
            best_theta: theta_hat,
            best_phi: phi_hat,
            best_objective: objective,
            evaluations,
        });
    }
    let (f_xeb, _) = scores_at(theta_hat, phi_hat);
    Ok(FitResult {
        theta_hat,
        phi_hat,
        objective,
        f_xeb,
        evaluations,
    })
}

fn frequencies(samples: &SampleSet) -> Vec<f64> {
    let total = samples.len().max(1) as f64;
    samples.histogram().iter().map(|c| *c as f64 / total).collect()
}

/// `(F_XEB, 2^n Σp² − 1)` of an empirical distribution against `probs`.
fn xeb_terms(freq: &[f64], probs: &[f64]) -> (f64, f64) {
    let dim = probs.len() as f64;
    let cross = dim * freq.iter().zip(probs).map(|(q, p)| q * p).sum::<f64>() - 1.0;
    let own = dim * probs.iter().map(|p| p * p).sum::<f64>() - 1.0;
    (cross, own)
}

/// Pooled normalized XEB score of the runs with 2-gates set to
/// `(theta, phi)`; the quantity the coupler fit maximises.
pub fn coupler_score(runs: &[CouplerRun], theta: f64, phi: f64) -> f64 {
    let (mut cross, mut own) = (0.0, 0.0);
    for run in runs {
        let (c, o) = xeb_terms(
            &frequencies(&run.samples),
            &coupler_distribution(&run.ideal, theta, phi),
        );
        cross += c;
        own += o;
    }
    cross / own.max(1e-12).sqrt()
}

//! Noisy sample generators: the global white-noise mixture, per-qubit
//! readout flips, and Monte Carlo Pauli error trajectories.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{apply_calibration, CalibrationMap};
use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::layout::GridQubit;
use crate::rng::{stream, Purpose};
use crate::samples::SampleSet;
use crate::simulator::{check_normalized, check_order, compile, Cdf, Op, SimConfig, StateVector};

/// Readout flip probabilities of one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRates {
    /// Probability a 0 is read as 1.
    pub p01: f64,
    /// Probability a 1 is read as 0.
    pub p10: f64,
}

impl ReadoutRates {
    pub const NONE: ReadoutRates = ReadoutRates { p01: 0.0, p10: 0.0 };

    pub fn symmetric(e: f64) -> Self {
        Self { p01: e, p10: e }
    }

    /// Single readout error probability used by the product formula.
    pub fn mean(&self) -> f64 {
        0.5 * (self.p01 + self.p10)
    }

    fn check(&self, what: &str) -> Result<()> {
        check_probability(self.p01, what)?;
        check_probability(self.p10, what)
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("{what} rate {p} outside [0, 1]")));
    }
    Ok(())
}

/// Per-component error probabilities of one circuit.
///
/// `one_qubit[i]` belongs to the i-th 1-gate in circuit order,
/// `two_qubit[j]` to the j-th 2-gate, and `readout[q]` to the q-th qubit of
/// the circuit's qubit order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentErrorRates {
    pub one_qubit: Vec<f64>,
    pub two_qubit: Vec<f64>,
    pub readout: Vec<ReadoutRates>,
}

impl ComponentErrorRates {
    pub fn uniform(circuit: &Circuit, e1: f64, e2: f64, eq: f64) -> Self {
        Self {
            one_qubit: vec![e1; circuit.one_qubit_count()],
            two_qubit: vec![e2; circuit.two_qubit_count()],
            readout: vec![ReadoutRates::symmetric(eq); circuit.n()],
        }
    }

    pub fn zero(circuit: &Circuit) -> Self {
        Self::uniform(circuit, 0.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.one_qubit {
            check_probability(*p, "1-gate")?;
        }
        for p in &self.two_qubit {
            check_probability(*p, "2-gate")?;
        }
        for r in &self.readout {
            r.check("readout")?;
        }
        Ok(())
    }

    /// Errors unless there is exactly one rate per gate occurrence and qubit.
    pub fn check_covers(&self, circuit: &Circuit) -> Result<()> {
        let expect = [
            ("1-gate", self.one_qubit.len(), circuit.one_qubit_count()),
            ("2-gate", self.two_qubit.len(), circuit.two_qubit_count()),
            ("readout", self.readout.len(), circuit.n()),
        ];
        for (what, have, need) in expect {
            if have != need {
                return Err(Error::Coverage(format!(
                    "{what} rates: {have} given, circuit has {need}"
                )));
            }
        }
        Ok(())
    }
}

/// Draws from `phi · P + (1 − phi) · uniform`.
pub fn sample_noise_model(
    probs: &[f64],
    qubit_order: &[GridQubit],
    phi: f64,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::InvalidArgument(format!("fidelity {phi} outside [0, 1]")));
    }
    check_normalized(probs)?;
    check_order(probs, qubit_order)?;
    let cdf = Cdf::new(probs);
    let dim = probs.len() as u64;
    let bits = (0..count)
        .map(|i| {
            let mut rng = stream(seed, Purpose::MixtureSample, i as u64, 0);
            if rng.random::<f64>() < phi {
                cdf.draw(&mut rng)
            } else {
                rng.random_range(0..dim)
            }
        })
        .collect();
    Ok(SampleSet::new(
        qubit_order.to_vec(),
        bits,
        format!("mixture phi={phi} seed={seed}"),
    ))
}

fn flip_bits<R: Rng>(x: u64, n: usize, rates: &[ReadoutRates], rng: &mut R) -> u64 {
    let mut out = x;
    for (i, r) in rates.iter().enumerate() {
        let mask = 1u64 << (n - 1 - i);
        let p = if x & mask == 0 { r.p01 } else { r.p10 };
        // draw unconditionally so every sample consumes the same stream length
        if rng.random::<f64>() < p {
            out ^= mask;
        }
    }
    out
}

/// Flips each bit of each sample independently, with probability `p01` if
/// the bit is 0 and `p10` if it is 1. `rates[i]` applies to the i-th qubit.
pub fn apply_readout_errors(samples: &SampleSet, rates: &[ReadoutRates], seed: u64) -> Result<SampleSet> {
    if rates.len() != samples.n {
        return Err(Error::InvalidArgument(format!(
            "{} readout rates for {}-bit samples",
            rates.len(),
            samples.n
        )));
    }
    for r in rates {
        r.check("readout")?;
    }
    let bits = samples
        .bits
        .iter()
        .enumerate()
        .map(|(i, &x)| flip_bits(x, samples.n, rates, &mut stream(seed, Purpose::Readout, i as u64, 0)))
        .collect();
    Ok(SampleSet {
        n: samples.n,
        qubit_order: samples.qubit_order.clone(),
        bits,
        provenance: format!("{} + readout seed={seed}", samples.provenance),
    })
}

/// Result of a trajectory run.
#[derive(Clone, Debug)]
pub struct TrajectoryRun {
    pub samples: SampleSet,
    /// Trajectories with no gate error and no readout flip.
    pub clean: usize,
    /// Trajectories with no gate error (readout flips allowed).
    pub gate_error_free: usize,
}

/// A Pauli inserted after op `op`. For 1-gates `code` is 1..=3 (X, Y, Z);
/// for 2-gates it is `4·pa + pb` with `(pa, pb) ≠ (0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ErrorEvent {
    op: u32,
    code: u8,
}

fn apply_event(state: &mut StateVector, op: &Op, code: u8) {
    match *op {
        Op::One { bit, .. } => state.apply_pauli(code, bit),
        Op::FSim { bit_a, bit_b, .. } => {
            state.apply_pauli(code / 4, bit_a);
            state.apply_pauli(code % 4, bit_b);
        }
        Op::Rz { .. } => unreachable!("rotations carry no error slot"),
    }
}

struct TrajectoryTree<'a> {
    ops: &'a [Op],
    errors: &'a [Vec<ErrorEvent>],
    seed: u64,
}

impl TrajectoryTree<'_> {
    /// `state` holds ops `[0, pos)` with the first `depth` events shared by
    /// every trajectory of `group` applied. Trajectories are sorted by their
    /// event lists, so those ending at this depth come first and the rest
    /// are grouped by their next event in op order.
    fn descend(&self, mut state: StateVector, pos: usize, depth: usize, group: &[usize], outcomes: &mut [u64]) {
        let finished = group.iter().take_while(|&&t| self.errors[t].len() == depth).count();
        let mut cursor = pos;
        let mut i = finished;
        while i < group.len() {
            let event = self.errors[group[i]][depth];
            let run = group[i..]
                .iter()
                .take_while(|&&t| self.errors[t][depth] == event)
                .count();
            let at = event.op as usize;
            for op in &self.ops[cursor..=at] {
                op.apply(&mut state);
            }
            cursor = at + 1;
            let mut child = state.clone();
            apply_event(&mut child, &self.ops[at], event.code);
            self.descend(child, cursor, depth + 1, &group[i..i + run], outcomes);
            i += run;
        }
        if finished > 0 {
            for op in &self.ops[cursor..] {
                op.apply(&mut state);
            }
            let cdf = Cdf::new(&state.probabilities());
            for &t in &group[..finished] {
                let mut rng = stream(self.seed, Purpose::TrajectoryDraw, t as u64, 0);
                outcomes[t] = cdf.draw(&mut rng);
            }
        }
    }
}

/// Monte Carlo Pauli-trajectory sampling of the calibrated circuit.
///
/// In each trajectory every gate occurrence independently errs with its
/// rate; an erring gate is followed by a uniformly random non-identity Pauli
/// on its support. One bitstring is drawn from the trajectory's final state
/// and readout flips are applied to it. Trajectory `t` draws from its own
/// keyed streams, so results do not depend on evaluation order.
///
/// Trajectories sharing a prefix of error events share the simulation of
/// that prefix.
pub fn pauli_trajectory_sample(
    circuit: &Circuit,
    calib: &CalibrationMap,
    rates: &ComponentErrorRates,
    count: usize,
    seed: u64,
) -> Result<TrajectoryRun> {
    pauli_trajectory_sample_with(circuit, calib, rates, count, seed, &SimConfig::default())
}

pub fn pauli_trajectory_sample_with(
    circuit: &Circuit,
    calib: &CalibrationMap,
    rates: &ComponentErrorRates,
    count: usize,
    seed: u64,
    config: &SimConfig,
) -> Result<TrajectoryRun> {
    let n = circuit.n();
    if n > config.max_qubits {
        return Err(Error::Capacity(format!(
            "{n} qubits exceeds the simulator limit of {}",
            config.max_qubits
        )));
    }
    circuit.validate()?;
    rates.validate()?;
    rates.check_covers(circuit)?;
    let calibrated = apply_calibration(circuit, calib)?;
    let ops = compile(&calibrated);

    // (op index, rate, is 2-gate) for every op that can err
    let mut slots = Vec::new();
    let (mut i1, mut i2) = (0, 0);
    for (k, op) in ops.iter().enumerate() {
        if op.is_one_qubit_gate() {
            slots.push((k as u32, rates.one_qubit[i1], false));
            i1 += 1;
        } else if op.is_two_qubit_gate() {
            slots.push((k as u32, rates.two_qubit[i2], true));
            i2 += 1;
        }
    }

    let errors: Vec<Vec<ErrorEvent>> = (0..count)
        .map(|t| {
            let mut rng = stream(seed, Purpose::TrajectoryErrors, t as u64, 0);
            let mut events = Vec::new();
            for &(op, rate, two) in &slots {
                if rng.random::<f64>() < rate {
                    let code = if two {
                        rng.random_range(1..16)
                    } else {
                        rng.random_range(1..4)
                    };
                    events.push(ErrorEvent { op, code });
                }
            }
            events
        })
        .collect();

    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| errors[a].cmp(&errors[b]));
    let mut outcomes = vec![0u64; count];
    let tree = TrajectoryTree {
        ops: &ops,
        errors: &errors,
        seed,
    };
    tree.descend(StateVector::zero(n), 0, 0, &order, &mut outcomes);

    let mut clean = 0;
    let mut gate_error_free = 0;
    let bits = outcomes
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            let mut rng = stream(seed, Purpose::TrajectoryReadout, t as u64, 0);
            let flipped = flip_bits(x, n, &rates.readout, &mut rng);
            if errors[t].is_empty() {
                gate_error_free += 1;
                if flipped == x {
                    clean += 1;
                }
            }
            flipped
        })
        .collect();

    Ok(TrajectoryRun {
        samples: SampleSet::new(circuit.qubits.clone(), bits, format!("pauli trajectories seed={seed}")),
        clean,
        gate_error_free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::identity_calibration;
    use crate::circuit::generate_random_circuit;
    use crate::layout::PatternKind;
    use crate::simulator::{exact_sample, simulate};

    fn qubits(n: u32) -> Vec<GridQubit> {
        (0..n).map(|c| GridQubit::new(0, c)).collect()
    }

    #[test]
    fn mixture_boundaries() {
        let q = qubits(3);
        let mut delta = vec![0.0; 8];
        delta[6] = 1.0;
        let s = sample_noise_model(&delta, &q, 1.0, 500, 2).unwrap();
        assert!(s.bits.iter().all(|b| *b == 6));
        let s = sample_noise_model(&delta, &q, 0.0, 8000, 2).unwrap();
        let h = s.histogram();
        assert!(h.iter().all(|c| (*c as f64 - 1000.0).abs() < 150.0), "{h:?}");
        assert!(sample_noise_model(&delta, &q, 1.5, 10, 2).is_err());
    }

    #[test]
    fn readout_extremes() {
        let q = qubits(4);
        let s = SampleSet::new(q, vec![0b0101, 0b1111, 0], "t");
        let same = apply_readout_errors(&s, &[ReadoutRates::NONE; 4], 3).unwrap();
        assert_eq!(same.bits, s.bits);
        let all = apply_readout_errors(&s, &[ReadoutRates::symmetric(1.0); 4], 3).unwrap();
        assert_eq!(all.bits, vec![0b1010, 0, 0b1111]);
        assert!(apply_readout_errors(&s, &[ReadoutRates::symmetric(1.2); 4], 3).is_err());
    }

    #[test]
    fn half_rate_gives_fair_coins() {
        let q = qubits(4);
        let s = SampleSet::new(q, vec![0b0011; 100_000], "t");
        let out = apply_readout_errors(&s, &[ReadoutRates::symmetric(0.5); 4], 9).unwrap();
        let sigma = (0.25f64 / 100_000.0).sqrt();
        for bit in 0..4 {
            let mean = out.bits.iter().map(|x| (x >> bit) & 1).sum::<u64>() as f64 / 100_000.0;
            assert!((mean - 0.5).abs() < 3.0 * sigma, "bit {bit}: {mean}");
        }
    }

    #[test]
    fn asymmetric_rates_only_flip_one_way() {
        let q = qubits(2);
        let s = SampleSet::new(q, vec![0b01; 1000], "t");
        let r = [ReadoutRates { p01: 1.0, p10: 0.0 }; 2];
        let out = apply_readout_errors(&s, &r, 1).unwrap();
        assert!(out.bits.iter().all(|b| *b == 0b11));
    }

    #[test]
    fn zero_rate_trajectories_match_exact_distribution() {
        let c = generate_random_circuit(2, 6, 8, PatternKind::Efgh).unwrap();
        let probs = simulate(&c, None).unwrap().probabilities();
        let run =
            pauli_trajectory_sample(&c, &identity_calibration(&c), &ComponentErrorRates::zero(&c), 20_000, 4).unwrap();
        assert_eq!(run.clean, 20_000);
        let exact = exact_sample(&probs, &c.qubits, 20_000, 5).unwrap();
        let (h1, h2) = (run.samples.histogram(), exact.histogram());
        // two-sample chi-square over 64 cells
        let chi: f64 = h1
            .iter()
            .zip(&h2)
            .filter(|(a, b)| **a + **b > 0)
            .map(|(a, b)| (*a as f64 - *b as f64).powi(2) / (*a + *b) as f64)
            .sum();
        assert!(chi < 120.0, "chi2 {chi}");
    }

    #[test]
    fn trajectories_are_deterministic() {
        let c = generate_random_circuit(2, 6, 8, PatternKind::Efgh).unwrap();
        let r = ComponentErrorRates::uniform(&c, 0.02, 0.05, 0.03);
        let a = pauli_trajectory_sample(&c, &identity_calibration(&c), &r, 3000, 8).unwrap();
        let b = pauli_trajectory_sample(&c, &identity_calibration(&c), &r, 3000, 8).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.clean, b.clean);
    }

    #[test]
    fn tree_matches_direct_trajectory_simulation() {
        // recompute each trajectory's final state on its own and check that the
        // shared-prefix traversal drew from the same state
        let c = generate_random_circuit(6, 5, 6, PatternKind::Efgh).unwrap();
        let r = ComponentErrorRates::uniform(&c, 0.05, 0.1, 0.0);
        let cal = identity_calibration(&c);
        let seed = 21;
        let run = pauli_trajectory_sample(&c, &cal, &r, 400, seed).unwrap();
        let ops = compile(&apply_calibration(&c, &cal).unwrap());
        for t in 0..400usize {
            let mut rng = stream(seed, Purpose::TrajectoryErrors, t as u64, 0);
            let mut state = StateVector::zero(5);
            for op in &ops {
                op.apply(&mut state);
                if op.is_one_qubit_gate() || op.is_two_qubit_gate() {
                    let rate = if op.is_one_qubit_gate() { 0.05 } else { 0.1 };
                    if rng.random::<f64>() < rate {
                        let code = if op.is_two_qubit_gate() {
                            rng.random_range(1..16)
                        } else {
                            rng.random_range(1..4)
                        };
                        apply_event(&mut state, op, code);
                    }
                }
            }
            let cdf = Cdf::new(&state.probabilities());
            let x = cdf.draw(&mut stream(seed, Purpose::TrajectoryDraw, t as u64, 0));
            assert_eq!(run.samples.bits[t], x, "trajectory {t}");
        }
    }

    #[test]
    fn coverage_and_rate_errors() {
        let c = generate_random_circuit(2, 4, 4, PatternKind::Efgh).unwrap();
        let mut r = ComponentErrorRates::zero(&c);
        r.two_qubit.pop();
        assert!(matches!(
            pauli_trajectory_sample(&c, &identity_calibration(&c), &r, 10, 1),
            Err(Error::Coverage(_))
        ));
        let mut r = ComponentErrorRates::zero(&c);
        r.one_qubit[0] = -0.1;
        assert!(pauli_trajectory_sample(&c, &identity_calibration(&c), &r, 10, 1).is_err());
    }
}

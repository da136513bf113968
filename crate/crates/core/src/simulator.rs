//! Exact statevector simulation.
//!
//! Index convention: the first qubit of the qubit order is the most
//! significant bit of a basis-state index.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::calibration::{apply_calibration, CalibrationMap};
use crate::circuit::{Circuit, Cut, Moment, OneQubitKind};
use crate::error::{Error, Result};
use crate::layout::GridQubit;
use crate::rng::{stream, Purpose};
use crate::samples::SampleSet;

pub const DEFAULT_MAX_QUBITS: usize = 26;

pub type Matrix2 = [[Complex64; 2]; 2];

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// 2×2 unitary of a 1-gate.
pub fn one_qubit_matrix(kind: OneQubitKind) -> Matrix2 {
    let h = 0.5;
    match kind {
        OneQubitKind::SqrtX => [[c(h, h), c(h, -h)], [c(h, -h), c(h, h)]],
        OneQubitKind::SqrtY => [[c(h, h), c(-h, -h)], [c(h, h), c(h, h)]],
        OneQubitKind::SqrtW => {
            // π/2 rotation about (X+Y)/√2
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let minus_i = c(0.0, -1.0);
            let e_minus = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
            let e_plus = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
            [[c(s, 0.0), minus_i * e_minus * s], [minus_i * e_plus * s, c(s, 0.0)]]
        }
    }
}

/// Single-qubit Pauli, `1 = X`, `2 = Y`, `3 = Z`.
pub fn pauli_matrix(code: u8) -> Matrix2 {
    match code {
        1 => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        2 => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        3 => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
        _ => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
    }
}

/// A mutable statevector over `n` qubits, initialised to |0…0⟩.
///
/// Real and imaginary parts are stored in separate arrays so the gate
/// kernels vectorize.
#[derive(Clone, Debug)]
pub struct StateVector {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Calls `f` on every amplitude pair `(index with bit clear, index with bit
/// set)` as `(re0, im0, re1, im1)`.
#[inline(always)]
fn for_each_pair<F>(re: &mut [f64], im: &mut [f64], bit: usize, mut f: F)
where
    F: FnMut(&mut f64, &mut f64, &mut f64, &mut f64),
{
    let stride = 1usize << bit;
    if stride == 1 {
        for (r, i) in re.chunks_exact_mut(2).zip(im.chunks_exact_mut(2)) {
            let (r0, r1) = r.split_at_mut(1);
            let (i0, i1) = i.split_at_mut(1);
            f(&mut r0[0], &mut i0[0], &mut r1[0], &mut i1[0]);
        }
        return;
    }
    for (r, i) in re.chunks_exact_mut(stride << 1).zip(im.chunks_exact_mut(stride << 1)) {
        let (r0, r1) = r.split_at_mut(stride);
        let (i0, i1) = i.split_at_mut(stride);
        let (i0, r1, i1) = (&mut i0[..stride], &mut r1[..stride], &mut i1[..stride]);
        for j in 0..stride {
            f(&mut r0[j], &mut i0[j], &mut r1[j], &mut i1[j]);
        }
    }
}

impl StateVector {
    pub fn zero(n: usize) -> Self {
        let mut re = vec![0.0; 1usize << n];
        re[0] = 1.0;
        Self {
            n,
            re,
            im: vec![0.0; 1usize << n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| Complex64::new(*r, *i))
            .collect()
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).sum()
    }

    /// Applies `m` to the qubit at bit position `bit`.
    pub fn apply_single(&mut self, m: &Matrix2, bit: usize) {
        let [[m00, m01], [m10, m11]] = *m;
        for_each_pair(&mut self.re, &mut self.im, bit, |r0, i0, r1, i1| {
            let (a, b, c, d) = (*r0, *i0, *r1, *i1);
            *r0 = m00.re * a - m00.im * b + m01.re * c - m01.im * d;
            *i0 = m00.re * b + m00.im * a + m01.re * d + m01.im * c;
            *r1 = m10.re * a - m10.im * b + m11.re * c - m11.im * d;
            *i1 = m10.re * b + m10.im * a + m11.re * d + m11.im * c;
        });
    }

    /// Applies a 1-gate. Same result as `apply_single` with
    /// [`one_qubit_matrix`], using fewer operations.
    pub fn apply_one(&mut self, kind: OneQubitKind, bit: usize) {
        match kind {
            // ½[(a+b) ± i(a−b)]
            OneQubitKind::SqrtX => for_each_pair(&mut self.re, &mut self.im, bit, |r0, i0, r1, i1| {
                let (sr, si) = (*r0 + *r1, *i0 + *i1);
                let (dr, di) = (*r0 - *r1, *i0 - *i1);
                *r0 = 0.5 * (sr - di);
                *i0 = 0.5 * (si + dr);
                *r1 = 0.5 * (sr + di);
                *i1 = 0.5 * (si - dr);
            }),
            // ½(1+i)(a−b), ½(1+i)(a+b)
            OneQubitKind::SqrtY => for_each_pair(&mut self.re, &mut self.im, bit, |r0, i0, r1, i1| {
                let (sr, si) = (*r0 + *r1, *i0 + *i1);
                let (dr, di) = (*r0 - *r1, *i0 - *i1);
                *r0 = 0.5 * (dr - di);
                *i0 = 0.5 * (dr + di);
                *r1 = 0.5 * (sr - si);
                *i1 = 0.5 * (sr + si);
            }),
            // a/√2 − ½(1+i)b, ½(1−i)a + b/√2
            OneQubitKind::SqrtW => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for_each_pair(&mut self.re, &mut self.im, bit, |r0, i0, r1, i1| {
                    let (a, b, c, d) = (*r0, *i0, *r1, *i1);
                    *r0 = s * a - 0.5 * (c - d);
                    *i0 = s * b - 0.5 * (c + d);
                    *r1 = 0.5 * (a + b) + s * c;
                    *i1 = 0.5 * (b - a) + s * d;
                });
            }
        }
    }

    pub fn apply_rz(&mut self, angle: f64, bit: usize) {
        let (s, c) = (angle / 2.0).sin_cos();
        // e^{∓i a/2} on the 0 and 1 components
        for_each_pair(&mut self.re, &mut self.im, bit, |r0, i0, r1, i1| {
            let (a, b) = (*r0, *i0);
            *r0 = c * a + s * b;
            *i0 = c * b - s * a;
            let (a, b) = (*r1, *i1);
            *r1 = c * a - s * b;
            *i1 = c * b + s * a;
        });
    }

    /// fSim(θ, φ) on the qubits at `bit_a` and `bit_b`. The gate is symmetric
    /// under exchange of its qubits, so their order does not matter.
    pub fn apply_fsim(&mut self, theta: f64, phi: f64, bit_a: usize, bit_b: usize) {
        let (cos, sin) = (theta.cos(), theta.sin());
        let (ps, pc) = (-phi).sin_cos();
        let (lo, hi) = (1usize << bit_a.min(bit_b), 1usize << bit_a.max(bit_b));
        let blocks = self.re.chunks_exact_mut(hi << 1).zip(self.im.chunks_exact_mut(hi << 1));
        for (rb, ib) in blocks {
            let (rh0, rh1) = rb.split_at_mut(hi);
            let (ih0, ih1) = ib.split_at_mut(hi);
            let lo_blocks = rh0
                .chunks_exact_mut(lo << 1)
                .zip(ih0.chunks_exact_mut(lo << 1))
                .zip(rh1.chunks_exact_mut(lo << 1).zip(ih1.chunks_exact_mut(lo << 1)));
            for ((r0, i0), (r1, i1)) in lo_blocks {
                let (r01, i01) = (&mut r0[lo..], &mut i0[lo..]);
                let (r10, r11) = r1.split_at_mut(lo);
                let (i10, i11) = i1.split_at_mut(lo);
                let pairs = r01
                    .iter_mut()
                    .zip(i01.iter_mut())
                    .zip(r10.iter_mut().zip(i10.iter_mut()));
                for ((ar, ai), (br, bi)) in pairs {
                    let (a, b, c, d) = (*ar, *ai, *br, *bi);
                    // [cos, -i sin; -i sin, cos]
                    *ar = cos * a + sin * d;
                    *ai = cos * b - sin * c;
                    *br = cos * c + sin * b;
                    *bi = cos * d - sin * a;
                }
                for (r, i) in r11.iter_mut().zip(i11.iter_mut()) {
                    let (a, b) = (*r, *i);
                    *r = pc * a - ps * b;
                    *i = pc * b + ps * a;
                }
            }
        }
    }

    /// Applies Pauli `code` as in [`pauli_matrix`]; 0 is a no-op.
    pub fn apply_pauli(&mut self, code: u8, bit: usize) {
        match code {
            0 => {}
            1 => for_each_pair(&mut self.re, &mut self.im, bit, |r0, i0, r1, i1| {
                std::mem::swap(r0, r1);
                std::mem::swap(i0, i1);
            }),
            _ => self.apply_single(&pauli_matrix(code), bit),
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).collect()
    }
}

/// One executable step of a compiled circuit.
#[derive(Clone, Copy, Debug)]
pub enum Op {
    One {
        kind: OneQubitKind,
        bit: usize,
    },
    FSim {
        theta: f64,
        phi: f64,
        bit_a: usize,
        bit_b: usize,
    },
    Rz {
        angle: f64,
        bit: usize,
    },
}

impl Op {
    pub fn apply(&self, state: &mut StateVector) {
        match *self {
            Op::One { kind, bit } => state.apply_one(kind, bit),
            Op::FSim {
                theta,
                phi,
                bit_a,
                bit_b,
            } => state.apply_fsim(theta, phi, bit_a, bit_b),
            Op::Rz { angle, bit } => state.apply_rz(angle, bit),
        }
    }

    pub fn is_one_qubit_gate(&self) -> bool {
        matches!(self, Op::One { .. })
    }

    pub fn is_two_qubit_gate(&self) -> bool {
        matches!(self, Op::FSim { .. })
    }
}

/// Flattens a circuit into ops in circuit order. Zero-angle rotations are
/// dropped since Rz(0) is the identity.
pub fn compile(circuit: &Circuit) -> Vec<Op> {
    let bits = circuit.bit_positions();
    let mut ops = Vec::new();
    for m in &circuit.moments {
        match m {
            Moment::Ones(gates) => ops.extend(gates.iter().map(|g| Op::One {
                kind: g.kind,
                bit: bits[&g.target],
            })),
            Moment::Twos(gates) => ops.extend(gates.iter().map(|g| Op::FSim {
                theta: g.theta,
                phi: g.phi,
                bit_a: bits[&g.a],
                bit_b: bits[&g.b],
            })),
            Moment::Rz(gates) => ops.extend(gates.iter().filter(|g| g.angle != 0.0).map(|g| Op::Rz {
                angle: g.angle,
                bit: bits[&g.target],
            })),
        }
    }
    ops
}

/// Full amplitude array of a circuit applied to |0…0⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeTable {
    pub qubit_order: Vec<GridQubit>,
    pub amplitudes: Vec<Complex64>,
}

impl AmplitudeTable {
    pub fn n(&self) -> usize {
        self.qubit_order.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        probabilities(self)
    }
}

/// `p[x] = |amp[x]|²`.
pub fn probabilities(table: &AmplitudeTable) -> Vec<f64> {
    table.amplitudes.iter().map(|a| a.norm_sqr()).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub max_qubits: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

pub fn simulate(circuit: &Circuit, calib: Option<&CalibrationMap>) -> Result<AmplitudeTable> {
    simulate_with(circuit, calib, &SimConfig::default())
}

pub fn simulate_with(circuit: &Circuit, calib: Option<&CalibrationMap>, config: &SimConfig) -> Result<AmplitudeTable> {
    if circuit.n() > config.max_qubits {
        return Err(Error::Capacity(format!(
            "{} qubits exceeds the simulator limit of {}; derive a patch circuit and use \
             simulate_patch_factored",
            circuit.n(),
            config.max_qubits
        )));
    }
    circuit.validate()?;
    let calibrated;
    let circuit = match calib {
        Some(c) => {
            calibrated = apply_calibration(circuit, c)?;
            &calibrated
        }
        None => circuit,
    };
    let mut state = StateVector::zero(circuit.n());
    for op in compile(circuit) {
        op.apply(&mut state);
    }
    Ok(AmplitudeTable {
        qubit_order: circuit.qubits.clone(),
        amplitudes: state.into_amplitudes(),
    })
}

/// Independent simulations of the two sides of a patch circuit.
#[derive(Clone, Debug)]
pub struct FactorizedTable {
    pub left: AmplitudeTable,
    pub right: AmplitudeTable,
    pub cut: Cut,
    /// Order of the joint bitstring (the original circuit's qubit order).
    pub qubit_order: Vec<GridQubit>,
}

impl FactorizedTable {
    /// Splits a joint index into `(left index, right index)`.
    pub fn split_index(&self, x: u64) -> (u64, u64) {
        let n = self.qubit_order.len();
        let (mut l, mut r) = (0u64, 0u64);
        for (i, q) in self.qubit_order.iter().enumerate() {
            let bit = (x >> (n - 1 - i)) & 1;
            if self.cut.left.contains(q) {
                l = (l << 1) | bit;
            } else {
                r = (r << 1) | bit;
            }
        }
        (l, r)
    }

    pub fn joint_probability(&self, x: u64) -> f64 {
        let (l, r) = self.split_index(x);
        self.left.amplitudes[l as usize].norm_sqr() * self.right.amplitudes[r as usize].norm_sqr()
    }

    pub fn joint_probabilities(&self) -> Vec<f64> {
        (0..1u64 << self.qubit_order.len())
            .map(|x| self.joint_probability(x))
            .collect()
    }

    /// Number of amplitudes held.
    pub fn stored_amplitudes(&self) -> usize {
        self.left.amplitudes.len() + self.right.amplitudes.len()
    }
}

/// Restricts a circuit to a subset of its qubits, dropping gates that touch
/// qubits outside the subset. Qubit order follows the original order.
fn restrict(circuit: &Circuit, keep: &std::collections::BTreeSet<GridQubit>) -> Circuit {
    let qubits: Vec<_> = circuit.qubits.iter().copied().filter(|q| keep.contains(q)).collect();
    let moments = circuit
        .moments
        .iter()
        .map(|m| match m {
            Moment::Ones(g) => Moment::Ones(g.iter().filter(|g| keep.contains(&g.target)).copied().collect()),
            Moment::Twos(g) => Moment::Twos(
                g.iter()
                    .filter(|g| keep.contains(&g.a) && keep.contains(&g.b))
                    .copied()
                    .collect(),
            ),
            Moment::Rz(g) => Moment::Rz(g.iter().filter(|g| keep.contains(&g.target)).copied().collect()),
        })
        .collect();
    Circuit {
        qubits,
        depth: circuit.depth,
        pattern: circuit.pattern,
        variant: circuit.variant,
        seed: circuit.seed,
        moments,
    }
}

pub fn simulate_patch_factored(
    circuit: &Circuit,
    cut: &Cut,
    calib: Option<&CalibrationMap>,
) -> Result<FactorizedTable> {
    cut.check_partition(&circuit.qubits)?;
    if let Some(g) = circuit.two_qubit_gates().find(|g| cut.crosses(g)) {
        return Err(Error::NotFactorizable(format!(
            "2-gate on {}-{} crosses the cut",
            g.a, g.b
        )));
    }
    let calibrated;
    let circuit = match calib {
        Some(c) => {
            calibrated = apply_calibration(circuit, c)?;
            &calibrated
        }
        None => circuit,
    };
    let left = simulate(&restrict(circuit, &cut.left), None)?;
    let right = simulate(&restrict(circuit, &cut.right), None)?;
    Ok(FactorizedTable {
        left,
        right,
        cut: cut.clone(),
        qubit_order: circuit.qubits.clone(),
    })
}

const NORMALIZATION_TOLERANCE: f64 = 1e-8;

pub(crate) fn check_normalized(probs: &[f64]) -> Result<f64> {
    let total: f64 = probs.iter().sum();
    if !total.is_finite() || (total - 1.0).abs() > NORMALIZATION_TOLERANCE || probs.iter().any(|p| *p < 0.0) {
        return Err(Error::NotNormalized(total));
    }
    Ok(total)
}

/// Cumulative distribution for inverse-transform sampling.
pub(crate) struct Cdf {
    cumulative: Vec<f64>,
}

impl Cdf {
    pub(crate) fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|c| *c <= u);
        if idx < self.cumulative.len() {
            return idx as u64;
        }
        // u rounded up to the total: take the last cell with nonzero mass
        let mut idx = self.cumulative.len() - 1;
        while idx > 0 && self.cumulative[idx] == self.cumulative[idx - 1] {
            idx -= 1;
        }
        idx as u64
    }
}

/// `count` i.i.d. draws from `probs`.
pub fn exact_sample(probs: &[f64], qubit_order: &[GridQubit], count: usize, seed: u64) -> Result<SampleSet> {
    check_normalized(probs)?;
    check_order(probs, qubit_order)?;
    let cdf = Cdf::new(probs);
    let mut rng = stream(seed, Purpose::ExactSample, 0, 0);
    let bits = (0..count).map(|_| cdf.draw(&mut rng)).collect();
    Ok(SampleSet::new(qubit_order.to_vec(), bits, format!("exact seed={seed}")))
}

pub(crate) fn check_order(probs: &[f64], qubit_order: &[GridQubit]) -> Result<()> {
    if probs.len() != 1usize << qubit_order.len() {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities do not match {} qubits",
            probs.len(),
            qubit_order.len()
        )));
    }
    Ok(())
}

/// Map from qubit to index in `order`.
pub fn order_index(order: &[GridQubit]) -> BTreeMap<GridQubit, usize> {
    order.iter().enumerate().map(|(i, q)| (*q, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Variant;
    use crate::circuit::{generate_random_circuit, FSimGate, OneQubitGate, RzGate, STANDARD_PHI, STANDARD_THETA};
    use crate::layout::PatternKind;

    fn is_unitary(m: &Matrix2) -> bool {
        for i in 0..2 {
            for j in 0..2 {
                let dot: Complex64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - Complex64::new(expect, 0.0)).norm() > 1e-14 {
                    return false;
                }
            }
        }
        true
    }

    fn bare(qubits: Vec<GridQubit>, moments: Vec<Moment>) -> Circuit {
        Circuit {
            qubits,
            depth: 0,
            pattern: PatternKind::Efgh,
            variant: Variant::Full,
            seed: 0,
            moments,
        }
    }

    #[test]
    fn gate_matrices_unitary() {
        for k in OneQubitKind::ALL {
            assert!(is_unitary(&one_qubit_matrix(k)), "{k:?}");
        }
        for p in 0..4 {
            assert!(is_unitary(&pauli_matrix(p)));
        }
    }

    #[test]
    fn specialized_kernels_match_matrices() {
        let c = generate_random_circuit(9, 5, 6, PatternKind::Efgh).unwrap();
        let mut base = StateVector::zero(5);
        for op in compile(&c) {
            op.apply(&mut base);
        }
        for kind in OneQubitKind::ALL {
            for bit in 0..5 {
                let (mut fast, mut slow) = (base.clone(), base.clone());
                fast.apply_one(kind, bit);
                slow.apply_single(&one_qubit_matrix(kind), bit);
                for (x, y) in fast.amplitudes().iter().zip(slow.amplitudes()) {
                    assert!((x - y).norm() < 1e-14, "{kind:?} bit {bit}");
                }
            }
        }
        for bit in 0..5 {
            let (mut fast, mut slow) = (base.clone(), base.clone());
            fast.apply_pauli(1, bit);
            slow.apply_single(&pauli_matrix(1), bit);
            assert_eq!(fast.amplitudes(), slow.amplitudes());
        }
    }

    #[test]
    fn sqrt_w_squares_to_w() {
        // (√W)² = -i·(X+Y)/√2
        let m = one_qubit_matrix(OneQubitKind::SqrtW);
        let sq01: Complex64 = m[0][0] * m[0][1] + m[0][1] * m[1][1];
        let expect = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        assert!((sq01 - expect).norm() < 1e-14);
    }

    #[test]
    fn empty_circuit_is_basis_zero() {
        let q = vec![GridQubit::new(0, 0), GridQubit::new(0, 1), GridQubit::new(1, 0)];
        let t = simulate(&bare(q, vec![]), None).unwrap();
        assert_eq!(t.amplitudes[0], Complex64::new(1.0, 0.0));
        assert!(t.amplitudes[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn sqrt_x_splits_evenly() {
        let q = GridQubit::new(0, 0);
        let c = bare(
            vec![q],
            vec![Moment::Ones(vec![OneQubitGate {
                kind: OneQubitKind::SqrtX,
                target: q,
            }])],
        );
        let p = simulate(&c, None).unwrap().probabilities();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fsim_swaps_01_to_minus_i_10() {
        // prepare |01⟩ with a Pauli X on the second qubit, then fSim(π/2, π/6)
        let mut s = StateVector::zero(2);
        s.apply_pauli(1, 0);
        s.apply_fsim(STANDARD_THETA, STANDARD_PHI, 1, 0);
        let a = s.amplitudes();
        assert!((a[0b10] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(a[0b01].norm() < 1e-15);
    }

    #[test]
    fn fsim_phase_on_11() {
        let mut s = StateVector::zero(2);
        s.apply_pauli(1, 0);
        s.apply_pauli(1, 1);
        s.apply_fsim(0.3, 0.7, 1, 0);
        assert!((s.amplitudes()[3] - Complex64::from_polar(1.0, -0.7)).norm() < 1e-15);
    }

    #[test]
    fn rz_convention() {
        let mut s = StateVector::zero(1);
        s.apply_single(&one_qubit_matrix(OneQubitKind::SqrtX), 0);
        let before = s.clone();
        s.apply_rz(0.4, 0);
        let a = s.amplitudes();
        let b = before.amplitudes();
        assert!((a[0] - b[0] * Complex64::from_polar(1.0, -0.2)).norm() < 1e-15);
        assert!((a[1] - b[1] * Complex64::from_polar(1.0, 0.2)).norm() < 1e-15);
    }

    #[test]
    fn norm_preserved_through_random_circuit() {
        let c = generate_random_circuit(3, 10, 14, PatternKind::Efgh).unwrap();
        let mut s = StateVector::zero(10);
        for op in compile(&c) {
            op.apply(&mut s);
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn disjoint_gates_commute() {
        let q: Vec<_> = (0..4).map(|c| GridQubit::new(0, c)).collect();
        let g1 = Moment::Twos(vec![FSimGate {
            theta: 0.4,
            phi: 1.1,
            a: q[0],
            b: q[1],
        }]);
        let g2 = Moment::Ones(vec![OneQubitGate {
            kind: OneQubitKind::SqrtW,
            target: q[3],
        }]);
        let g3 = Moment::Rz(vec![RzGate {
            target: q[2],
            angle: 0.9,
        }]);
        let prep = Moment::Ones(
            q.iter()
                .map(|t| OneQubitGate {
                    kind: OneQubitKind::SqrtY,
                    target: *t,
                })
                .collect(),
        );
        let a = simulate(
            &bare(q.clone(), vec![prep.clone(), g1.clone(), g2.clone(), g3.clone()]),
            None,
        )
        .unwrap();
        let b = simulate(&bare(q.clone(), vec![prep, g3, g2, g1]), None).unwrap();
        for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn capacity_error_mentions_patch() {
        let c = generate_random_circuit(3, 12, 2, PatternKind::Efgh).unwrap();
        let err = simulate_with(&c, None, &SimConfig { max_qubits: 10 }).unwrap_err();
        assert!(matches!(err, Error::Capacity(ref m) if m.contains("patch")));
    }

    #[test]
    fn porter_thomas_second_moment_n12() {
        let c = generate_random_circuit(17, 12, 14, PatternKind::Efgh).unwrap();
        let p = simulate(&c, None).unwrap().probabilities();
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        let m2 = 4096.0 * p.iter().map(|x| x * x).sum::<f64>();
        assert!((1.8..=2.2).contains(&m2), "{m2}");
    }

    #[test]
    fn factorized_matches_direct_n12() {
        let c = generate_random_circuit(8, 12, 14, PatternKind::Efgh).unwrap();
        let cut = Cut::vertical_bisection(&c.qubits);
        let patch = crate::circuit::derive_patch(&c, &cut).unwrap();
        let direct = simulate(&patch, None).unwrap().probabilities();
        let f = simulate_patch_factored(&patch, &cut, None).unwrap();
        assert_eq!(f.stored_amplitudes(), 2 * 64);
        for (x, p) in direct.iter().enumerate() {
            assert!((f.joint_probability(x as u64) - p).abs() < 1e-10);
        }
        assert!(matches!(
            simulate_patch_factored(&c, &cut, None),
            Err(Error::NotFactorizable(_))
        ));
    }

    #[test]
    fn factorized_side_without_gates_is_delta() {
        let q = vec![GridQubit::new(0, 0), GridQubit::new(0, 1)];
        let c = bare(
            q.clone(),
            vec![Moment::Ones(vec![OneQubitGate {
                kind: OneQubitKind::SqrtX,
                target: q[0],
            }])],
        );
        let cut = Cut {
            left: [q[0]].into_iter().collect(),
            right: [q[1]].into_iter().collect(),
        };
        let f = simulate_patch_factored(&c, &cut, None).unwrap();
        assert_eq!(f.right.probabilities(), vec![1.0, 0.0]);
    }

    #[test]
    fn sampling_edge_cases() {
        let q: Vec<_> = (0..3).map(|c| GridQubit::new(0, c)).collect();
        let mut delta = vec![0.0; 8];
        delta[5] = 1.0;
        assert!(exact_sample(&delta, &q, 0, 1).unwrap().is_empty());
        let s = exact_sample(&delta, &q, 100, 1).unwrap();
        assert!(s.bits.iter().all(|b| *b == 5));
        let bad = vec![0.2; 8];
        assert!(matches!(exact_sample(&bad, &q, 10, 1), Err(Error::NotNormalized(_))));
    }
}

use crate::layout::GridQubit;

/// An ordered record of measured bitstrings.
///
/// Bitstrings are stored as basis-state indices: character `i` of the text
/// form (qubit `qubit_order[i]`) is bit `n - 1 - i` of the index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSet {
    pub n: usize,
    /// Empty when the order is not known (e.g. a bare sample file).
    pub qubit_order: Vec<GridQubit>,
    pub bits: Vec<u64>,
    pub provenance: String,
}

impl SampleSet {
    pub fn new(qubit_order: Vec<GridQubit>, bits: Vec<u64>, provenance: impl Into<String>) -> Self {
        Self {
            n: qubit_order.len(),
            qubit_order,
            bits,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bitstring of sample `i` as ASCII '0'/'1', first qubit first.
    pub fn bitstring(&self, i: usize) -> String {
        format_bits(self.bits[i], self.n)
    }

    /// Per-cell counts over all `2^n` outcomes.
    pub fn histogram(&self) -> Vec<u64> {
        let mut counts = vec![0u64; 1usize << self.n];
        for &b in &self.bits {
            counts[b as usize] += 1;
        }
        counts
    }
}

pub fn format_bits(x: u64, n: usize) -> String {
    (0..n)
        .map(|i| if (x >> (n - 1 - i)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

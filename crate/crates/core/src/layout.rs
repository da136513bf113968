//! Grid geometry: qubit coordinates, couplers, coupler classes and the
//! periodic layer patterns built from them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A qubit identified by its position on the planar grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct GridQubit {
    pub row: u32,
    pub col: u32,
}

impl GridQubit {
    pub const fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }

    pub fn is_adjacent(&self, other: &GridQubit) -> bool {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col) == 1
    }

    /// Stable 64-bit key, used to address per-qubit random streams.
    pub fn key(&self) -> u64 {
        ((self.row as u64) << 32) | self.col as u64
    }
}

impl From<[u32; 2]> for GridQubit {
    fn from(rc: [u32; 2]) -> Self {
        Self::new(rc[0], rc[1])
    }
}

impl From<GridQubit> for [u32; 2] {
    fn from(q: GridQubit) -> Self {
        [q.row, q.col]
    }
}

impl fmt::Display for GridQubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// An unordered pair of adjacent qubits, stored with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[GridQubit; 2]", into = "[GridQubit; 2]")]
pub struct Edge {
    a: GridQubit,
    b: GridQubit,
}

impl Edge {
    pub fn new(x: GridQubit, y: GridQubit) -> Result<Self> {
        if !x.is_adjacent(&y) {
            return Err(Error::InvalidArgument(format!(
                "qubits {x} and {y} are not grid-adjacent"
            )));
        }
        Ok(if x < y {
            Self { a: x, b: y }
        } else {
            Self { a: y, b: x }
        })
    }

    pub fn a(&self) -> GridQubit {
        self.a
    }

    pub fn b(&self) -> GridQubit {
        self.b
    }

    pub fn contains(&self, q: &GridQubit) -> bool {
        self.a == *q || self.b == *q
    }

    pub fn key(&self) -> u64 {
        self.a.key().wrapping_mul(0x1000_0000_01B3) ^ self.b.key()
    }
}

impl TryFrom<[GridQubit; 2]> for Edge {
    type Error = Error;
    fn try_from(v: [GridQubit; 2]) -> Result<Self> {
        Edge::new(v[0], v[1])
    }
}

impl From<Edge> for [GridQubit; 2] {
    fn from(e: Edge) -> Self {
        [e.a, e.b]
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

/// The four vertex-disjoint edge classes of a rectangular grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CouplerClass {
    /// `(r, c)-(r, c+1)` with `c` even.
    HorizontalEven,
    /// `(r, c)-(r, c+1)` with `c` odd.
    HorizontalOdd,
    /// `(r, c)-(r+1, c)` with `r` even.
    VerticalEven,
    /// `(r, c)-(r+1, c)` with `r` odd.
    VerticalOdd,
}

impl CouplerClass {
    pub fn of(edge: &Edge) -> Self {
        let a = edge.a();
        if a.row == edge.b().row {
            if a.col.is_multiple_of(2) {
                CouplerClass::HorizontalEven
            } else {
                CouplerClass::HorizontalOdd
            }
        } else if a.row.is_multiple_of(2) {
            CouplerClass::VerticalEven
        } else {
            CouplerClass::VerticalOdd
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternKind {
    #[serde(rename = "EFGH")]
    Efgh,
    #[serde(rename = "ABCDCDAB")]
    Abcdcdab,
}

impl PatternKind {
    /// One period of the layer-label cycle.
    pub fn cycle(&self) -> &'static [char] {
        match self {
            PatternKind::Efgh => &['E', 'F', 'G', 'H'],
            PatternKind::Abcdcdab => &['A', 'B', 'C', 'D', 'C', 'D', 'A', 'B'],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PatternKind::Efgh => "EFGH",
            PatternKind::Abcdcdab => "ABCDCDAB",
        }
    }

    /// Which coupler class a label fires.
    pub fn class_of(&self, label: char) -> Option<CouplerClass> {
        use CouplerClass::*;
        match (self, label) {
            (PatternKind::Efgh, 'E') => Some(HorizontalEven),
            (PatternKind::Efgh, 'F') => Some(VerticalEven),
            (PatternKind::Efgh, 'G') => Some(HorizontalOdd),
            (PatternKind::Efgh, 'H') => Some(VerticalOdd),
            (PatternKind::Abcdcdab, 'A') => Some(HorizontalOdd),
            (PatternKind::Abcdcdab, 'B') => Some(VerticalOdd),
            (PatternKind::Abcdcdab, 'C') => Some(HorizontalEven),
            (PatternKind::Abcdcdab, 'D') => Some(VerticalEven),
            _ => None,
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PatternKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EFGH" => Ok(PatternKind::Efgh),
            "ABCDCDAB" => Ok(PatternKind::Abcdcdab),
            _ => Err(Error::InvalidArgument(format!("unknown pattern {s:?}"))),
        }
    }
}

/// A pattern together with the concrete edge set of each of its labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub kind: PatternKind,
    pub coupler_classes: BTreeMap<char, Vec<Edge>>,
}

impl Pattern {
    /// Coupler classes restricted to edges with both endpoints in `qubits`.
    pub fn over(kind: PatternKind, qubits: &[GridQubit]) -> Self {
        let mut coupler_classes: BTreeMap<char, Vec<Edge>> = BTreeMap::new();
        let mut labels: Vec<char> = kind.cycle().to_vec();
        labels.sort_unstable();
        labels.dedup();
        for label in &labels {
            coupler_classes.insert(*label, Vec::new());
        }
        let set: std::collections::BTreeSet<_> = qubits.iter().copied().collect();
        for q in &set {
            for nb in [GridQubit::new(q.row, q.col + 1), GridQubit::new(q.row + 1, q.col)] {
                if !set.contains(&nb) {
                    continue;
                }
                let edge = Edge::new(*q, nb).expect("neighbours are adjacent");
                let class = CouplerClass::of(&edge);
                let label = labels
                    .iter()
                    .find(|l| kind.class_of(**l) == Some(class))
                    .expect("every class has a label");
                coupler_classes.get_mut(label).unwrap().push(edge);
            }
        }
        for edges in coupler_classes.values_mut() {
            edges.sort_unstable();
        }
        Self { kind, coupler_classes }
    }

    pub fn edges(&self, label: char) -> &[Edge] {
        self.coupler_classes.get(&label).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// The first `depth` labels of the pattern's periodic label cycle.
pub fn layer_sequence(kind: PatternKind, depth: usize) -> Vec<char> {
    kind.cycle().iter().copied().cycle().take(depth).collect()
}

/// A rectangular grid of qubits with some positions disabled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridLayout {
    pub rows: u32,
    pub cols: u32,
    pub dead: Vec<GridQubit>,
}

impl Default for GridLayout {
    /// 6×9 grid with `(5, 8)` disabled: 53 usable qubits.
    fn default() -> Self {
        Self {
            rows: 6,
            cols: 9,
            dead: vec![GridQubit::new(5, 8)],
        }
    }
}

impl GridLayout {
    pub fn new(rows: u32, cols: u32, dead: Vec<GridQubit>) -> Self {
        Self { rows, cols, dead }
    }

    pub fn capacity(&self) -> usize {
        self.fill_order().len()
    }

    /// Usable qubits in the order circuits of growing size claim them.
    ///
    /// Qubits are taken shell by shell from the `(0, 0)` corner, shell `k`
    /// being the cells with `max(row, col) = k`, walked down column `k` and
    /// then back along row `k`. Every prefix is connected, and prefixes of
    /// size 12 and 16 are the 3×4 and 4×4 rectangles.
    pub fn fill_order(&self) -> Vec<GridQubit> {
        let mut order = Vec::with_capacity((self.rows * self.cols) as usize);
        let shells = self.rows.max(self.cols);
        for k in 0..shells {
            for r in 0..=k {
                order.push(GridQubit::new(r, k));
            }
            for c in (0..k).rev() {
                order.push(GridQubit::new(k, c));
            }
        }
        order
            .into_iter()
            .filter(|q| q.row < self.rows && q.col < self.cols && !self.dead.contains(q))
            .collect()
    }

    /// The first `n` qubits of the fill order.
    pub fn qubits(&self, n: usize) -> Result<Vec<GridQubit>> {
        let order = self.fill_order();
        if n == 0 || n > order.len() {
            return Err(Error::Capacity(format!(
                "requested {n} qubits, grid {}x{} offers 1..={}",
                self.rows,
                self.cols,
                order.len()
            )));
        }
        Ok(order[..n].to_vec())
    }
}

//! Partitions, Frobenius coordinates, Maya diagrams, strips and box moves.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::factorial;

/// Weakly decreasing list of positive parts; the empty list is the zero partition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    parts: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::new(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.parts
    }
}

impl Partition {
    /// Accepts trailing zeros and strips them.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.contains(&0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidPartition(format!("{parts:?} is not weakly decreasing and positive")));
        }
        Ok(Partition { parts })
    }

    pub fn zero() -> Self {
        Partition::default()
    }

    /// Literal syntax "4,3,1"; empty (or "0") is the zero partition.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        if s.is_empty() {
            return Ok(Partition::zero());
        }
        let parts = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidPartition(format!("bad part {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Partition::new(parts)
    }

    pub fn to_literal(&self) -> String {
        self.parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// λ_i with 0-based row index; zero past the end.
    pub fn part(&self, i: usize) -> usize {
        self.parts.get(i).copied().unwrap_or(0)
    }

    pub fn conjugate(&self) -> Partition {
        let first = self.part(0);
        let parts = (0..first).map(|j| self.parts.iter().take_while(|&&p| p > j).count()).collect();
        Partition { parts }
    }

    pub fn contains(&self, mu: &Partition) -> bool {
        mu.len() <= self.len() && mu.parts.iter().zip(&self.parts).all(|(m, l)| m <= l)
    }

    /// Length of the main diagonal (Durfee size).
    pub fn diagonal(&self) -> usize {
        self.parts.iter().enumerate().take_while(|(i, &p)| p > *i).count()
    }

    pub fn add_box(&self, row: usize) -> Option<Partition> {
        if row > self.len() || (row > 0 && self.part(row - 1) == self.part(row)) {
            return None;
        }
        let mut parts = self.parts.clone();
        if row == parts.len() {
            parts.push(1);
        } else {
            parts[row] += 1;
        }
        Some(Partition { parts })
    }

    pub fn remove_box(&self, row: usize) -> Option<Partition> {
        if row >= self.len() || self.part(row) == self.part(row + 1) {
            return None;
        }
        let mut parts = self.parts.clone();
        parts[row] -= 1;
        if parts[row] == 0 {
            parts.pop();
        }
        Some(Partition { parts })
    }

    pub fn box_moves(&self) -> BoxMoves {
        let addable = (0..=self.len()).filter(|&r| r == 0 || self.part(r - 1) > self.part(r)).collect();
        let removable = (0..self.len()).filter(|&r| self.part(r) > self.part(r + 1)).collect();
        BoxMoves { addable, removable }
    }

    /// Hook length of the cell (row, col), both 0-based.
    pub fn hook(&self, row: usize, col: usize) -> usize {
        let arm = self.part(row) - col - 1;
        let leg = self.parts[row + 1..].iter().take_while(|&&p| p > col).count();
        arm + leg + 1
    }

    pub fn frobenius(&self) -> FrobeniusCoords {
        let r = self.diagonal();
        let conj = self.conjugate();
        FrobeniusCoords {
            alpha: (0..r).map(|i| self.parts[i] - i - 1).collect(),
            beta: (0..r).map(|i| conj.parts[i] - i - 1).collect(),
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "({})", self.to_literal())
        }
    }
}

/// Canonical order: by weight, then reverse-lexicographic on parts, i.e. among
/// equal weights the lexicographically larger part list comes first.
impl Ord for Partition {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight().cmp(&other.weight()).then_with(|| other.parts.cmp(&self.parts))
    }
}

impl PartialOrd for Partition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Rows (0-based) where a box may be added or removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxMoves {
    pub addable: Vec<usize>,
    pub removable: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrobeniusCoords {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl FrobeniusCoords {
    pub fn to_partition(&self) -> Result<Partition> {
        if self.alpha.len() != self.beta.len() {
            return Err(Error::LengthMismatch { left: self.alpha.len(), right: self.beta.len() });
        }
        let strict = |v: &[usize]| v.windows(2).all(|w| w[0] > w[1]);
        if !strict(&self.alpha) || !strict(&self.beta) {
            return Err(Error::InvalidPartition("Frobenius coordinates must be strictly decreasing".into()));
        }
        let r = self.alpha.len();
        let len = if r == 0 { 0 } else { self.beta[0] + 1 };
        let mut parts = vec![0usize; len];
        for (i, p) in parts.iter_mut().enumerate() {
            if i < r {
                *p = self.alpha[i] + i + 1;
            } else {
                // rows below the diagonal: count legs reaching row i
                *p = self.beta.iter().enumerate().filter(|(j, &b)| b + j >= i).count();
            }
        }
        Partition::new(parts)
    }
}

/// Finite window of a Maya diagram: h_i = λ_i − i + N (1-based i), at level n.
/// The particle of row i sits on site λ_i − i + n.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MayaDiagram {
    pub level: i64,
    pub window: usize,
    pub coords: Vec<i64>,
}

impl MayaDiagram {
    pub fn from_partition(lambda: &Partition, level: i64, window: usize) -> Result<Self> {
        if window < lambda.len() {
            return Err(Error::WindowTooSmall { window: window as i64, needed: lambda.len() as i64 });
        }
        let coords = (0..window).map(|i| lambda.part(i) as i64 - (i as i64 + 1) + window as i64).collect();
        Ok(MayaDiagram { level, window, coords })
    }

    pub fn to_partition(&self) -> Result<Partition> {
        let n = self.coords.len() as i64;
        let parts: Vec<i64> = self.coords.iter().enumerate().map(|(i, h)| h + i as i64 + 1 - n).collect();
        if parts.iter().any(|&p| p < 0) || self.coords.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidPartition(format!("coordinates {:?} are not a Maya window", self.coords)));
        }
        Partition::new(parts.into_iter().map(|p| p as usize).collect())
    }

    /// Absolute lattice sites of the windowed particles.
    pub fn sites(&self) -> Vec<i64> {
        self.coords.iter().map(|h| h - self.window as i64 + self.level).collect()
    }

    pub fn rewindow(&self, window: usize) -> Result<Self> {
        MayaDiagram::from_partition(&self.to_partition()?, self.level, window)
    }
}

pub fn maya_from_partition(lambda: &Partition, level: i64, window: usize) -> Result<MayaDiagram> {
    MayaDiagram::from_partition(lambda, level, window)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

/// μ ⊆ λ and λ/μ has at most one box per row (vertical) or per column (horizontal).
pub fn is_strip(lambda: &Partition, mu: &Partition, orientation: Orientation) -> bool {
    if !lambda.contains(mu) {
        return false;
    }
    match orientation {
        Orientation::Vertical => (0..lambda.len()).all(|i| lambda.part(i) - mu.part(i) <= 1),
        // interlacing λ_{i+1} ≤ μ_i
        Orientation::Horizontal => (0..lambda.len()).all(|i| lambda.part(i + 1) <= mu.part(i)),
    }
}

/// d(λ) by the hook length formula.
pub fn standard_tableaux_count(lambda: &Partition) -> BigUint {
    let mut hooks = BigUint::from(1u32);
    for (r, &p) in lambda.parts().iter().enumerate() {
        for c in 0..p {
            hooks *= lambda.hook(r, c);
        }
    }
    factorial(lambda.weight() as u64) / hooks
}

/// All partitions of n with parts ≤ max_part and at most max_len parts,
/// in canonical order (lexicographically decreasing).
pub fn partitions_of(n: usize, max_part: usize, max_len: usize) -> Vec<Partition> {
    fn rec(rem: usize, cap: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rem == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        if left == 0 {
            return;
        }
        for p in (1..=cap.min(rem)).rev() {
            cur.push(p);
            rec(rem - p, p, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, max_part, max_len, &mut Vec::new(), &mut out);
    out
}

/// Every partition with weight ≤ max_weight, canonical order.
pub fn partitions_up_to(max_weight: usize) -> Vec<Partition> {
    (0..=max_weight).flat_map(|n| partitions_of(n, n, n)).collect()
}

/// Every partition fitting in a box of `rows` rows and `cols` columns.
pub fn partitions_in_box(rows: usize, cols: usize) -> Vec<Partition> {
    (0..=rows * cols).flat_map(|n| partitions_of(n, cols, rows)).collect()
}

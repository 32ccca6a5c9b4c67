//! Young-diagram and Gelfand-Tsetlin combinatorics: partitions, arm/leg
//! box statistics, interlacing tests and coordinate conversions.
//!
//! Partitions are stored without trailing zeros; all row/column indices in
//! the public API are 1-based. A [`GTPattern`] is a stack of partitions
//! `lambda^n, ..., lambda^N` (bottom row first) in which consecutive rows
//! interlace and row `j` has at most `j` parts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("parts must be weakly decreasing (part {index} is {value}, previous {previous})")]
    NotDecreasing {
        index: usize,
        value: u32,
        previous: u32,
    },
    #[error("box ({row},{col}) lies outside the diagram")]
    BoxOutsideDiagram { row: usize, col: usize },
    #[error("partition has {length} nonzero parts, at most {max} allowed")]
    TooLong { length: usize, max: usize },
    #[error("rows {lower} and {upper} of the pattern do not interlace")]
    NotInterlacing { lower: usize, upper: usize },
    #[error("row at level {level} has {length} parts, at most {level} allowed")]
    RowTooLong { level: usize, length: usize },
    #[error("pattern must contain at least one row")]
    EmptyPattern,
    #[error("cannot parse partition from {input:?}")]
    Parse { input: String },
}

/// A partition: weakly decreasing sequence of nonnegative integers,
/// identified with its Young diagram. Trailing zeros are not stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// The empty partition.
    pub fn empty() -> Self {
        Partition { parts: Vec::new() }
    }

    /// Builds a partition from the given parts, which must be weakly
    /// decreasing. Trailing zeros are dropped.
    pub fn new(parts: impl Into<Vec<u32>>) -> Result<Self, PartitionError> {
        let mut parts = parts.into();
        for i in 1..parts.len() {
            if parts[i] > parts[i - 1] {
                return Err(PartitionError::NotDecreasing {
                    index: i + 1,
                    value: parts[i],
                    previous: parts[i - 1],
                });
            }
        }
        while parts.last() == Some(&0) {
            parts.pop();
        }
        Ok(Partition { parts })
    }

    /// Nonzero parts, largest first.
    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// The `i`-th part (1-based); zero beyond the stored length.
    pub fn part(&self, i: usize) -> u32 {
        if i >= 1 && i <= self.parts.len() {
            self.parts[i - 1]
        } else {
            0
        }
    }

    /// Number of nonzero parts.
    pub fn length(&self) -> usize {
        self.parts.len()
    }

    /// Sum of the parts.
    pub fn weight(&self) -> u32 {
        self.parts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// The conjugate partition (transposed diagram):
    /// `conj_i = #{j : lambda_j >= i}`.
    pub fn conjugate(&self) -> Partition {
        let cols = self.part(1) as usize;
        let mut parts = Vec::with_capacity(cols);
        for j in 1..=cols {
            parts.push(self.parts.iter().filter(|&&p| p as usize >= j).count() as u32);
        }
        Partition { parts }
    }

    /// Iterates over the boxes `(i, j)` of the diagram, 1-based.
    pub fn boxes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parts
            .iter()
            .enumerate()
            .flat_map(|(i0, &p)| (1..=p as usize).map(move |j| (i0 + 1, j)))
    }

    /// Whether the box `(i, j+1)` with `j = lambda_i` can be appended while
    /// keeping a valid diagram, i.e. `i == 1` or `lambda_{i-1} > lambda_i`.
    pub fn can_add_box(&self, row: usize) -> bool {
        row >= 1 && (row == 1 || self.part(row - 1) > self.part(row))
    }

    /// The diagram with one box appended to `row`.
    pub fn with_box(&self, row: usize) -> Result<Partition, PartitionError> {
        if !self.can_add_box(row) {
            return Err(PartitionError::BoxOutsideDiagram {
                row,
                col: self.part(row) as usize + 1,
            });
        }
        let mut parts = self.parts.clone();
        if row > parts.len() {
            parts.push(1);
        } else {
            parts[row - 1] += 1;
        }
        Ok(Partition { parts })
    }
}

impl fmt::Display for Partition {
    /// Canonical textual form: comma-separated parts in brackets, `[3,1]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Partition {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| PartitionError::Parse {
                input: s.to_string(),
            })?;
        let mut parts = Vec::new();
        for tok in inner.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            parts.push(tok.parse::<u32>().map_err(|_| PartitionError::Parse {
                input: s.to_string(),
            })?);
        }
        Partition::new(parts)
    }
}

/// Arm, leg, co-arm and co-leg of a box `(i, j)` of a diagram:
/// `arm = lambda_i - j`, `leg = lambda'_j - i`, `coarm = j - 1`,
/// `coleg = i - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxStats {
    pub arm: u32,
    pub leg: u32,
    pub coarm: u32,
    pub coleg: u32,
}

/// Box statistics of `(i, j)` in `lambda`; errors when the box lies outside
/// the diagram.
pub fn box_stats(lambda: &Partition, i: usize, j: usize) -> Result<BoxStats, PartitionError> {
    if i < 1 || j < 1 || (lambda.part(i) as usize) < j {
        return Err(PartitionError::BoxOutsideDiagram { row: i, col: j });
    }
    let col_height = lambda
        .parts()
        .iter()
        .filter(|&&p| p as usize >= j)
        .count();
    Ok(BoxStats {
        arm: lambda.part(i) - j as u32,
        leg: (col_height - i) as u32,
        coarm: (j - 1) as u32,
        coleg: (i - 1) as u32,
    })
}

/// Whether `mu` interlaces `lambda`: `lambda_1 >= mu_1 >= lambda_2 >= ...`.
pub fn interlaces(mu: &Partition, lambda: &Partition) -> bool {
    let n = mu.length().max(lambda.length());
    for i in 1..=n {
        if mu.part(i) > lambda.part(i) || lambda.part(i + 1) > mu.part(i) {
            return false;
        }
    }
    true
}

/// A Gelfand-Tsetlin pattern: partitions `lambda^n, ..., lambda^N` (bottom
/// row first) with `lambda^j` of length at most `j` and consecutive rows
/// interlacing.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GTPattern {
    base_level: usize,
    rows: Vec<Partition>,
}

impl GTPattern {
    /// Validates and builds a pattern. `rows[0]` sits at `base_level`.
    pub fn new(base_level: usize, rows: Vec<Partition>) -> Result<Self, PartitionError> {
        if base_level == 0 || rows.is_empty() {
            return Err(PartitionError::EmptyPattern);
        }
        for (r, row) in rows.iter().enumerate() {
            let level = base_level + r;
            if row.length() > level {
                return Err(PartitionError::RowTooLong {
                    level,
                    length: row.length(),
                });
            }
        }
        for r in 1..rows.len() {
            if !interlaces(&rows[r - 1], &rows[r]) {
                return Err(PartitionError::NotInterlacing {
                    lower: base_level + r - 1,
                    upper: base_level + r,
                });
            }
        }
        Ok(GTPattern { base_level, rows })
    }

    /// Pattern `(empty, ..., empty)` on levels `n..=N`.
    pub fn all_empty(n: usize, top: usize) -> Self {
        assert!(n >= 1 && top >= n);
        GTPattern {
            base_level: n,
            rows: vec![Partition::empty(); top - n + 1],
        }
    }

    pub fn base_level(&self) -> usize {
        self.base_level
    }

    pub fn top_level(&self) -> usize {
        self.base_level + self.rows.len() - 1
    }

    /// Rows bottom-first.
    pub fn rows(&self) -> &[Partition] {
        &self.rows
    }

    /// The row at the given level.
    pub fn row(&self, level: usize) -> &Partition {
        &self.rows[level - self.base_level]
    }
}

impl fmt::Debug for GTPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GT{}..{}{:?}", self.base_level, self.top_level(), self.rows)
    }
}

/// Particle coordinates `x^j_i = lambda^j_i - i + 1` for every level of the
/// pattern, bottom row first; row for level `j` is padded to `j` entries.
/// Within a row the values strictly decrease and consecutive rows satisfy
/// `x^{j+1}_i >= x^j_i > x^{j+1}_{i+1}`.
pub fn x_coordinates(p: &GTPattern) -> Vec<Vec<i64>> {
    p.rows()
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let level = p.base_level() + r;
            (1..=level)
                .map(|i| row.part(i) as i64 - i as i64 + 1)
                .collect()
        })
        .collect()
}

/// The increasing coordinates `ell_i = lambda_{N-i+1} + theta * i`,
/// `i = 1..=N`; consecutive values differ by at least `theta`.
pub fn ell_coordinates(
    lambda: &Partition,
    n_levels: usize,
    theta: f64,
) -> Result<Vec<f64>, PartitionError> {
    if lambda.length() > n_levels {
        return Err(PartitionError::TooLong {
            length: lambda.length(),
            max: n_levels,
        });
    }
    Ok((1..=n_levels)
        .map(|i| lambda.part(n_levels - i + 1) as f64 + theta * i as f64)
        .collect())
}

/// All partitions of weight `w` with at most `max_len` parts, in
/// deterministic (lexicographically decreasing) order.
pub fn partitions_of(w: u32, max_len: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(remaining: u32, max_part: u32, slots: usize, current: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition {
                parts: current.clone(),
            });
            return;
        }
        if slots == 0 || max_part == 0 {
            return;
        }
        let hi = remaining.min(max_part);
        for p in (1..=hi).rev() {
            current.push(p);
            rec(remaining - p, p, slots - 1, current, out);
            current.pop();
        }
    }
    rec(w, w, max_len, &mut current, &mut out);
    out
}

/// All partitions `mu` interlacing `lambda` from below (`mu` precedes
/// `lambda`), with `mu_i` ranging over `[lambda_{i+1}, lambda_i]`.
pub fn interlacing_predecessors(lambda: &Partition) -> Vec<Partition> {
    let len = lambda.length();
    let mut out = Vec::new();
    let mut mu = Vec::with_capacity(len);
    fn rec(lambda: &Partition, i: usize, len: usize, mu: &mut Vec<u32>, out: &mut Vec<Partition>) {
        if i > len {
            let mut parts = mu.clone();
            while parts.last() == Some(&0) {
                parts.pop();
            }
            out.push(Partition { parts });
            return;
        }
        let lo = lambda.part(i + 1);
        let hi = lambda.part(i);
        // upper bound by previous mu part keeps mu weakly decreasing
        let cap = if i >= 2 { mu[i - 2].min(hi) } else { hi };
        for v in (lo..=cap).rev() {
            mu.push(v);
            rec(lambda, i + 1, len, mu, out);
            mu.pop();
        }
    }
    rec(lambda, 1, len, &mut mu, &mut out);
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(parts: &[u32]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(pt(&[3, 1]).conjugate(), pt(&[2, 1, 1]));
        assert_eq!(Partition::empty().conjugate(), Partition::empty());
        assert_eq!(pt(&[2, 2]).conjugate(), pt(&[2, 2]));
    }

    #[test]
    fn box_stats_examples() {
        let l = pt(&[3, 1]);
        let b = box_stats(&l, 1, 1).unwrap();
        assert_eq!((b.arm, b.leg, b.coarm, b.coleg), (2, 1, 0, 0));
        let b = box_stats(&l, 1, 3).unwrap();
        assert_eq!((b.arm, b.leg, b.coarm, b.coleg), (0, 0, 2, 0));
        let b = box_stats(&pt(&[2, 2]), 1, 1).unwrap();
        assert_eq!((b.arm, b.leg), (1, 1));
        assert!(box_stats(&l, 2, 2).is_err());
        assert!(box_stats(&l, 3, 1).is_err());
    }

    #[test]
    fn interlacing_examples() {
        assert!(interlaces(&pt(&[2, 1]), &pt(&[3, 1])));
        assert!(!interlaces(&pt(&[2]), &pt(&[1, 1])));
        assert!(interlaces(&Partition::empty(), &pt(&[5])));
    }

    #[test]
    fn x_coordinates_staircase() {
        let p = GTPattern::all_empty(1, 4);
        let x = x_coordinates(&p);
        for (r, row) in x.iter().enumerate() {
            assert_eq!(row.len(), r + 1);
            for (i0, &v) in row.iter().enumerate() {
                assert_eq!(v, -(i0 as i64)); // x^j_i = 1 - i
            }
        }
        let single = GTPattern::new(1, vec![pt(&[2])]).unwrap();
        assert_eq!(x_coordinates(&single)[0], vec![2]);
    }

    #[test]
    fn x_coordinates_round_trip() {
        let p = GTPattern::new(
            1,
            vec![pt(&[1]), pt(&[2, 1]), pt(&[2, 1, 0])],
        )
        .unwrap();
        let x = x_coordinates(&p);
        for (r, row) in x.iter().enumerate() {
            let level = r + 1;
            for i in 1..=level {
                let lam = row[i - 1] + i as i64 - 1;
                assert_eq!(lam, p.row(level).part(i) as i64);
            }
        }
    }

    #[test]
    fn ell_coordinates_examples() {
        assert_eq!(
            ell_coordinates(&Partition::empty(), 3, 2.0).unwrap(),
            vec![2.0, 4.0, 6.0]
        );
        assert_eq!(ell_coordinates(&pt(&[1]), 2, 1.0).unwrap(), vec![1.0, 3.0]);
        assert!(ell_coordinates(&pt(&[1, 1]), 1, 1.0).is_err());
    }

    #[test]
    fn gt_pattern_rejects_bad_rows() {
        // non-interlacing stack
        assert!(GTPattern::new(1, vec![pt(&[2]), pt(&[1, 1])]).is_err());
        // row too long for its level
        assert!(GTPattern::new(1, vec![pt(&[1, 1])]).is_err());
        assert!(GTPattern::new(1, vec![pt(&[1]), pt(&[2, 1])]).is_ok());
    }

    #[test]
    fn partition_display_parse() {
        let l = pt(&[3, 1]);
        assert_eq!(l.to_string(), "[3,1]");
        assert_eq!("[3,1]".parse::<Partition>().unwrap(), l);
        assert_eq!("[]".parse::<Partition>().unwrap(), Partition::empty());
        assert!("3,1".parse::<Partition>().is_err());
    }

    proptest! {
        #[test]
        fn conjugate_is_involution(parts in proptest::collection::vec(0u32..12, 0..8)) {
            let mut sorted = parts.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let l = Partition::new(sorted).unwrap();
            prop_assert_eq!(l.conjugate().conjugate(), l);
        }

        #[test]
        fn arm_leg_duality(parts in proptest::collection::vec(1u32..10, 1..6)) {
            let mut sorted = parts.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let l = Partition::new(sorted).unwrap();
            let c = l.conjugate();
            for (i, j) in l.boxes() {
                let s = box_stats(&l, i, j).unwrap();
                let d = box_stats(&c, j, i).unwrap();
                prop_assert_eq!(s.arm, d.leg);
                prop_assert_eq!(s.leg, d.arm);
                prop_assert_eq!(s.coarm, d.coleg);
            }
        }

        #[test]
        fn interlacing_implies_weight_and_length_order(
            parts in proptest::collection::vec(0u32..8, 0..6),
        ) {
            let mut sorted = parts.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let l = Partition::new(sorted).unwrap();
            for mu in interlacing_predecessors(&l) {
                prop_assert!(interlaces(&mu, &l));
                prop_assert!(mu.weight() <= l.weight());
                prop_assert!(mu.length() <= l.length());
            }
        }

        #[test]
        fn ell_spacing(parts in proptest::collection::vec(0u32..15, 0..6), theta in 0.3f64..3.0) {
            let mut sorted = parts.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let l = Partition::new(sorted).unwrap();
            let n = l.length().max(1) + 2;
            let ell = ell_coordinates(&l, n, theta).unwrap();
            for w in ell.windows(2) {
                prop_assert!(w[1] - w[0] >= theta - 1e-12);
            }
        }

        #[test]
        fn perturbed_patterns_validated(bump_row in 0usize..2, bump_idx in 0usize..3) {
            // a valid stack stays valid; bumping a non-top entry by a large
            // amount must be caught by the constructor
            let rows = vec![pt(&[1]), pt(&[2, 1]), pt(&[3, 1, 1])];
            let base = GTPattern::new(1, rows.clone());
            prop_assert!(base.is_ok());
            let mut parts: Vec<Vec<u32>> = rows.iter().map(|r| {
                let mut v = r.parts().to_vec();
                v.resize(r.length().max(1), 0);
                v
            }).collect();
            if bump_idx < parts[bump_row].len() {
                parts[bump_row][bump_idx] += 7;
                let rebuilt: Result<Vec<Partition>, _> = parts
                    .into_iter()
                    .map(|v| {
                        let mut v = v;
                        v.sort_unstable_by(|a, b| b.cmp(a));
                        Partition::new(v)
                    })
                    .collect();
                let rebuilt = rebuilt.unwrap();
                prop_assert!(GTPattern::new(1, rebuilt).is_err());
            }
        }
    }
}

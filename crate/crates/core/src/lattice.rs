//! Finite point sets in (Z^n)^m: projections, columns, the m-way column
//! split, dyadic level sets of coefficient maps and shell sets.
//!
//! Axes are 0-based throughout. A point is stored flat, block `j` occupying
//! `coords[j*n..(j+1)*n]`, and sets iterate in lexicographic order of the
//! flat coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type LatticePoint = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeSet {
    n: usize,
    m: usize,
    points: BTreeSet<LatticePoint>,
}

impl LatticeSet {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return invalid("n and m must be positive");
        }
        Ok(Self { n, m, points: BTreeSet::new() })
    }

    pub fn from_points<I: IntoIterator<Item = LatticePoint>>(n: usize, m: usize, pts: I) -> Result<Self> {
        let mut s = Self::new(n, m)?;
        for p in pts {
            s.insert(p)?;
        }
        Ok(s)
    }

    pub fn insert(&mut self, p: LatticePoint) -> Result<bool> {
        if p.len() != self.n * self.m {
            return invalid(format!("point has {} coordinates, expected {}", p.len(), self.n * self.m));
        }
        Ok(self.points.insert(p))
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn contains(&self, p: &[i64]) -> bool {
        self.points.contains(p)
    }
    pub fn iter(&self) -> impl Iterator<Item = &LatticePoint> {
        self.points.iter()
    }
    pub fn points(&self) -> &BTreeSet<LatticePoint> {
        &self.points
    }

    pub fn block<'a>(&self, p: &'a [i64], j: usize) -> &'a [i64] {
        &p[j * self.n..(j + 1) * self.n]
    }

    fn check_axes(&self, axes: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.m];
        for &a in axes {
            if a >= self.m {
                return invalid(format!("axis {a} out of range for m = {}", self.m));
            }
            if seen[a] {
                return invalid(format!("axis {a} repeated"));
            }
            seen[a] = true;
        }
        Ok(())
    }

    fn restrict(&self, p: &[i64], axes: &[usize]) -> Vec<i64> {
        let mut out = Vec::with_capacity(axes.len() * self.n);
        for &a in axes {
            out.extend_from_slice(self.block(p, a));
        }
        out
    }

    fn complement(&self, axes: &[usize]) -> Vec<usize> {
        (0..self.m).filter(|a| !axes.contains(a)).collect()
    }

    /// Image of the set on the kept axes, blocks concatenated in ascending
    /// axis order.
    pub fn project(&self, kept: &[usize]) -> Result<BTreeSet<Vec<i64>>> {
        self.check_axes(kept)?;
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        Ok(self.points.iter().map(|p| self.restrict(p, &kept)).collect())
    }

    pub fn project_drop(&self, dropped: &[usize]) -> Result<BTreeSet<Vec<i64>>> {
        self.check_axes(dropped)?;
        self.project(&self.complement(dropped))
    }

    /// Free-axis coordinates of all points agreeing with `fixed`.
    pub fn column(&self, fixed: &[(usize, Vec<i64>)]) -> Result<BTreeSet<Vec<i64>>> {
        let axes: Vec<usize> = fixed.iter().map(|(a, _)| *a).collect();
        self.check_axes(&axes)?;
        for (a, v) in fixed {
            if v.len() != self.n {
                return invalid(format!("fixed block for axis {a} has wrong length"));
            }
        }
        let free = self.complement(&axes);
        Ok(self
            .points
            .iter()
            .filter(|p| fixed.iter().all(|(a, v)| self.block(p, *a) == v.as_slice()))
            .map(|p| self.restrict(p, &free))
            .collect())
    }

    /// Column sizes keyed by the coordinates on `fixed_axes`.
    pub fn column_sizes(&self, fixed_axes: &[usize]) -> Result<BTreeMap<Vec<i64>, usize>> {
        self.check_axes(fixed_axes)?;
        let mut sizes = BTreeMap::new();
        for p in &self.points {
            *sizes.entry(self.restrict(p, fixed_axes)).or_insert(0) += 1;
        }
        Ok(sizes)
    }

    /// Enumerates the set as iterated sums: an outer loop over the
    /// projection dropping `axis_order`, then one nested loop per axis of
    /// `axis_order`, first axis outermost.
    pub fn nested_enumeration(&self, axis_order: &[usize]) -> Result<Vec<LatticePoint>> {
        self.check_axes(axis_order)?;
        let outer_axes = self.complement(axis_order);
        let mut groups: BTreeMap<Vec<i64>, Vec<&LatticePoint>> = BTreeMap::new();
        for p in &self.points {
            groups.entry(self.restrict(p, &outer_axes)).or_default().push(p);
        }
        let mut out = Vec::with_capacity(self.len());
        for members in groups.values() {
            self.nest(members, axis_order, &mut out);
        }
        Ok(out)
    }

    fn nest(&self, members: &[&LatticePoint], order: &[usize], out: &mut Vec<LatticePoint>) {
        match order.split_first() {
            None => out.extend(members.iter().map(|p| (*p).clone())),
            Some((&axis, rest)) => {
                let mut by_value: BTreeMap<&[i64], Vec<&LatticePoint>> = BTreeMap::new();
                for p in members {
                    by_value.entry(self.block(p, axis)).or_default().push(p);
                }
                for sub in by_value.values() {
                    self.nest(sub, rest, out);
                }
            }
        }
    }

    pub fn union(&self, other: &LatticeSet) -> LatticeSet {
        let mut s = self.clone();
        s.points.extend(other.points.iter().cloned());
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            let blocks: Vec<String> = (0..self.m)
                .map(|j| self.block(p, j).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
                .collect();
            let _ = writeln!(s, "{}", blocks.join(" "));
        }
        s
    }

    pub fn from_text(n: usize, m: usize, text: &str) -> Result<Self> {
        let mut set = Self::new(n, m)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let blocks: Vec<&str> = line.split_whitespace().collect();
            if blocks.len() != m {
                return Err(parse_err(format!("expected {m} blocks, found {}", blocks.len())));
            }
            let mut p = Vec::with_capacity(n * m);
            for b in blocks {
                let comps: Vec<&str> = b.split(',').collect();
                if comps.len() != n {
                    return Err(parse_err(format!("block `{b}` must have {n} components")));
                }
                for c in comps {
                    p.push(c.parse::<i64>().map_err(|e| parse_err(format!("`{c}`: {e}")))?);
                }
            }
            set.insert(p)?;
        }
        Ok(set)
    }
}

/// Integer-exact test for `size > threshold`. When the threshold is within
/// 1e-9 of an integer r the test becomes `size >= r + 1`.
pub fn exceeds(size: usize, threshold: f64) -> bool {
    let r = threshold.round();
    if (threshold - r).abs() <= 1e-9 {
        size as f64 >= r + 1.0
    } else {
        size as f64 > threshold
    }
}

#[derive(Clone, Debug)]
pub struct ColumnSplit {
    pub parts: Vec<LatticeSet>,
    pub thresholds: Vec<f64>,
    pub big_n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitCertificate {
    pub part_index: usize,
    pub size: usize,
    /// N / N_j for parts 1..m-1, absent for the last part.
    pub projection_bound: Option<f64>,
    pub projection_actual: usize,
    /// Largest column over the first j-1 axes, with its bound N_{j-1}.
    pub max_column: Option<(usize, f64)>,
}

impl SplitCertificate {
    pub fn holds(&self) -> bool {
        let proj_ok = self.projection_bound.map_or(true, |b| (self.projection_actual as f64) < b);
        let col_ok = self.max_column.map_or(true, |(c, b)| !exceeds(c, b));
        proj_ok && col_ok
    }
}

/// Greedy peeling: part j (1-based) takes every point of the current
/// remainder whose column over the first j axes has more than N^{j/m}
/// points; the last part is what is left.
pub fn split_columns(u: &LatticeSet, big_n: usize) -> Result<ColumnSplit> {
    let m = u.m();
    if m < 2 {
        return invalid("column split needs m >= 2");
    }
    if big_n < u.len() {
        return invalid(format!("N = {big_n} is smaller than |U| = {}", u.len()));
    }
    if big_n == 0 {
        return invalid("N must be positive");
    }
    let thresholds: Vec<f64> = (1..m).map(|j| (big_n as f64).powf(j as f64 / m as f64)).collect();
    let mut rest = u.clone();
    let mut parts = Vec::with_capacity(m);
    for j in 1..m {
        let fixed: Vec<usize> = (j..m).collect();
        let sizes = rest.column_sizes(&fixed)?;
        let mut part = LatticeSet::new(u.n(), m)?;
        let mut keep = LatticeSet::new(u.n(), m)?;
        for p in rest.points.iter() {
            let key = rest.restrict(p, &fixed);
            if exceeds(sizes[&key], thresholds[j - 1]) {
                part.points.insert(p.clone());
            } else {
                keep.points.insert(p.clone());
            }
        }
        parts.push(part);
        rest = keep;
    }
    parts.push(rest);
    Ok(ColumnSplit { parts, thresholds, big_n })
}

impl ColumnSplit {
    /// Recounts both cardinality bounds from scratch for every part.
    pub fn certificates(&self) -> Vec<SplitCertificate> {
        let m = self.parts.len();
        self.parts
            .iter()
            .enumerate()
            .map(|(idx, part)| {
                let j = idx + 1;
                let (projection_bound, projection_actual) = if j < m {
                    let dropped: Vec<usize> = (0..j).collect();
                    let actual = part.project_drop(&dropped).map(|s| s.len()).unwrap_or(0);
                    (Some(self.big_n as f64 / self.thresholds[j - 1]), actual)
                } else {
                    (None, part.project_drop(&(0..m - 1).collect::<Vec<_>>()).map(|s| s.len()).unwrap_or(0))
                };
                let max_column = (j >= 2).then(|| {
                    let fixed: Vec<usize> = (j - 1..m).collect();
                    let biggest = part.column_sizes(&fixed).map(|s| s.values().copied().max().unwrap_or(0)).unwrap_or(0);
                    (biggest, self.thresholds[j - 2])
                });
                SplitCertificate { part_index: j, size: part.len(), projection_bound, projection_actual, max_column }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("part_index,size,projection_bound,projection_actual\n");
        for c in self.certificates() {
            let bound = c.projection_bound.map(|b| format!("{b:.12}")).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", c.part_index, c.size, bound, c.projection_actual);
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct CoeffMap {
    pub n: usize,
    pub m: usize,
    pub coeffs: BTreeMap<LatticePoint, Complex64>,
}

impl CoeffMap {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m, coeffs: BTreeMap::new() }
    }

    pub fn support(&self) -> LatticeSet {
        LatticeSet { n: self.n, m: self.m, points: self.coeffs.keys().cloned().collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.values().map(|b| b.norm()).fold(0.0, f64::max)
    }

    pub fn lq_norm(&self, q: f64) -> f64 {
        self.coeffs.values().map(|b| b.norm().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

#[derive(Clone, Debug)]
pub struct LevelClass {
    pub points: LatticeSet,
    /// Cardinality bound (B / (2^{-r} A))^q, or 2^{r_max q} for the absorbing
    /// class of the capped variant.
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct LevelSetPartition {
    pub classes: BTreeMap<u32, LevelClass>,
    pub a: f64,
    pub q: f64,
    pub r_max: Option<u32>,
    /// ℓ^q norm of the whole coefficient map.
    pub b_norm: f64,
    /// Zero coefficients, which fall in no class of the uncapped variant.
    pub unclassified: usize,
}

/// Smallest r >= 1 with |b| > A 2^{-r}.
fn dyadic_class(abs_b: f64, a: f64) -> u32 {
    let mut r = 1u32;
    let mut lower = a * 0.5;
    while abs_b <= lower {
        r += 1;
        lower *= 0.5;
    }
    r
}

pub fn default_r_max(lambda: u32, m: usize, n: usize, q: f64) -> u32 {
    ((lambda as f64 * (m * n) as f64 / q).ceil() as u32).max(1)
}

pub fn level_sets(b: &CoeffMap, a: f64, q: f64, r_max: Option<u32>) -> Result<LevelSetPartition> {
    if !(a > 0.0) || !(q > 0.0) {
        return invalid("A and q must be positive");
    }
    if r_max == Some(0) {
        return invalid("r_max must be at least 1");
    }
    let b_norm = b.lq_norm(q);
    let mut classes: BTreeMap<u32, LevelClass> = BTreeMap::new();
    let mut unclassified = 0;
    for (k, v) in &b.coeffs {
        let abs_b = v.norm();
        if abs_b > a {
            return invalid(format!("|b| = {abs_b} exceeds A = {a} at {k:?}"));
        }
        let r = match r_max {
            None if abs_b == 0.0 => {
                unclassified += 1;
                continue;
            }
            None => dyadic_class(abs_b, a),
            Some(cap) if abs_b == 0.0 => cap,
            Some(cap) => dyadic_class(abs_b, a).min(cap),
        };
        let bound = match r_max {
            Some(cap) if r == cap => 2f64.powf(cap as f64 * q),
            _ => (b_norm / (a * 2f64.powi(-(r as i32)))).powf(q),
        };
        classes
            .entry(r)
            .or_insert_with(|| LevelClass { points: LatticeSet { n: b.n, m: b.m, points: BTreeSet::new() }, bound })
            .points
            .points
            .insert(k.clone());
    }
    Ok(LevelSetPartition { classes, a, q, r_max, b_norm, unclassified })
}

impl LevelSetPartition {
    /// Whether every member of class r lies in its dyadic band (the
    /// absorbing class only needs the upper edge).
    pub fn bands_hold(&self, b: &CoeffMap) -> bool {
        self.classes.iter().all(|(&r, class)| {
            let hi = self.a * 2f64.powi(1 - r as i32);
            let lo = self.a * 2f64.powi(-(r as i32));
            class.points.iter().all(|k| {
                let v = b.coeffs[k].norm();
                if Some(r) == self.r_max {
                    v <= hi
                } else {
                    v > lo && v <= hi
                }
            })
        })
    }
}

/// Membership data for shell sets. The ring is
/// 2^{scale - c0} <= |k| <= 2^{scale + c0}; blocks 1..l must have norm >= M
/// and the remaining blocks norm < M.
#[derive(Clone, Debug)]
pub struct ShellSpec {
    pub scale: i32,
    pub c0: i32,
    pub big_m: f64,
    pub l: usize,
}

fn block_norm2(b: &[i64]) -> i128 {
    b.iter().map(|&c| (c as i128) * (c as i128)).sum()
}

fn in_ring(p: &[i64], scale: i32, c0: i32) -> bool {
    let r2 = block_norm2(p) as f64;
    let lo = 2f64.powi(scale - c0);
    let hi = 2f64.powi(scale + c0);
    r2 >= lo * lo && r2 <= hi * hi
}

/// Non-increasing block order, ties in |k_i| broken by the block itself.
pub fn is_ordered(p: &[i64], n: usize) -> bool {
    let m = p.len() / n;
    (1..m).all(|i| {
        let a = &p[(i - 1) * n..i * n];
        let b = &p[i * n..(i + 1) * n];
        (block_norm2(a), a) >= (block_norm2(b), b)
    })
}

impl ShellSpec {
    pub fn contains(&self, p: &[i64], n: usize, ordered: bool) -> bool {
        let m = p.len() / n;
        if !in_ring(p, self.scale, self.c0) || (ordered && !is_ordered(p, n)) {
            return false;
        }
        let m2 = self.big_m * self.big_m;
        (0..m).all(|i| {
            let large = block_norm2(&p[i * n..(i + 1) * n]) as f64 >= m2;
            large == (i < self.l)
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundingBox {
    pub lo: i64,
    pub hi: i64,
}

impl BoundingBox {
    pub fn for_each(&self, dims: usize, mut f: impl FnMut(&[i64])) {
        if self.hi < self.lo {
            return;
        }
        let mut p = vec![self.lo; dims];
        loop {
            f(&p);
            let mut i = dims;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                if p[i] < self.hi {
                    p[i] += 1;
                    break;
                }
                p[i] = self.lo;
            }
        }
    }
}

pub fn shell_members(spec: &ShellSpec, n: usize, m: usize, bbox: BoundingBox, ordered: bool) -> Result<LatticeSet> {
    let mut set = LatticeSet::new(n, m)?;
    bbox.for_each(n * m, |p| {
        if spec.contains(p, n, ordered) {
            set.points.insert(p.to_vec());
        }
    });
    Ok(set)
}

/// Ring points (ordered or not) ignoring the large/small pattern.
pub fn shell_ring(scale: i32, c0: i32, n: usize, m: usize, bbox: BoundingBox, ordered: bool) -> Result<LatticeSet> {
    let mut set = LatticeSet::new(n, m)?;
    bbox.for_each(n * m, |p| {
        if in_ring(p, scale, c0) && (!ordered || is_ordered(p, n)) {
            set.points.insert(p.to_vec());
        }
    });
    Ok(set)
}

#[derive(Clone, Debug)]
pub struct ShellSplits {
    /// `splits[l-1]` holds the l-split of the ordered shell.
    pub splits: Vec<LatticeSet>,
    /// Ordered-shell points with every block below M.
    pub uncovered: LatticeSet,
}

pub fn shell_splits(scale: i32, c0: i32, big_m: f64, n: usize, m: usize, bbox: BoundingBox) -> Result<ShellSplits> {
    let ring = shell_ring(scale, c0, n, m, bbox, true)?;
    let mut splits = vec![LatticeSet::new(n, m)?; m];
    let mut uncovered = LatticeSet::new(n, m)?;
    for p in ring.iter() {
        let large = (0..m).take_while(|&i| block_norm2(&p[i * n..(i + 1) * n]) as f64 >= big_m * big_m).count();
        if large == 0 {
            uncovered.points.insert(p.clone());
        } else {
            splits[large - 1].points.insert(p.clone());
        }
    }
    Ok(ShellSplits { splits, uncovered })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LatticeSet {
        LatticeSet::from_points(1, 2, vec![vec![0, 0], vec![1, 0], vec![0, 1]]).unwrap()
    }

    #[test]
    fn projection_drop_first_axis() {
        let p = small().project_drop(&[0]).unwrap();
        assert_eq!(p, [vec![0], vec![1]].into_iter().collect());
        assert_eq!(small().project(&[0, 1]).unwrap(), *small().points());
        assert!(LatticeSet::new(1, 2).unwrap().project(&[0]).unwrap().is_empty());
        assert!(small().project(&[2]).is_err());
    }

    #[test]
    fn columns() {
        let c = small().column(&[(1, vec![0])]).unwrap();
        assert_eq!(c, [vec![0], vec![1]].into_iter().collect());
        assert!(small().column(&[(1, vec![7])]).unwrap().is_empty());
        let u = LatticeSet::from_points(1, 2, vec![vec![0, 5], vec![1, 5]]).unwrap();
        assert_eq!(u.column(&[(1, vec![5])]).unwrap().len(), 2);
    }

    #[test]
    fn split_small_example() {
        let s = split_columns(&small(), 3).unwrap();
        assert!((s.thresholds[0] - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.parts[0].points(), &[vec![0, 0], vec![1, 0]].into_iter().collect());
        assert_eq!(s.parts[1].points(), &[vec![0, 1]].into_iter().collect());
        assert!(s.certificates().iter().all(|c| c.holds()));
    }

    #[test]
    fn split_single_point_m3() {
        let u = LatticeSet::from_points(1, 3, vec![vec![0, 0, 0]]).unwrap();
        let s = split_columns(&u, 1).unwrap();
        assert_eq!(s.thresholds, vec![1.0, 1.0]);
        assert!(s.parts[0].is_empty() && s.parts[1].is_empty());
        assert_eq!(s.parts[2], u);
    }

    #[test]
    fn split_errors() {
        assert!(split_columns(&small(), 2).is_err());
        let u = LatticeSet::from_points(1, 1, vec![vec![0]]).unwrap();
        assert!(split_columns(&u, 1).is_err());
        let e = split_columns(&LatticeSet::new(1, 2).unwrap(), 1).unwrap();
        assert!(e.parts.iter().all(|p| p.is_empty()));
    }

    #[test]
    fn exactness_guard_at_integer_threshold() {
        // N = 4, m = 2: N_1 = 2 exactly, a column of 2 must not be promoted.
        assert!(!exceeds(2, 2.0000000000000004));
        assert!(exceeds(3, 1.9999999999999998));
        assert!(exceeds(2, 1.7320508075688772));
    }

    #[test]
    fn level_set_example() {
        let mut b = CoeffMap::new(1, 2);
        b.coeffs.insert(vec![0, 0], Complex64::new(1.0, 0.0));
        b.coeffs.insert(vec![0, 1], Complex64::new(0.6, 0.0));
        b.coeffs.insert(vec![1, 0], Complex64::new(0.4, 0.0));
        let part = level_sets(&b, 1.0, 2.0, None).unwrap();
        assert_eq!(part.classes[&1].points.len(), 2);
        assert_eq!(part.classes[&2].points.len(), 1);
        assert!((part.classes[&1].bound - 1.52 * 4.0).abs() < 1e-12);
        assert!(part.bands_hold(&b));
    }

    #[test]
    fn level_set_edge_cases() {
        let mut b = CoeffMap::new(1, 1);
        b.coeffs.insert(vec![0], Complex64::new(0.0, 2.0));
        assert_eq!(level_sets(&b, 2.0, 2.0, None).unwrap().classes[&1].points.len(), 1);
        assert!(level_sets(&b, 1.0, 2.0, None).is_err());
        let mut z = CoeffMap::new(1, 1);
        for i in 0..4 {
            z.coeffs.insert(vec![i], Complex64::new(0.0, 0.0));
        }
        let capped = level_sets(&z, 1.0, 2.0, Some(3)).unwrap();
        assert_eq!(capped.classes.len(), 1);
        assert_eq!(capped.classes[&3].points.len(), 4);
        assert_eq!(level_sets(&z, 1.0, 2.0, None).unwrap().unclassified, 4);
    }

    #[test]
    fn shell_example_point() {
        let c0m = 2.0 * 1.1;
        let spec = ShellSpec { scale: 3, c0: 2, big_m: c0m, l: 1 };
        assert!(spec.contains(&[8, 1], 1, true));
        let zero = ShellSpec { scale: 3, c0: 2, big_m: c0m, l: 0 };
        assert!(!zero.contains(&[0, 0], 1, false));
    }

    #[test]
    fn text_roundtrip() {
        let u = LatticeSet::from_points(2, 2, vec![vec![0, -1, 3, 4], vec![2, 2, 2, 2]]).unwrap();
        let t = u.to_text();
        assert!(t.starts_with("0,-1 3,4\n"));
        assert_eq!(LatticeSet::from_text(2, 2, &t).unwrap(), u);
        assert!(matches!(LatticeSet::from_text(1, 2, "0 1\n0\n"), Err(Error::Parse { line: 2, .. })));
    }
}

//! Separable analysis and synthesis of symbols sampled on dyadic boxes.
//!
//! On a box of spacing 2^{-R} the level-λ atom is the cascade vector of level
//! R-λ scaled by 2^{R/2} per axis, so the sampled atoms are exactly
//! orthonormal under the Riemann-sum inner product.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use super::daubechies::{Letter, MotherWavelets, CASCADE_LEVELS};
use crate::error::{invalid, Error, Result};

/// Samples on the cube of nodes (lo + i) 2^{-res}, 0 <= i < size, per axis.
#[derive(Clone, Debug)]
pub struct DyadicField {
    pub dim: usize,
    pub res: u32,
    pub lo: i64,
    pub size: usize,
    pub values: Vec<Complex64>,
}

impl DyadicField {
    pub fn zeros(dim: usize, res: u32, lo: i64, size: usize) -> Self {
        Self { dim, res, lo, size, values: vec![Complex64::new(0.0, 0.0); size.pow(dim as u32)] }
    }

    /// The cube [a, b)^dim at spacing 2^{-res}.
    pub fn cube(dim: usize, res: u32, a: f64, b: f64) -> Self {
        let s = 2f64.powi(res as i32);
        let lo = (a * s).round() as i64;
        let hi = (b * s).round() as i64;
        Self::zeros(dim, res, lo, (hi - lo).max(0) as usize)
    }

    pub fn spacing(&self) -> f64 {
        2f64.powi(-(self.res as i32))
    }

    pub fn node(&self, i: usize) -> f64 {
        (self.lo + i as i64) as f64 * self.spacing()
    }

    pub fn fill(&mut self, f: impl Fn(&[f64]) -> Complex64 + Sync) {
        let (dim, size) = (self.dim, self.size);
        let nodes: Vec<f64> = (0..size).map(|i| self.node(i)).collect();
        self.values.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let mut x = vec![0.0; dim];
            let mut rem = idx;
            for d in (0..dim).rev() {
                x[d] = nodes[rem % size];
                rem /= size;
            }
            *v = f(&x);
        });
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spacing().powi(self.dim as i32)).sqrt()
    }

    pub fn same_layout(&self, other: &DyadicField) -> bool {
        self.dim == other.dim && self.res == other.res && self.lo == other.lo && self.size == other.size
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomIndex {
    pub lambda: u32,
    pub letters: Vec<Letter>,
    pub k: Vec<i64>,
}

impl AtomIndex {
    pub fn letter_string(&self) -> String {
        self.letters.iter().map(|l| l.as_char()).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CoefficientTable {
    pub entries: BTreeMap<AtomIndex, Complex64>,
    /// Free-form description of the analyzed symbol.
    pub source: String,
}

impl CoefficientTable {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn level(&self, lambda: u32) -> impl Iterator<Item = (&AtomIndex, &Complex64)> {
        self.entries.iter().filter(move |(i, _)| i.lambda == lambda)
    }

    pub fn max_level(&self) -> Option<u32> {
        self.entries.keys().map(|i| i.lambda).max()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,G,k,re,im\n");
        for (idx, v) in &self.entries {
            let k: Vec<String> = idx.k.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "{},{},{},{:?},{:?}", idx.lambda, idx.letter_string(), k.join(" "), v.re, v.im);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut table = CoefficientTable::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(perr("expected 5 columns".into()));
            }
            let lambda = cols[0].parse().map_err(|e| perr(format!("lambda: {e}")))?;
            let letters = cols[1]
                .chars()
                .map(|c| Letter::parse(c).ok_or_else(|| perr(format!("bad letter `{c}`"))))
                .collect::<Result<Vec<_>>>()?;
            let k = cols[2]
                .split_whitespace()
                .map(|c| c.parse::<i64>().map_err(|e| perr(format!("k: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let re: f64 = cols[3].parse().map_err(|e| perr(format!("re: {e}")))?;
            let im: f64 = cols[4].parse().map_err(|e| perr(format!("im: {e}")))?;
            table.entries.insert(AtomIndex { lambda, letters, k }, Complex64::new(re, im));
        }
        Ok(table)
    }
}

/// (ℓ^∞, ℓ^q) norms of the level-λ coefficients.
pub fn coeff_norms(table: &CoefficientTable, lambda: u32, q: f64) -> (f64, f64) {
    let mut sup: f64 = 0.0;
    let mut sum = 0.0;
    for (_, v) in table.level(lambda) {
        let a = v.norm();
        sup = sup.max(a);
        sum += a.powf(q);
    }
    (sup, sum.powf(1.0 / q))
}

/// Letter tuples used at level λ; the all-F tuple only at λ = 0.
pub fn letter_sets(dim: usize, lambda: u32) -> Vec<Vec<Letter>> {
    (0..1usize << dim)
        .map(|bits| (0..dim).map(|d| if bits >> (dim - 1 - d) & 1 == 1 { Letter::M } else { Letter::F }).collect::<Vec<_>>())
        .filter(|ls| lambda == 0 || ls.iter().any(|&l| l == Letter::M))
        .collect()
}

/// Rows of one axis operator: row t is the level-(res-λ) cascade vector of
/// translate k0 + t, restricted to the box.
struct AxisOp<'a> {
    coeffs: &'a [f64],
    step: i64,
    k0: i64,
    nk: usize,
    lo: i64,
    size: usize,
    scale: f64,
}

impl<'a> AxisOp<'a> {
    fn new(w: &'a MotherWavelets, letter: Letter, res: u32, lambda: u32, lo: i64, size: usize) -> Self {
        let level = res - lambda;
        let coeffs = w.coeffs(letter, level);
        let step = 1i64 << level;
        let len = coeffs.len() as i64;
        let hi = lo + size as i64 - 1;
        let k0 = (lo - len + 1).div_euclid(step) + i64::from((lo - len + 1).rem_euclid(step) != 0);
        let k1 = hi.div_euclid(step);
        let nk = (k1 - k0 + 1).max(0) as usize;
        Self { coeffs, step, k0, nk, lo, size, scale: 2f64.powf(-(res as f64) / 2.0) }
    }

    /// Box-relative index range and coefficient offset of row t.
    fn row(&self, t: usize) -> (usize, usize, usize) {
        let start = (self.k0 + t as i64) * self.step;
        let a = start.max(self.lo);
        let b = (start + self.coeffs.len() as i64).min(self.lo + self.size as i64);
        if b <= a {
            return (0, 0, 0);
        }
        ((a - self.lo) as usize, (b - self.lo) as usize, (a - start) as usize)
    }
}

#[derive(Clone)]
struct Tensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

fn contract(t: &Tensor, axis: usize, op: &AxisOp) -> Tensor {
    let outer: usize = t.dims[..axis].iter().product();
    let inner: usize = t.dims[axis + 1..].iter().product();
    let n_in = t.dims[axis];
    let mut dims = t.dims.clone();
    dims[axis] = op.nk;
    let mut data = vec![Complex64::new(0.0, 0.0); outer * op.nk * inner];
    for o in 0..outer {
        for k in 0..op.nk {
            let (a, b, off) = op.row(k);
            let dst = &mut data[(o * op.nk + k) * inner..(o * op.nk + k + 1) * inner];
            for p in a..b {
                let w = op.coeffs[off + p - a] * op.scale;
                let src = &t.data[(o * n_in + p) * inner..(o * n_in + p + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * w;
                }
            }
        }
    }
    Tensor { dims, data }
}

fn expand(t: &Tensor, axis: usize, op: &AxisOp) -> Tensor {
    let outer: usize = t.dims[..axis].iter().product();
    let inner: usize = t.dims[axis + 1..].iter().product();
    let mut dims = t.dims.clone();
    dims[axis] = op.size;
    let mut data = vec![Complex64::new(0.0, 0.0); outer * op.size * inner];
    for o in 0..outer {
        for k in 0..op.nk {
            let (a, b, off) = op.row(k);
            let src = &t.data[(o * op.nk + k) * inner..(o * op.nk + k + 1) * inner];
            if src.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                continue;
            }
            for p in a..b {
                let w = op.coeffs[off + p - a] / op.scale;
                let dst = &mut data[(o * op.size + p) * inner..(o * op.size + p + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * w;
                }
            }
        }
    }
    Tensor { dims, data }
}

fn check_levels(res: u32, lambda_max: u32) -> Result<()> {
    if res < lambda_max + 3 {
        return Err(Error::Resolution(format!(
            "spacing 2^-{res} does not resolve level {lambda_max} (need 2^-{})",
            lambda_max + 3
        )));
    }
    if res > CASCADE_LEVELS {
        return Err(Error::Resolution(format!("spacing 2^-{res} is finer than the cascade (2^-{CASCADE_LEVELS})")));
    }
    Ok(())
}

fn analyze_level(f: &DyadicField, w: &MotherWavelets, lambda: u32) -> Vec<(AtomIndex, Complex64)> {
    let ops: Vec<AxisOp> = [Letter::F, Letter::M].iter().map(|&l| AxisOp::new(w, l, f.res, lambda, f.lo, f.size)).collect();
    let base = Tensor { dims: vec![f.size; f.dim], data: f.values.clone() };
    let mut out = Vec::new();
    let mut stack: Vec<(Tensor, Vec<Letter>)> = vec![(base, Vec::new())];
    while let Some((t, letters)) = stack.pop() {
        let axis = letters.len();
        if axis == f.dim {
            if lambda > 0 && letters.iter().all(|&l| l == Letter::F) {
                continue;
            }
            let k0: Vec<i64> = letters.iter().map(|&l| ops[l as usize].k0).collect();
            for (idx, v) in t.data.iter().enumerate() {
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let mut k = vec![0i64; f.dim];
                let mut rem = idx;
                for d in (0..f.dim).rev() {
                    k[d] = k0[d] + (rem % t.dims[d]) as i64;
                    rem /= t.dims[d];
                }
                out.push((AtomIndex { lambda, letters: letters.clone(), k }, *v));
            }
            continue;
        }
        for letter in [Letter::M, Letter::F] {
            let next = contract(&t, axis, &ops[letter as usize]);
            let mut ls = letters.clone();
            ls.push(letter);
            stack.push((next, ls));
        }
    }
    out
}

/// Wavelet coefficients b = Σ F Ψ Δ^dim for every level up to λ_max and
/// every atom whose support meets the box.
pub fn analyze(f: &DyadicField, w: &MotherWavelets, lambda_max: u32) -> Result<CoefficientTable> {
    check_levels(f.res, lambda_max)?;
    let levels: Vec<Vec<(AtomIndex, Complex64)>> = (0..=lambda_max).into_par_iter().map(|l| analyze_level(f, w, l)).collect();
    let mut table = CoefficientTable::default();
    for level in levels {
        table.entries.extend(level);
    }
    Ok(table)
}

/// Σ b Ψ over the table, sampled on the layout of `like`.
pub fn synthesize(table: &CoefficientTable, w: &MotherWavelets, like: &DyadicField) -> Result<DyadicField> {
    let mut out = DyadicField::zeros(like.dim, like.res, like.lo, like.size);
    if let Some(lmax) = table.max_level() {
        check_levels(like.res, lmax)?;
    }
    let mut groups: BTreeMap<(u32, Vec<Letter>), Vec<(&Vec<i64>, Complex64)>> = BTreeMap::new();
    for (idx, v) in &table.entries {
        if idx.letters.len() != like.dim || idx.k.len() != like.dim {
            return invalid("coefficient dimension does not match the target box");
        }
        groups.entry((idx.lambda, idx.letters.clone())).or_default().push((&idx.k, *v));
    }
    let pieces: Vec<Vec<Complex64>> = groups
        .par_iter()
        .map(|((lambda, letters), entries)| {
            let ops: Vec<AxisOp> = letters.iter().map(|&l| AxisOp::new(w, l, like.res, *lambda, like.lo, like.size)).collect();
            let dims: Vec<usize> = ops.iter().map(|o| o.nk).collect();
            let mut t = Tensor { data: vec![Complex64::new(0.0, 0.0); dims.iter().product()], dims };
            for (k, v) in entries {
                let mut flat = 0usize;
                let mut inside = true;
                for d in 0..like.dim {
                    let off = k[d] - ops[d].k0;
                    if off < 0 || off as usize >= ops[d].nk {
                        inside = false;
                        break;
                    }
                    flat = flat * ops[d].nk + off as usize;
                }
                if inside {
                    t.data[flat] += v;
                }
            }
            for (d, op) in ops.iter().enumerate() {
                t = expand(&t, d, op);
            }
            t.data
        })
        .collect();
    for piece in pieces {
        for (o, p) in out.values.iter_mut().zip(piece) {
            *o += p;
        }
    }
    Ok(out)
}

/// Samples of one product atom on the layout of `like`.
pub fn eval_atom_box(w: &MotherWavelets, idx: &AtomIndex, like: &DyadicField) -> Result<DyadicField> {
    let mut table = CoefficientTable::default();
    table.entries.insert(idx.clone(), Complex64::new(1.0, 0.0));
    synthesize(&table, w, like)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav(m: usize) -> MotherWavelets {
        MotherWavelets::build(m).unwrap()
    }

    #[test]
    fn single_atom_is_recovered() {
        let w = wav(2);
        let like = DyadicField::cube(2, 6, -2.0, 2.0);
        let idx = AtomIndex { lambda: 2, letters: vec![Letter::M, Letter::F], k: vec![-3, 1] };
        let f = eval_atom_box(&w, &idx, &like).unwrap();
        assert!((f.l2_norm() - 1.0).abs() < 1e-10);
        let table = analyze(&f, &w, 3).unwrap();
        for (i, v) in &table.entries {
            if *i == idx {
                assert!((v - 1.0).norm() < 1e-10);
            } else {
                assert!(v.norm() <= 1e-4, "{i:?}: {v}");
            }
        }
    }

    #[test]
    fn zero_symbol_gives_empty_table() {
        let w = wav(1);
        let f = DyadicField::cube(1, 5, -1.0, 1.0);
        assert!(analyze(&f, &w, 2).unwrap().is_empty());
        let s = synthesize(&CoefficientTable::default(), &w, &f).unwrap();
        assert!(s.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn resolution_is_enforced() {
        let w = wav(1);
        let f = DyadicField::cube(1, 4, -1.0, 1.0);
        assert!(matches!(analyze(&f, &w, 2), Err(Error::Resolution(_))));
    }

    #[test]
    fn projection_is_idempotent() {
        let w = wav(3);
        let mut f = DyadicField::cube(1, 8, -2.0, 2.0);
        f.fill(|x| Complex64::new((-(x[0] * 3.0).powi(2)).exp(), x[0].sin() * (-(x[0] * 2.0).powi(2)).exp()));
        let table = analyze(&f, &w, 5).unwrap();
        let back = synthesize(&table, &w, &f).unwrap();
        let again = analyze(&back, &w, 5).unwrap();
        let c0 = w.c0();
        for (i, v) in &table.entries {
            let s = 2f64.powi(-(i.lambda as i32));
            if i.k[0] as f64 * s < -2.0 || (i.k[0] as f64 + c0) * s > 2.0 {
                continue;
            }
            let u = again.entries.get(i).copied().unwrap_or_default();
            assert!((u - v).norm() < 1e-10, "{i:?}");
        }
        let err: f64 = back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = f.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-3, "{}", err / norm);
    }

    #[test]
    fn norms_and_csv() {
        let mut t = CoefficientTable::default();
        t.entries.insert(AtomIndex { lambda: 1, letters: vec![Letter::M], k: vec![0] }, Complex64::new(3.0, 0.0));
        t.entries.insert(AtomIndex { lambda: 1, letters: vec![Letter::M], k: vec![1] }, Complex64::new(0.0, 4.0));
        assert_eq!(coeff_norms(&t, 1, 2.0), (4.0, 5.0));
        assert_eq!(coeff_norms(&t, 0, 2.0), (0.0, 0.0));
        let back = CoefficientTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.entries, t.entries);
    }

    #[test]
    fn letter_sets_exclude_all_father_above_zero() {
        assert_eq!(letter_sets(2, 0).len(), 4);
        assert_eq!(letter_sets(2, 1).len(), 3);
        assert_eq!(letter_sets(3, 2).len(), 7);
    }
}

//! m-linear multiplier operators on a one-dimensional periodic grid.
//!
//! T_σ(f_1..f_m)(x) = G^{-m/2} Σ σ(ξ_1..ξ_m) Π f̂_j(ξ_j) e^{2πi x Σξ_j}
//! with unitary f̂_j. Total frequencies wrap mod G, which is exact at the
//! nodes because G x_i / L is an integer.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::{dft_in_place, idft_in_place, parse_grid_text, GridFunction, TorusGrid};
use crate::lattice::CoeffMap;
use crate::wavelet::{AtomFamily, Letter};

pub const MAX_DEGREE: usize = 3;

/// Largest G for dense evaluation at degree m.
pub fn dense_budget(m: usize) -> usize {
    match m {
        1 => 1 << 16,
        2 => 256,
        _ => 64,
    }
}

/// Largest G for atom-sum evaluation at degree m.
pub fn atomsum_budget(m: usize) -> usize {
    match m {
        1 => 1 << 16,
        2 => 1024,
        _ => 256,
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn check_engine_grid(grid: &TorusGrid, m: usize) -> Result<()> {
    if grid.dim != 1 {
        return invalid(format!("operators are evaluated for n = 1 only, got n = {}", grid.dim));
    }
    if m == 0 || m > MAX_DEGREE {
        return invalid(format!("degree m = {m} outside 1..={MAX_DEGREE}"));
    }
    Ok(())
}

fn check_inputs(grid: &TorusGrid, m: usize, inputs: &[&GridFunction]) -> Result<()> {
    if inputs.len() != m {
        return invalid(format!("{} inputs for an operator of degree {m}", inputs.len()));
    }
    for f in inputs {
        if !f.grid.same_as(grid) {
            return invalid("input grid does not match the operator grid");
        }
    }
    Ok(())
}

fn spectra(inputs: &[&GridFunction]) -> Vec<Vec<Complex64>> {
    inputs
        .iter()
        .map(|f| {
            let mut v = f.values.clone();
            dft_in_place(&f.grid, &mut v);
            v
        })
        .collect()
}

/// σ sampled on the product frequency lattice, row-major in (ξ_1..ξ_m).
#[derive(Clone, Debug)]
pub struct DenseSymbol {
    pub grid: TorusGrid,
    pub m: usize,
    pub values: Vec<Complex64>,
    pub sup: f64,
}

impl DenseSymbol {
    pub fn new(grid: TorusGrid, m: usize, values: Vec<Complex64>) -> Result<Self> {
        check_engine_grid(&grid, m)?;
        if values.len() != grid.g.pow(m as u32) {
            return invalid("symbol length must be G^m");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("symbol has non-finite samples".into()));
        }
        let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self { grid, m, values, sup })
    }

    pub fn from_fn(grid: TorusGrid, m: usize, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        check_engine_grid(&grid, m)?;
        let g = grid.g;
        let values = (0..g.pow(m as u32))
            .map(|idx| {
                let mut xi = vec![0.0; m];
                let mut rem = idx;
                for j in (0..m).rev() {
                    xi[j] = grid.freq(rem % g);
                    rem /= g;
                }
                f(&xi)
            })
            .collect();
        Self::new(grid, m, values)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {} {:?}\n", self.grid.dim, self.m, self.grid.g, self.grid.period);
        for v in &self.values {
            s.push_str(&format!("{:?} {:?}\n", v.re, v.im));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header_m = text.split_whitespace().nth(1).and_then(|t| t.parse::<u32>().ok()).unwrap_or(1);
        let (grid, m, values) = parse_grid_text(text, |g| g.g.pow(header_m))?;
        Self::new(grid, m, values)
    }
}

/// σ = Σ_k b_k Π_j atom(λ, letter_j, k_j).
#[derive(Clone, Debug)]
pub struct AtomSymbol {
    pub lambda: u32,
    pub family: AtomFamily,
    /// One letter per block; ignored for bump atoms.
    pub letters: Vec<Letter>,
    pub coeffs: CoeffMap,
}

impl AtomSymbol {
    pub fn new(lambda: u32, family: AtomFamily, letters: Vec<Letter>, coeffs: CoeffMap) -> Result<Self> {
        if coeffs.n != 1 {
            return invalid("atom symbols are built for n = 1");
        }
        if coeffs.m == 0 || coeffs.m > MAX_DEGREE {
            return invalid(format!("degree m = {} outside 1..={MAX_DEGREE}", coeffs.m));
        }
        if letters.len() != coeffs.m {
            return invalid("one letter per block is required");
        }
        if lambda >= 1 && matches!(family, AtomFamily::Wavelet(_)) && letters.iter().all(|&l| l == Letter::F) {
            return invalid("all-F letters are only admissible at level 0");
        }
        Ok(Self { lambda, family, letters, coeffs })
    }

    pub fn bump(lambda: u32, family: AtomFamily, coeffs: CoeffMap) -> Result<Self> {
        let m = coeffs.m;
        Self::new(lambda, family, vec![Letter::F; m], coeffs)
    }

    pub fn m(&self) -> usize {
        self.coeffs.m
    }

    /// Scales every coefficient by t.
    pub fn scaled(&self, t: f64) -> Self {
        let mut s = self.clone();
        for v in s.coeffs.coeffs.values_mut() {
            *v *= t;
        }
        s
    }

    fn lines(&self, grid: &TorusGrid) -> Result<BTreeMap<(usize, i64), Vec<f64>>> {
        self.family.check_resolution(grid, self.lambda)?;
        let half = grid.g as f64 / (2.0 * grid.period);
        let mut lines = BTreeMap::new();
        for k in self.coeffs.coeffs.keys() {
            for (j, &kj) in k.iter().enumerate() {
                if lines.contains_key(&(j, kj)) {
                    continue;
                }
                let (lo, hi) = self.family.support_1d(self.lambda, kj);
                if lo < -half || hi > half {
                    log::debug!("atom {kj} on axis {j} reaches beyond the frequency window ±{half}");
                }
                lines.insert((j, kj), self.family.atom_line(grid, self.letters[j], self.lambda, kj));
            }
        }
        Ok(lines)
    }

    /// Dense samples of the synthesized symbol.
    pub fn to_dense(&self, grid: &TorusGrid) -> Result<DenseSymbol> {
        let m = self.m();
        check_engine_grid(grid, m)?;
        if grid.g > dense_budget(m) {
            return Err(Error::Resource(format!("G = {} exceeds the dense budget {} for m = {m}", grid.g, dense_budget(m))));
        }
        let lines = self.lines(grid)?;
        let g = grid.g;
        let mut values = vec![zero(); g.pow(m as u32)];
        for (k, b) in &self.coeffs.coeffs {
            let supp: Vec<Vec<(usize, f64)>> = k
                .iter()
                .enumerate()
                .map(|(j, kj)| lines[&(j, *kj)].iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(a, v)| (a, *v)).collect())
                .collect();
            let mut idx = vec![0usize; m];
            'outer: loop {
                let mut flat = 0;
                let mut w = 1.0;
                for j in 0..m {
                    if supp[j].is_empty() {
                        break 'outer;
                    }
                    let (a, v) = supp[j][idx[j]];
                    flat = flat * g + a;
                    w *= v;
                }
                values[flat] += b * w;
                let mut j = m;
                loop {
                    if j == 0 {
                        break 'outer;
                    }
                    j -= 1;
                    idx[j] += 1;
                    if idx[j] < supp[j].len() {
                        break;
                    }
                    idx[j] = 0;
                }
            }
        }
        DenseSymbol::new(*grid, m, values)
    }
}

pub fn apply_dense(sigma: &DenseSymbol, inputs: &[&GridFunction]) -> Result<GridFunction> {
    let grid = sigma.grid;
    let m = sigma.m;
    check_inputs(&grid, m, inputs)?;
    if grid.g > dense_budget(m) {
        return Err(Error::Resource(format!("G = {} exceeds the dense budget {} for m = {m}", grid.g, dense_budget(m))));
    }
    let f = spectra(inputs);
    let g = grid.g;
    let half = (g / 2) as i64;
    let block = g.pow(m as u32 - 1);
    // one private accumulator per leading frequency, merged in index order
    let partial: Vec<Vec<Complex64>> = (0..g)
        .into_par_iter()
        .map(|a1| {
            let mut c = vec![zero(); g];
            let f1 = f[0][a1];
            if f1.re == 0.0 && f1.im == 0.0 {
                return c;
            }
            let j1 = a1 as i64 - half;
            let row = &sigma.values[a1 * block..(a1 + 1) * block];
            match m {
                1 => c[a1] += row[0] * f1,
                2 => {
                    for a2 in 0..g {
                        let s = grid.wrap(j1 + a2 as i64 - half);
                        c[s] += row[a2] * f1 * f[1][a2];
                    }
                }
                _ => {
                    for a2 in 0..g {
                        let p = f1 * f[1][a2];
                        let j12 = j1 + a2 as i64 - half;
                        for a3 in 0..g {
                            let s = grid.wrap(j12 + a3 as i64 - half);
                            c[s] += row[a2 * g + a3] * p * f[2][a3];
                        }
                    }
                }
            }
            c
        })
        .collect();
    let mut c = vec![zero(); g];
    for p in partial {
        for (a, v) in c.iter_mut().zip(p) {
            *a += v;
        }
    }
    let scale = (g as f64).powf(-((m - 1) as f64) / 2.0);
    for v in &mut c {
        *v *= scale;
    }
    idft_in_place(&grid, &mut c);
    GridFunction::new(grid, c)
}

/// Frequency-side multiplication by ω^λ_k(2^{-γ} ·) followed by inversion.
pub fn atom_project(
    f: &GridFunction,
    family: &AtomFamily,
    lambda: u32,
    letter: Letter,
    k: i64,
    gamma: Option<i32>,
) -> Result<GridFunction> {
    check_engine_grid(&f.grid, 1)?;
    let grid = f.grid;
    let gamma = gamma.unwrap_or(0);
    let spacing = 1.0 / grid.period;
    if spacing > 2f64.powi(gamma - lambda as i32) / 8.0 * (1.0 + 1e-12) {
        return Err(Error::Resolution(format!("frequency spacing {spacing} does not resolve level {lambda} at dilation {gamma}")));
    }
    let s = 2f64.powi(-gamma);
    let res = crate::wavelet::dyadic_res(spacing).map(|r| r + gamma);
    let mut v = f.values.clone();
    dft_in_place(&grid, &mut v);
    for (a, x) in v.iter_mut().enumerate() {
        *x *= family.value_1d(letter, lambda, k, grid.freq(a) * s, res);
    }
    idft_in_place(&grid, &mut v);
    GridFunction::new(grid, v)
}

fn project_lines(lines: &BTreeMap<(usize, i64), Vec<f64>>, spectra: &[Vec<Complex64>], grid: &TorusGrid) -> BTreeMap<(usize, i64), Vec<Complex64>> {
    lines
        .iter()
        .map(|(&(j, k), line)| {
            let mut v: Vec<Complex64> = spectra[j].iter().zip(line).map(|(f, a)| f * a).collect();
            idft_in_place(grid, &mut v);
            ((j, k), v)
        })
        .collect()
}

const CHUNKS: usize = 32;

pub fn apply_atomsum(sigma: &AtomSymbol, inputs: &[&GridFunction]) -> Result<GridFunction> {
    let grid = inputs.first().map(|f| f.grid).ok_or_else(|| Error::InvalidArgument("no inputs".into()))?;
    AtomSumOperator::new(sigma.clone(), grid)?.apply(inputs)
}

/// An m-linear operator on grid functions.
pub trait MultilinearOperator: Sync {
    fn degree(&self) -> usize;
    fn grid(&self) -> TorusGrid;
    fn apply(&self, inputs: &[&GridFunction]) -> Result<GridFunction>;
    /// The linear map f ↦ T(.., f at `slot`, ..) with the other inputs fixed.
    fn freeze(&self, slot: usize, inputs: &[&GridFunction]) -> Result<Box<dyn LinearSlice + '_>>;
}

/// A linear map on sample vectors with its adjoint for the plain inner
/// product Σ u conj(v).
pub trait LinearSlice: Sync {
    fn apply(&self, f: &[Complex64]) -> Vec<Complex64>;
    fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64>;
}

pub struct DenseOperator {
    pub symbol: DenseSymbol,
}

impl DenseOperator {
    pub fn new(symbol: DenseSymbol) -> Result<Self> {
        if symbol.grid.g > dense_budget(symbol.m) {
            return Err(Error::Resource(format!("G = {} exceeds the dense budget for m = {}", symbol.grid.g, symbol.m)));
        }
        Ok(Self { symbol })
    }
}

struct MatrixSlice {
    grid: TorusGrid,
    /// mat[s * G + a]: output frequency s from input frequency a.
    mat: Vec<Complex64>,
}

impl LinearSlice for MatrixSlice {
    fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid.g;
        let mut spec = f.to_vec();
        dft_in_place(&self.grid, &mut spec);
        let mut out: Vec<Complex64> =
            (0..g).map(|s| self.mat[s * g..(s + 1) * g].iter().zip(&spec).map(|(m, x)| m * x).sum()).collect();
        idft_in_place(&self.grid, &mut out);
        out
    }

    fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid.g;
        let mut spec = w.to_vec();
        dft_in_place(&self.grid, &mut spec);
        let mut out = vec![zero(); g];
        for s in 0..g {
            let ws = spec[s];
            for (o, m) in out.iter_mut().zip(&self.mat[s * g..(s + 1) * g]) {
                *o += m.conj() * ws;
            }
        }
        idft_in_place(&self.grid, &mut out);
        out
    }
}

impl MultilinearOperator for DenseOperator {
    fn degree(&self) -> usize {
        self.symbol.m
    }
    fn grid(&self) -> TorusGrid {
        self.symbol.grid
    }
    fn apply(&self, inputs: &[&GridFunction]) -> Result<GridFunction> {
        apply_dense(&self.symbol, inputs)
    }
    fn freeze(&self, slot: usize, inputs: &[&GridFunction]) -> Result<Box<dyn LinearSlice + '_>> {
        let grid = self.symbol.grid;
        let m = self.symbol.m;
        check_inputs(&grid, m, inputs)?;
        if slot >= m {
            return invalid(format!("slot {slot} out of range"));
        }
        let f = spectra(inputs);
        let g = grid.g;
        let half = (g / 2) as i64;
        let scale = (g as f64).powf(-((m - 1) as f64) / 2.0);
        let mut mat = vec![zero(); g * g];
        for idx in 0..g.pow(m as u32) {
            let mut rem = idx;
            let mut a = [0usize; MAX_DEGREE];
            for j in (0..m).rev() {
                a[j] = rem % g;
                rem /= g;
            }
            let mut w = self.symbol.values[idx] * scale;
            let mut total = 0i64;
            for j in 0..m {
                total += a[j] as i64 - half;
                if j != slot {
                    w *= f[j][a[j]];
                }
            }
            mat[grid.wrap(total) * g + a[slot]] += w;
        }
        Ok(Box::new(MatrixSlice { grid, mat }))
    }
}

pub struct AtomSumOperator {
    pub symbol: AtomSymbol,
    grid: TorusGrid,
    lines: BTreeMap<(usize, i64), Vec<f64>>,
    terms: Vec<(Vec<i64>, Complex64)>,
}

impl AtomSumOperator {
    pub fn new(symbol: AtomSymbol, grid: TorusGrid) -> Result<Self> {
        let m = symbol.m();
        check_engine_grid(&grid, m)?;
        if grid.g > atomsum_budget(m) {
            return Err(Error::Resource(format!("G = {} exceeds the atom-sum budget {} for m = {m}", grid.g, atomsum_budget(m))));
        }
        let lines = symbol.lines(&grid)?;
        let terms = symbol.coeffs.coeffs.iter().map(|(k, b)| (k.clone(), *b)).collect();
        Ok(Self { symbol, grid, lines, terms })
    }
}

fn chunk_ranges(len: usize) -> Vec<std::ops::Range<usize>> {
    let size = len.div_ceil(CHUNKS).max(1);
    (0..len).step_by(size).map(|s| s..(s + size).min(len)).collect()
}

fn merge(parts: Vec<Vec<Complex64>>, g: usize) -> Vec<Complex64> {
    let mut out = vec![zero(); g];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

impl MultilinearOperator for AtomSumOperator {
    fn degree(&self) -> usize {
        self.symbol.m()
    }
    fn grid(&self) -> TorusGrid {
        self.grid
    }
    fn apply(&self, inputs: &[&GridFunction]) -> Result<GridFunction> {
        check_inputs(&self.grid, self.degree(), inputs)?;
        let proj = project_lines(&self.lines, &spectra(inputs), &self.grid);
        let g = self.grid.g;
        let parts: Vec<Vec<Complex64>> = chunk_ranges(self.terms.len())
            .into_par_iter()
            .map(|r| {
                let mut acc = vec![zero(); g];
                let mut prod = vec![zero(); g];
                for (k, b) in &self.terms[r] {
                    prod.iter_mut().for_each(|p| *p = *b);
                    for (j, kj) in k.iter().enumerate() {
                        for (p, v) in prod.iter_mut().zip(&proj[&(j, *kj)]) {
                            *p *= v;
                        }
                    }
                    for (a, p) in acc.iter_mut().zip(&prod) {
                        *a += p;
                    }
                }
                acc
            })
            .collect();
        GridFunction::new(self.grid, merge(parts, g))
    }

    fn freeze(&self, slot: usize, inputs: &[&GridFunction]) -> Result<Box<dyn LinearSlice + '_>> {
        check_inputs(&self.grid, self.degree(), inputs)?;
        if slot >= self.degree() {
            return invalid(format!("slot {slot} out of range"));
        }
        let proj = project_lines(&self.lines, &spectra(inputs), &self.grid);
        let g = self.grid.g;
        let mut h: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
        for (k, b) in &self.terms {
            let acc = h.entry(k[slot]).or_insert_with(|| vec![zero(); g]);
            let mut prod = vec![*b; g];
            for (j, kj) in k.iter().enumerate() {
                if j != slot {
                    for (p, v) in prod.iter_mut().zip(&proj[&(j, *kj)]) {
                        *p *= v;
                    }
                }
            }
            for (a, p) in acc.iter_mut().zip(prod) {
                *a += p;
            }
        }
        let pieces = h.into_iter().map(|(kappa, hk)| (self.lines[&(slot, kappa)].clone(), hk)).collect();
        Ok(Box::new(AtomSlice { grid: self.grid, pieces }))
    }
}

/// f ↦ Σ_κ h_κ · P_κ f with P_κ the projection onto atom κ.
struct AtomSlice {
    grid: TorusGrid,
    pieces: Vec<(Vec<f64>, Vec<Complex64>)>,
}

impl LinearSlice for AtomSlice {
    fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid.g;
        let mut spec = f.to_vec();
        dft_in_place(&self.grid, &mut spec);
        let parts: Vec<Vec<Complex64>> = chunk_ranges(self.pieces.len())
            .into_par_iter()
            .map(|r| {
                let mut acc = vec![zero(); g];
                for (line, hk) in &self.pieces[r] {
                    let mut v: Vec<Complex64> = spec.iter().zip(line).map(|(x, a)| x * a).collect();
                    idft_in_place(&self.grid, &mut v);
                    for ((o, p), h) in acc.iter_mut().zip(v).zip(hk) {
                        *o += p * h;
                    }
                }
                acc
            })
            .collect();
        merge(parts, g)
    }

    fn adjoint(&self, w: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid.g;
        let parts: Vec<Vec<Complex64>> = chunk_ranges(self.pieces.len())
            .into_par_iter()
            .map(|r| {
                let mut acc = vec![zero(); g];
                for (line, hk) in &self.pieces[r] {
                    let mut v: Vec<Complex64> = w.iter().zip(hk).map(|(x, h)| x * h.conj()).collect();
                    dft_in_place(&self.grid, &mut v);
                    for (o, (x, a)) in acc.iter_mut().zip(v.iter().zip(line)) {
                        *o += x * a;
                    }
                }
                acc
            })
            .collect();
        let mut out = merge(parts, g);
        idft_in_place(&self.grid, &mut out);
        out
    }
}

//! Uniform periodic grids, the unitary transform between samples and
//! frequency coefficients, Riemann-sum norms and the plain-text grid format.
//!
//! Nodes are x_i = L(i/G - 1/2) and frequencies ξ_j = j/L for
//! j in [-G/2, G/2), stored at index j + G/2. Multi-dimensional data is
//! row-major with the last axis fastest.

use std::cell::RefCell;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    pub dim: usize,
    pub g: usize,
    pub period: f64,
}

impl TorusGrid {
    pub fn new(dim: usize, g: usize, period: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return invalid(format!("grid dimension {dim} not supported"));
        }
        if g < 2 || g % 2 != 0 {
            return invalid(format!("G = {g} must be even and at least 2"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return invalid("period must be positive");
        }
        Ok(Self { dim, g, period })
    }

    pub fn len(&self) -> usize {
        self.g.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.g as f64
    }

    /// Δx^dim, the Riemann-sum weight of one cell.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn node(&self, i: usize) -> f64 {
        self.period * (i as f64 / self.g as f64 - 0.5)
    }

    /// Signed frequency index of storage slot `a`.
    pub fn freq_index(&self, a: usize) -> i64 {
        a as i64 - (self.g / 2) as i64
    }

    pub fn freq(&self, a: usize) -> f64 {
        self.freq_index(a) as f64 / self.period
    }

    /// Storage slot of signed frequency index `j`, wrapped mod G.
    pub fn wrap(&self, j: i64) -> usize {
        (j + (self.g / 2) as i64).rem_euclid(self.g as i64) as usize
    }

    /// Multi-index of flat position `idx`.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for d in (0..self.dim).rev() {
            out[d] = idx % self.g;
            idx /= self.g;
        }
        out
    }

    pub fn same_as(&self, other: &TorusGrid) -> bool {
        self.dim == other.dim && self.g == other.g && (self.period - other.period).abs() <= 1e-12 * self.period
    }
}

#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

/// Frequency-side view: `values[a]` is the coefficient at frequency slot `a`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: TorusGrid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!("{} samples for a grid of {}", values.len(), grid.len()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let x: Vec<f64> = grid.unflatten(idx).into_iter().map(|i| grid.node(i)).collect();
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn l2_norm(&self) -> f64 {
        quasinorm(self, 2.0)
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn to_text(&self, m: usize) -> String {
        let mut s = format!("{} {} {} {}\n", self.grid.dim, m, self.grid.g, fmt_f64(self.grid.period));
        for v in &self.values {
            let _ = writeln!(s, "{} {}", fmt_f64(v.re), fmt_f64(v.im));
        }
        s
    }

    /// Parses the text format, returning the function and the header's m.
    pub fn from_text(text: &str) -> Result<(Self, usize)> {
        let (grid, m, values) = parse_grid_text(text, |grid| grid.len())?;
        Ok((Self { grid, values }, m))
    }
}

impl Spectrum {
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell()).sqrt()
    }
}

/// Shortest decimal that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn parse_grid_text(
    text: &str,
    expected_len: impl Fn(&TorusGrid) -> usize,
) -> Result<(TorusGrid, usize, Vec<Complex64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let perr = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 {
        return Err(perr(hl, "header must be `n m G L`".into()));
    }
    let n: usize = h[0].parse().map_err(|e| perr(hl, format!("n: {e}")))?;
    let m: usize = h[1].parse().map_err(|e| perr(hl, format!("m: {e}")))?;
    let g: usize = h[2].parse().map_err(|e| perr(hl, format!("G: {e}")))?;
    let period: f64 = h[3].parse().map_err(|e| perr(hl, format!("L: {e}")))?;
    let grid = TorusGrid::new(n, g, period).map_err(|e| perr(hl, e.to_string()))?;
    let want = expected_len(&grid);
    let mut values = Vec::with_capacity(want);
    for (i, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(perr(i, "expected `re im`".into()));
        }
        let re: f64 = parts[0].parse().map_err(|e| perr(i, format!("{e}")))?;
        let im: f64 = parts[1].parse().map_err(|e| perr(i, format!("{e}")))?;
        values.push(Complex64::new(re, im));
    }
    if values.len() != want {
        return Err(Error::Parse { line: text.lines().count(), msg: format!("{} samples, expected {want}", values.len()) });
    }
    Ok((grid, m, values))
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(g: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(g)
        } else {
            p.plan_fft_forward(g)
        }
    })
}

/// In-place centred unitary transform along every axis.
fn transform(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    let g = grid.g;
    let half = (g / 2) as i64;
    let fft = plan(g, inverse);
    let norm = 1.0 / (g as f64).sqrt();
    let sign = |j: i64| if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut line = vec![Complex64::new(0.0, 0.0); g];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim {
        let stride = g.pow((grid.dim - 1 - axis) as u32);
        let outer = grid.len() / (g * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * g * stride + s;
                if inverse {
                    // slot a holds frequency j = a - G/2; FFT position is j mod G
                    for a in 0..g {
                        let j = a as i64 - half;
                        line[j.rem_euclid(g as i64) as usize] = data[base + a * stride] * sign(j);
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..g {
                        data[base + i * stride] = line[i] * norm;
                    }
                } else {
                    for i in 0..g {
                        line[i] = data[base + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for a in 0..g {
                        let j = a as i64 - half;
                        data[base + a * stride] = line[j.rem_euclid(g as i64) as usize] * (sign(j) * norm);
                    }
                }
            }
        }
    }
}

pub fn dft(f: &GridFunction) -> Spectrum {
    let mut values = f.values.clone();
    transform(&f.grid, &mut values, false);
    Spectrum { grid: f.grid, values }
}

pub fn idft(s: &Spectrum) -> GridFunction {
    let mut values = s.values.clone();
    transform(&s.grid, &mut values, true);
    GridFunction { grid: s.grid, values }
}

pub(crate) fn dft_in_place(grid: &TorusGrid, data: &mut [Complex64]) {
    transform(grid, data, false)
}

pub(crate) fn idft_in_place(grid: &TorusGrid, data: &mut [Complex64]) {
    transform(grid, data, true)
}

/// (Σ|f|^p Δx^dim)^{1/p}.
pub fn quasinorm(f: &GridFunction, p: f64) -> f64 {
    pth_power(&f.values, p, f.grid.cell()).powf(1.0 / p)
}

pub(crate) fn pth_power(values: &[Complex64], p: f64, cell: f64) -> f64 {
    if p == 2.0 {
        values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
    } else {
        values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * cell
    }
}

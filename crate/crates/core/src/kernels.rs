//! Rough homogeneous kernels K = Ω(y/|y|)/|y|^d on R^d (d = mn), their
//! dyadic pieces K^γ_μ computed on the frequency side, and Hörmander-type
//! symbols with their Littlewood–Paley slices.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::grid::{dft_in_place, idft_in_place, GridFunction, Spectrum, TorusGrid};
use crate::lp::LPWindow;
use crate::wavelet::{analyze, coeff_norms, sobolev_norm, CoefficientTable, DyadicField, MotherWavelets};

const MEAN_TOL: f64 = 1e-10;
const CIRCLE_NODES: usize = 2048;
const POLAR_NODES: usize = 64;
const AZIMUTH_NODES: usize = 128;

/// Ω sampled on a quadrature of S^{d-1}: uniform angles for d = 2, a
/// midpoint polar × uniform azimuth product grid for d = 3.
#[derive(Clone, Debug)]
pub struct SphereFunction {
    pub mn: usize,
    pub q: f64,
    /// Angles per node: [θ] for d = 2, [θ, φ] for d = 3.
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    /// Trigonometric interpolant on the circle.
    modes: Vec<(i64, Complex64)>,
}

fn quadrature(mn: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    match mn {
        2 => {
            let h = 2.0 * PI / CIRCLE_NODES as f64;
            Ok(((0..CIRCLE_NODES).map(|i| vec![i as f64 * h]).collect(), vec![h; CIRCLE_NODES]))
        }
        3 => {
            let dt = PI / POLAR_NODES as f64;
            let dp = 2.0 * PI / AZIMUTH_NODES as f64;
            let mut nodes = Vec::with_capacity(POLAR_NODES * AZIMUTH_NODES);
            let mut weights = Vec::with_capacity(POLAR_NODES * AZIMUTH_NODES);
            for i in 0..POLAR_NODES {
                let t = (i as f64 + 0.5) * dt;
                for j in 0..AZIMUTH_NODES {
                    nodes.push(vec![t, j as f64 * dp]);
                    weights.push(t.sin() * dt * dp);
                }
            }
            Ok((nodes, weights))
        }
        _ => invalid(format!("sphere dimension mn = {mn} not supported (use 2 or 3)")),
    }
}

fn direction(angles: &[f64]) -> Vec<f64> {
    match angles.len() {
        1 => vec![angles[0].cos(), angles[0].sin()],
        _ => vec![angles[0].sin() * angles[1].cos(), angles[0].sin() * angles[1].sin(), angles[0].cos()],
    }
}

impl SphereFunction {
    pub fn from_fn(mn: usize, q: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let (nodes, _) = quadrature(mn)?;
        let values = nodes.iter().map(|a| f(&direction(a))).collect();
        Self::from_samples(mn, q, values)
    }

    pub fn from_samples(mn: usize, q: f64, values: Vec<f64>) -> Result<Self> {
        let (nodes, weights) = quadrature(mn)?;
        if values.len() != nodes.len() {
            return invalid(format!("{} samples for {} quadrature nodes", values.len(), nodes.len()));
        }
        if !(q >= 1.0) {
            return invalid("exponent q must be at least 1");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("Ω has non-finite samples".into()));
        }
        let mean: f64 = weights.iter().zip(&values).map(|(w, v)| w * v).sum();
        let scale: f64 = weights.iter().zip(&values).map(|(w, v)| w * v.abs()).sum::<f64>().max(1.0);
        if mean.abs() > MEAN_TOL * scale {
            return invalid(format!("Ω is not mean-zero: ∫Ω = {mean:e}"));
        }
        let modes = if mn == 2 { circle_modes(&values) } else { Vec::new() };
        Ok(Self { mn, q, nodes, weights, values, modes })
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn lq_norm(&self) -> f64 {
        self.weights.iter().zip(&self.values).map(|(w, v)| w * v.abs().powf(self.q)).sum::<f64>().powf(1.0 / self.q)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Ω at a unit vector: trigonometric interpolation on the circle,
    /// bilinear in (θ, φ) on the sphere.
    pub fn eval(&self, u: &[f64]) -> f64 {
        if self.mn == 2 {
            let z = Complex64::new(u[0], u[1]);
            let z = z / z.norm();
            return self.modes.iter().map(|(k, c)| (c * z.powi(*k as i32)).re).sum();
        }
        let theta = u[2].clamp(-1.0, 1.0).acos();
        let phi = u[1].atan2(u[0]).rem_euclid(2.0 * PI);
        let ti = (theta / (PI / POLAR_NODES as f64) - 0.5).clamp(0.0, (POLAR_NODES - 1) as f64);
        let pj = phi / (2.0 * PI / AZIMUTH_NODES as f64);
        let (i0, j0) = (ti.floor() as usize, pj.floor() as usize % AZIMUTH_NODES);
        let (ft, fp) = (ti - ti.floor(), pj - pj.floor());
        let i1 = (i0 + 1).min(POLAR_NODES - 1);
        let j1 = (j0 + 1) % AZIMUTH_NODES;
        let at = |i: usize, j: usize| self.values[i * AZIMUTH_NODES + j];
        (1.0 - ft) * ((1.0 - fp) * at(i0, j0) + fp * at(i0, j1)) + ft * ((1.0 - fp) * at(i1, j0) + fp * at(i1, j1))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {:?}\n", self.mn, self.q);
        for (a, v) in self.nodes.iter().zip(&self.values) {
            let angles: Vec<String> = a.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&format!("{} {v:?}\n", angles.join(" ")));
        }
        s
    }

    /// Reads the "mn q" header and one "angle(s) value" row per quadrature
    /// node, in quadrature order.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, msg: String| Error::Parse { line: line + 1, msg };
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 2 {
            return Err(perr(hl, "header must be `mn q`".into()));
        }
        let mn: usize = h[0].parse().map_err(|e| perr(hl, format!("mn: {e}")))?;
        let q: f64 = h[1].parse().map_err(|e| perr(hl, format!("q: {e}")))?;
        let (nodes, _) = quadrature(mn).map_err(|e| perr(hl, e.to_string()))?;
        let mut values = Vec::with_capacity(nodes.len());
        for (i, line) in lines {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != mn {
                return Err(perr(i, format!("expected {} angle(s) and a value", mn - 1)));
            }
            let idx = values.len();
            if idx >= nodes.len() {
                return Err(perr(i, "more rows than quadrature nodes".into()));
            }
            for (c, want) in cols[..mn - 1].iter().zip(&nodes[idx]) {
                let a: f64 = c.parse().map_err(|e| perr(i, format!("{e}")))?;
                if (a - want).abs() > 1e-9 {
                    return Err(perr(i, format!("angle {a} does not match node {want}")));
                }
            }
            values.push(cols[mn - 1].parse().map_err(|e| perr(i, format!("{e}")))?);
        }
        Self::from_samples(mn, q, values)
    }
}

fn circle_modes(values: &[f64]) -> Vec<(i64, Complex64)> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let max = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let half = (n / 2) as i64;
    (0..n)
        .filter(|&i| buf[i].norm() > 1e-14 * max)
        .map(|i| {
            let k = if (i as i64) < half { i as i64 } else { i as i64 - n as i64 };
            // the Nyquist mode is split evenly between ±n/2
            let c = buf[i] / n as f64;
            (k, if k == -half { c * 0.5 } else { c })
        })
        .flat_map(|(k, c)| if k == -half { vec![(k, c), (half, c)] } else { vec![(k, c)] })
        .collect()
}

/// K(y) = Ω(y/|y|) / |y|^d.
pub fn kernel_eval(omega: &SphereFunction, y: &[f64]) -> Result<f64> {
    if y.len() != omega.mn {
        return invalid(format!("point has {} coordinates, kernel lives in dimension {}", y.len(), omega.mn));
    }
    let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let u: Vec<f64> = y.iter().map(|v| v / r).collect();
    Ok(omega.eval(&u) / r.powi(omega.mn as i32))
}

fn for_each_node(grid: &TorusGrid, data: &mut [Complex64], f: impl Fn(&[f64]) -> Complex64 + Sync) {
    let g = grid.g;
    let dim = grid.dim;
    let nodes: Vec<f64> = (0..g).map(|i| grid.node(i)).collect();
    data.par_chunks_mut(g).enumerate().for_each(|(row, chunk)| {
        let mut x = vec![0.0; dim];
        let mut rem = row;
        for d in (0..dim - 1).rev() {
            x[d] = nodes[rem % g];
            rem /= g;
        }
        for (i, v) in chunk.iter_mut().enumerate() {
            x[dim - 1] = nodes[i];
            *v = f(&x);
        }
    });
}

fn for_each_freq(grid: &TorusGrid, data: &mut [Complex64], f: impl Fn(&[f64], &mut Complex64) + Sync) {
    let g = grid.g;
    let dim = grid.dim;
    let freqs: Vec<f64> = (0..g).map(|a| grid.freq(a)).collect();
    data.par_chunks_mut(g).enumerate().for_each(|(row, chunk)| {
        let mut xi = vec![0.0; dim];
        let mut rem = row;
        for d in (0..dim - 1).rev() {
            xi[d] = freqs[rem % g];
            rem /= g;
        }
        for (a, v) in chunk.iter_mut().enumerate() {
            xi[dim - 1] = freqs[a];
            f(&xi, v);
        }
    });
}

fn check_piece_grid(omega: &SphereFunction, grid: &TorusGrid, gamma: i32, mu: i32) -> Result<()> {
    if grid.dim != omega.mn {
        return invalid(format!("grid dimension {} differs from mn = {}", grid.dim, omega.mn));
    }
    let support = 2f64.powi(1 - gamma);
    if support > grid.period / 2.0 {
        return Err(Error::Resolution(format!("piece γ={gamma} has radius {support}, box half-width is {}", grid.period / 2.0)));
    }
    if grid.spacing() > 2f64.powi(-gamma - 1) / 8.0 {
        return Err(Error::Resolution(format!("spacing {} does not resolve scale 2^{}", grid.spacing(), -gamma)));
    }
    let nyquist = grid.g as f64 / (2.0 * grid.period);
    if 2f64.powi(mu + gamma + 1) > nyquist {
        return Err(Error::Resolution(format!("frequency 2^{} beyond the grid limit {nyquist}", mu + gamma + 1)));
    }
    Ok(())
}

/// Continuum-normalized transform Σ h(y) e^{-2πi y·ξ} Δ^d of
/// K^γ = Φ̂(2^γ ·) K.
pub fn kernel_piece_hat(omega: &SphereFunction, gamma: i32, grid: &TorusGrid) -> Result<Spectrum> {
    let window = LPWindow { m: omega.mn, n: 1 };
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
    if !omega.is_zero() {
        let s = 2f64.powi(gamma);
        for_each_node(grid, &mut data, |y| {
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w = window.profile(s * r);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let u: Vec<f64> = y.iter().map(|v| v / r).collect();
            Complex64::new(w * omega.eval(&u) / r.powi(omega.mn as i32), 0.0)
        });
        dft_in_place(grid, &mut data);
        let c = grid.cell() * (grid.len() as f64).sqrt();
        data.par_iter_mut().for_each(|v| *v *= c);
    }
    Ok(Spectrum { grid: *grid, values: data })
}

/// Multiplies by Φ̂(2^{-scale} ξ).
pub fn apply_window(spec: &mut Spectrum, scale: i32) {
    let window = LPWindow { m: spec.grid.dim, n: 1 };
    let s = 2f64.powi(-scale);
    let grid = spec.grid;
    for_each_freq(&grid, &mut spec.values, |xi, v| {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        *v *= window.profile(s * r);
    });
}

/// K̂^γ_μ(ξ) = Φ̂(2^{-(μ+γ)} ξ) K̂^γ(ξ).
pub fn dyadic_piece_hat(omega: &SphereFunction, gamma: i32, mu: i32, grid: &TorusGrid) -> Result<Spectrum> {
    check_piece_grid(omega, grid, gamma, mu)?;
    let mut spec = kernel_piece_hat(omega, gamma, grid)?;
    apply_window(&mut spec, mu + gamma);
    Ok(spec)
}

/// Physical samples of K^γ_μ.
pub fn dyadic_piece(omega: &SphereFunction, gamma: i32, mu: i32, grid: &TorusGrid) -> Result<GridFunction> {
    let spec = dyadic_piece_hat(omega, gamma, mu, grid)?;
    Ok(spectrum_to_physical(spec))
}

fn spectrum_to_physical(spec: Spectrum) -> GridFunction {
    let grid = spec.grid;
    let mut data = spec.values;
    idft_in_place(&grid, &mut data);
    let c = (grid.len() as f64).sqrt() / grid.period.powi(grid.dim as i32);
    data.par_iter_mut().for_each(|v| *v *= c);
    GridFunction { grid, values: data }
}

/// Fraction of Σ|ŝ|^2 carried by lo <= |ξ| <= hi.
pub fn annulus_mass(spec: &Spectrum, lo: f64, hi: f64) -> f64 {
    let grid = spec.grid;
    let g = grid.g;
    let freqs: Vec<f64> = (0..g).map(|a| grid.freq(a)).collect();
    let (inside, total) = spec
        .values
        .par_chunks(g)
        .enumerate()
        .map(|(row, chunk)| {
            let mut r2row = 0.0;
            let mut rem = row;
            for _ in 0..grid.dim - 1 {
                r2row += freqs[rem % g].powi(2);
                rem /= g;
            }
            let mut acc = (0.0, 0.0);
            for (a, v) in chunk.iter().enumerate() {
                let r = (r2row + freqs[a].powi(2)).sqrt();
                let m = v.norm_sqr();
                acc.1 += m;
                if r >= lo && r <= hi {
                    acc.0 += m;
                }
            }
            acc
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0.0 {
        1.0
    } else {
        inside / total
    }
}

/// K̂^0 on one grid together with its windowed versions K̂^0_μ.
pub struct RoughPieces {
    pub grid: TorusGrid,
    pub k0_hat: Spectrum,
}

impl RoughPieces {
    pub fn new(omega: &SphereFunction, grid: &TorusGrid) -> Result<Self> {
        check_piece_grid(omega, grid, 0, -1)?;
        Ok(Self { grid: *grid, k0_hat: kernel_piece_hat(omega, 0, grid)? })
    }

    pub fn k0mu_hat(&self, mu: i32) -> Result<Spectrum> {
        let nyquist = self.grid.g as f64 / (2.0 * self.grid.period);
        if 2f64.powi(mu + 1) > nyquist {
            return Err(Error::Resolution(format!("μ = {mu} beyond the grid limit {nyquist}")));
        }
        let mut s = self.k0_hat.clone();
        apply_window(&mut s, mu);
        Ok(s)
    }

    /// Fraction of the L^2 mass of K̂^0_μ in 2^{μ-2} <= |ξ| <= 2^{μ+2}.
    pub fn annulus_mass(&self, mu: i32) -> Result<f64> {
        Ok(annulus_mass(&self.k0mu_hat(mu)?, 2f64.powi(mu - 2), 2f64.powi(mu + 2)))
    }
}

#[derive(Clone, Debug)]
pub struct AssembledKmu {
    pub hat: Spectrum,
    pub physical: GridFunction,
    /// Relative L^2 mass of the two boundary γ terms.
    pub boundary_mass: f64,
    pub truncated: bool,
}

/// K_μ = Σ_γ K^γ_μ over the given γ range.
pub fn assemble_kmu(
    omega: &SphereFunction,
    mu: i32,
    gammas: std::ops::RangeInclusive<i32>,
    grid: &TorusGrid,
) -> Result<AssembledKmu> {
    let gs: Vec<i32> = gammas.collect();
    if gs.is_empty() {
        return invalid("empty γ range");
    }
    let pieces: Vec<Spectrum> = gs.iter().map(|&g| dyadic_piece_hat(omega, g, mu, grid)).collect::<Result<_>>()?;
    let mut hat = Spectrum { grid: *grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] };
    for p in &pieces {
        for (h, v) in hat.values.iter_mut().zip(&p.values) {
            *h += v;
        }
    }
    let energy = |s: &Spectrum| s.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let total = energy(&hat);
    let mut boundary = energy(&pieces[0]);
    if pieces.len() > 1 {
        boundary += energy(&pieces[pieces.len() - 1]);
    }
    let boundary_mass = if total > 0.0 { boundary / total } else { 0.0 };
    let truncated = boundary_mass > 1e-8;
    if truncated {
        log::warn!("K_μ truncated: boundary γ terms carry {boundary_mass:.3e} of the mass");
    }
    let physical = spectrum_to_physical(hat.clone());
    Ok(AssembledKmu { hat, physical, boundary_mass, truncated })
}

#[derive(Clone, Debug)]
pub struct RoughCoeffs {
    pub mu: i32,
    pub table: CoefficientTable,
    /// sup_k |b^{λ,μ}| for λ = 0..=λ_max.
    pub sup: Vec<f64>,
    /// ℓ^{q'} norms for λ = 0..=λ_max.
    pub lq: Vec<f64>,
    pub c0: f64,
    pub dim: usize,
}

/// Largest frequency grid rough_coeffs will allocate.
const ROUGH_BUDGET: usize = 1 << 23;

/// Wavelet coefficients of K̂^0_μ on the frequency lattice of spacing
/// 2^{-(λ_max+3)} covering |ξ| <= 2^{μ+1}.
pub fn rough_coeffs(omega: &SphereFunction, mu: i32, lambda_max: u32, wavelets: &MotherWavelets) -> Result<RoughCoeffs> {
    let res = lambda_max + 3;
    let period = 2f64.powi(res as i32);
    let g = 1usize << (mu + 2 + res as i32).max(1);
    if g.pow(omega.mn as u32) > ROUGH_BUDGET {
        return Err(Error::Resource(format!("a {}-dimensional grid of side {g} exceeds the budget", omega.mn)));
    }
    let grid = TorusGrid::new(omega.mn, g, period)?;
    let mut spec = kernel_piece_hat(omega, 0, &grid)?;
    apply_window(&mut spec, mu);
    let field = DyadicField { dim: omega.mn, res, lo: -(g as i64 / 2), size: g, values: spec.values };
    let mut table = analyze(&field, wavelets, lambda_max)?;
    table.entries.retain(|_, v| v.norm() > 0.0);
    table.source = format!("K0_mu hat, mu = {mu}");
    let qp = if omega.q > 1.0 { omega.q / (omega.q - 1.0) } else { f64::INFINITY };
    let mut sup = Vec::new();
    let mut lq = Vec::new();
    for l in 0..=lambda_max {
        let (s, n) = coeff_norms(&table, l, if qp.is_finite() { qp } else { 2.0 });
        sup.push(s);
        lq.push(if qp.is_finite() { n } else { s });
    }
    Ok(RoughCoeffs { mu, table, sup, lq, c0: wavelets.c0(), dim: omega.mn })
}

impl RoughCoeffs {
    /// Whether atoms of level λ are far enough out for the shell
    /// 2^{λ+μ-2} <= |k| <= 2^{λ+μ+2} to contain every coefficient.
    pub fn confined(&self, lambda: u32) -> bool {
        2f64.powi(lambda as i32 + self.mu - 2) >= self.c0 * (self.dim as f64).sqrt()
    }

    /// Coefficients above `tol` outside the shell, at confined levels.
    pub fn shell_violations(&self, tol: f64) -> usize {
        self.table
            .entries
            .iter()
            .filter(|(idx, v)| {
                let r = idx.k.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                let e = (idx.lambda as i32) + self.mu;
                self.confined(idx.lambda) && v.norm() > tol && (r < 2f64.powi(e - 2) || r > 2f64.powi(e + 2))
            })
            .count()
    }
}

#[derive(Clone)]
pub enum HormanderKind {
    /// Π_j (1 + ξ_j^2)^{i t_j / 2}.
    MihlinOscillating { t: Vec<f64> },
    /// (1 + |ξ|^2)^{-s/2}.
    Envelope { s: f64 },
    Sampled(Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for HormanderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HormanderKind::MihlinOscillating { t } => write!(f, "mihlin{t:?}"),
            HormanderKind::Envelope { s } => write!(f, "envelope({s})"),
            HormanderKind::Sampled(_) => write!(f, "sampled"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HormanderSymbol {
    pub kind: HormanderKind,
    pub dim: usize,
    pub q: f64,
    pub s: f64,
}

pub fn hormander_make(kind: HormanderKind, dim: usize, q: f64, s: f64) -> Result<HormanderSymbol> {
    if dim == 0 || dim > 3 {
        return invalid(format!("symbol dimension {dim} not supported"));
    }
    if let HormanderKind::MihlinOscillating { t } = &kind {
        if t.len() != dim {
            return invalid("one oscillation rate per coordinate is required");
        }
    }
    Ok(HormanderSymbol { kind, dim, q, s })
}

impl HormanderSymbol {
    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        match &self.kind {
            HormanderKind::MihlinOscillating { t } => {
                let phase: f64 = xi.iter().zip(t).map(|(x, tj)| tj / 2.0 * (1.0 + x * x).ln()).sum();
                Complex64::from_polar(1.0, phase)
            }
            HormanderKind::Envelope { s } => {
                Complex64::new((1.0 + xi.iter().map(|x| x * x).sum::<f64>()).powf(-s / 2.0), 0.0)
            }
            HormanderKind::Sampled(f) => f(xi),
        }
    }

    /// σ_γ = σ(2^γ ·) Φ̂ sampled on [-2, 2)^d at spacing 2^{-res}.
    pub fn slice_field(&self, gamma: i32, res: u32) -> DyadicField {
        let window = LPWindow { m: self.dim, n: 1 };
        let mut field = DyadicField::cube(self.dim, res, -2.0, 2.0);
        let sc = 2f64.powi(gamma);
        field.fill(|xi| {
            let w = window.eval(xi);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let scaled: Vec<f64> = xi.iter().map(|x| x * sc).collect();
            self.eval(&scaled) * w
        });
        field
    }

    /// ‖σ_γ‖_{L^q_s} of the slice, treated as periodic on [-2, 2)^d.
    pub fn slice_sobolev(&self, gamma: i32, res: u32) -> Result<f64> {
        let field = self.slice_field(gamma, res);
        let grid = TorusGrid::new(self.dim, field.size, 4.0)?;
        sobolev_norm(&GridFunction::new(grid, field.values)?, self.s, self.q)
    }
}

#[derive(Clone, Debug)]
pub struct HormanderCoeffs {
    pub gammas: Vec<i32>,
    pub tables: Vec<CoefficientTable>,
    /// sup_γ ℓ^q norms per λ.
    pub sup_lq: Vec<f64>,
    /// sup_γ ℓ^∞ norms per λ.
    pub sup_linf: Vec<f64>,
}

pub fn hormander_coeffs(
    sigma: &HormanderSymbol,
    lambda_max: u32,
    gammas: &[i32],
    wavelets: &MotherWavelets,
) -> Result<HormanderCoeffs> {
    let res = lambda_max + 3;
    let mut tables = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let mut t = analyze(&sigma.slice_field(g, res), wavelets, lambda_max)?;
        t.source = format!("slice gamma = {g}");
        tables.push(t);
    }
    let mut sup_lq = vec![0.0f64; lambda_max as usize + 1];
    let mut sup_linf = vec![0.0f64; lambda_max as usize + 1];
    for t in &tables {
        for l in 0..=lambda_max {
            let (linf, lq) = coeff_norms(t, l, sigma.q);
            sup_lq[l as usize] = sup_lq[l as usize].max(lq);
            sup_linf[l as usize] = sup_linf[l as usize].max(linf);
        }
    }
    Ok(HormanderCoeffs { gammas: gammas.to_vec(), tables, sup_lq, sup_linf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cosine() -> SphereFunction {
        SphereFunction::from_fn(2, 2.0, |u| u[0]).unwrap()
    }

    #[test]
    fn mean_zero_enforced() {
        assert!(cosine().mean().abs() < 1e-10);
        assert!(SphereFunction::from_fn(2, 2.0, |_| 1.0).is_err());
        let s3 = SphereFunction::from_fn(3, 2.0, |u| u[2]).unwrap();
        assert!(s3.mean().abs() < 1e-10);
        assert!(SphereFunction::from_fn(3, 2.0, |u| u[2] * u[2]).is_err());
    }

    #[test]
    fn kernel_values() {
        let om = cosine();
        assert!((kernel_eval(&om, &[2.0, 0.0]).unwrap() - 0.25).abs() < 1e-14);
        assert!(matches!(kernel_eval(&om, &[0.0, 0.0]), Err(Error::SingularPoint)));
        let zero = SphereFunction::from_fn(2, 2.0, |_| 0.0).unwrap();
        assert_eq!(kernel_eval(&zero, &[0.3, -1.0]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let y = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let a = kernel_eval(&om, &y).unwrap();
            let b = kernel_eval(&om, &[2.0 * y[0], 2.0 * y[1]]).unwrap();
            assert_eq!(b, a / 4.0);
        }
        let s3 = SphereFunction::from_fn(3, 2.0, |u| u[2]).unwrap();
        assert!((kernel_eval(&s3, &[0.0, 0.0, 2.0]).unwrap() - 0.125).abs() < 1e-3);
    }

    #[test]
    fn text_roundtrip() {
        let om = SphereFunction::from_fn(2, 3.0, |u| u[0] * u[1]).unwrap();
        let back = SphereFunction::from_text(&om.to_text()).unwrap();
        assert_eq!(back.values, om.values);
        assert_eq!(back.q, 3.0);
    }

    #[test]
    fn interpolation_is_exact_for_band_limited() {
        let om = SphereFunction::from_fn(2, 2.0, |u| u[0] * u[0] - u[1] * u[1] + 0.3 * u[1]).unwrap();
        let t: f64 = 0.123;
        let want = (2.0 * t).cos() + 0.3 * t.sin();
        assert!((om.eval(&[t.cos(), t.sin()]) - want).abs() < 1e-12);
    }

    #[test]
    fn pieces_annulus_and_rescaling() {
        let om = cosine();
        let grid = TorusGrid::new(2, 2048, 8.0).unwrap();
        let pieces = RoughPieces::new(&om, &grid).unwrap();
        for mu in 2..=5 {
            assert!(pieces.annulus_mass(mu).unwrap() >= 1.0 - 1e-6);
        }
        let zero = SphereFunction::from_fn(2, 2.0, |_| 0.0).unwrap();
        assert!(dyadic_piece(&zero, 0, 3, &grid).unwrap().values.iter().all(|v| v.norm() == 0.0));
        // K̂^1_μ(ξ) = K̂^0_μ(ξ / 2) at even frequency indices
        let mu = 3;
        let k0 = dyadic_piece_hat(&om, 0, mu, &grid).unwrap();
        let k1 = dyadic_piece_hat(&om, 1, mu, &grid).unwrap();
        let g = grid.g;
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for a in 0..g {
            for b in 0..g {
                let (ja, jb) = (grid.freq_index(a), grid.freq_index(b));
                if ja % 2 != 0 || jb % 2 != 0 {
                    continue;
                }
                let v1 = k1.values[a * g + b];
                let v0 = k0.values[grid.wrap(ja / 2) * g + grid.wrap(jb / 2)];
                diff = diff.max((v1 - v0).norm());
                norm = norm.max(v0.norm());
            }
        }
        assert!(diff <= 1e-6 * norm, "{diff} vs {norm}");
    }

    #[test]
    fn hormander_slices() {
        let one = hormander_make(HormanderKind::Sampled(Arc::new(|_| Complex64::new(1.0, 0.0))), 2, 4.0, 2.0).unwrap();
        let a = one.slice_field(0, 5);
        let b = one.slice_field(3, 5);
        assert_eq!(a.values, b.values);
        let mihlin = hormander_make(HormanderKind::MihlinOscillating { t: vec![1.0, -0.5] }, 2, 4.0, 2.0).unwrap();
        let f = mihlin.slice_field(2, 5);
        for (idx, v) in f.values.iter().enumerate() {
            let (i, j) = (idx / f.size, idx % f.size);
            let r = (f.node(i).powi(2) + f.node(j).powi(2)).sqrt();
            if r <= 0.5 || r >= 2.0 {
                assert_eq!(v.norm(), 0.0);
            }
        }
        assert!(mihlin.slice_sobolev(1, 5).unwrap().is_finite());
    }
}

//! Lower-bound estimation of ‖T‖ from L^2 × ... × L^2 to L^{2/m}, and
//! log-scale regression of measured norms against predicted envelopes.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::MultilinearOperator;
use crate::error::{invalid, Error, Result};
use crate::grid::{pth_power, GridFunction, TorusGrid};

#[derive(Clone, Debug)]
pub struct EstimateOptions {
    pub trials: usize,
    pub ascent_steps: usize,
    pub seed: u64,
    /// Relative improvement below which an ascent stops.
    pub tol: f64,
    /// Number of pure-frequency tuples probed; exhaustive when G^m fits.
    pub mode_budget: usize,
    /// How many of the best starts are refined by ascent.
    pub ascent_starts: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self { trials: 64, ascent_steps: 200, seed: 0, tol: 1e-8, mode_budget: 1024, ascent_starts: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Random(usize),
    Modes(Vec<usize>),
    Ascent(Box<Origin>),
}

#[derive(Clone, Debug)]
pub struct NormEstimate {
    pub value: f64,
    pub trials: usize,
    pub ascent_steps: usize,
    pub seed: u64,
    pub certificate: Vec<GridFunction>,
    pub origin: Origin,
    /// Best-so-far after each phase and each ascent sweep.
    pub history: Vec<f64>,
}

fn ratio_of(op: &dyn MultilinearOperator, inputs: &[GridFunction]) -> Result<f64> {
    let refs: Vec<&GridFunction> = inputs.iter().collect();
    let out = op.apply(&refs)?;
    if out.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("operator output is not finite".into()));
    }
    let p = 2.0 / op.degree() as f64;
    let num = crate::grid::quasinorm(&out, p);
    let den: f64 = inputs.iter().map(|f| f.l2_norm()).product();
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

impl NormEstimate {
    /// Re-evaluates the certificate.
    pub fn verify(&self, op: &dyn MultilinearOperator) -> Result<f64> {
        ratio_of(op, &self.certificate)
    }
}

fn normalize(v: &mut [Complex64], cell: f64) -> f64 {
    let n = (v.iter().map(|x| x.norm_sqr()).sum::<f64>() * cell).sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn gaussian_inputs(grid: TorusGrid, m: usize, seed: u64, trial: usize) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    (0..m)
        .map(|_| {
            let mut v: Vec<Complex64> =
                (0..grid.g).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
            normalize(&mut v, grid.cell());
            GridFunction { grid, values: v }
        })
        .collect()
}

fn mode(grid: TorusGrid, a: usize) -> GridFunction {
    let xi = grid.freq(a);
    let mut f = GridFunction::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * xi * x[0]));
    let cell = grid.cell();
    normalize(&mut f.values, cell);
    f
}

fn mode_tuples(g: usize, m: usize, budget: usize, seed: u64) -> Vec<Vec<usize>> {
    let total = (g as u128).pow(m as u32);
    if total <= budget as u128 {
        (0..total as usize)
            .map(|mut idx| {
                let mut t = vec![0; m];
                for j in (0..m).rev() {
                    t[j] = idx % g;
                    idx /= g;
                }
                t
            })
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f646573);
        (0..budget).map(|_| (0..m).map(|_| rng.gen_range(0..g)).collect()).collect()
    }
}

/// One alternating sweep; returns the new objective Σ|T|^p Δx.
fn ascent_sweep(op: &dyn MultilinearOperator, f: &mut [GridFunction], mut obj: f64) -> Result<f64> {
    let m = f.len();
    let p = 2.0 / m as f64;
    let grid = op.grid();
    let cell = grid.cell();
    for slot in 0..m {
        let refs: Vec<&GridFunction> = f.iter().collect();
        let a = op.freeze(slot, &refs)?;
        let u = a.apply(&f[slot].values);
        // subgradient of Σ|u|^p, with the convention 0 at u = 0
        let w: Vec<Complex64> = u.iter().map(|x| {
            let r = x.norm();
            if r == 0.0 { Complex64::new(0.0, 0.0) } else { x * r.powf(p - 2.0) }
        }).collect();
        let mut grad = a.adjoint(&w);
        if grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("gradient not finite in slot {slot}")));
        }
        let eval = |v: &[Complex64]| pth_power(&a.apply(v), p, cell);
        let mut full = grad.clone();
        if normalize(&mut full, cell) == 0.0 {
            continue;
        }
        let cand = eval(&full);
        if cand > obj {
            f[slot].values = full;
            obj = cand;
            continue;
        }
        // tangent step with halving
        let cur = &f[slot].values;
        let inner: Complex64 = grad.iter().zip(cur).map(|(g, c)| g * c.conj()).sum::<Complex64>() * cell;
        for (g, c) in grad.iter_mut().zip(cur) {
            *g -= c * inner.re;
        }
        let gn = (grad.iter().map(|x| x.norm_sqr()).sum::<f64>() * cell).sqrt();
        if gn == 0.0 {
            continue;
        }
        let mut t = 1.0 / gn;
        for _ in 0..30 {
            let mut trial: Vec<Complex64> = cur.iter().zip(&grad).map(|(c, g)| c + g * t).collect();
            normalize(&mut trial, cell);
            let val = eval(&trial);
            if val > obj {
                f[slot].values = trial;
                obj = val;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(obj)
}

pub fn estimate_opnorm(op: &dyn MultilinearOperator, opts: &EstimateOptions) -> Result<NormEstimate> {
    if opts.trials == 0 {
        return invalid("at least one trial is required");
    }
    let m = op.degree();
    let grid = op.grid();
    let p = 2.0 / m as f64;

    let random: Vec<(f64, Origin, Vec<GridFunction>)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let inputs = gaussian_inputs(grid, m, opts.seed, t);
            let r = ratio_of(op, &inputs).map_err(|e| Error::Numeric(format!("random trial {t}: {e}")))?;
            Ok((r, Origin::Random(t), inputs))
        })
        .collect::<Result<_>>()?;
    let modes: Vec<(f64, Origin, Vec<GridFunction>)> = mode_tuples(grid.g, m, opts.mode_budget, opts.seed)
        .into_par_iter()
        .map(|tuple| {
            let inputs: Vec<GridFunction> = tuple.iter().map(|&a| mode(grid, a)).collect();
            let r = ratio_of(op, &inputs).map_err(|e| Error::Numeric(format!("mode probe {tuple:?}: {e}")))?;
            Ok((r, Origin::Modes(tuple), inputs))
        })
        .collect::<Result<_>>()?;

    let mut history = Vec::new();
    let mut random = random;
    let mut modes = modes;
    // stable sorts keep generation order among ties
    random.sort_by(|a, b| b.0.total_cmp(&a.0));
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    history.push(random[0].0);
    let mut best = random[0].clone();
    if let Some(top) = modes.first() {
        if top.0 > best.0 {
            best = top.clone();
        }
    }
    history.push(best.0);

    // pure modes are often critical points, so starts alternate between
    // the best random trials and the best mode probes
    let mut starts = Vec::new();
    let (mut ri, mut mi) = (random.iter(), modes.iter());
    while starts.len() < opts.ascent_starts.max(1) {
        let before = starts.len();
        starts.extend(ri.next());
        if starts.len() < opts.ascent_starts.max(1) {
            starts.extend(mi.next());
        }
        if starts.len() == before {
            break;
        }
    }
    let mut steps_done = 0;
    for (start_val, origin, inputs) in starts {
        if opts.ascent_steps == 0 {
            break;
        }
        let mut f = inputs.clone();
        let mut obj = start_val.powf(p);
        for _ in 0..opts.ascent_steps {
            let next = ascent_sweep(op, &mut f, obj)?;
            steps_done += 1;
            let improved = next - obj;
            obj = next;
            if improved <= opts.tol * obj.abs() {
                break;
            }
        }
        let r = ratio_of(op, &f)?;
        if r > best.0 {
            best = (r, Origin::Ascent(Box::new(origin.clone())), f);
        }
        history.push(best.0);
    }
    Ok(NormEstimate {
        value: best.0,
        trials: opts.trials,
        ascent_steps: steps_done,
        seed: opts.seed,
        certificate: best.2,
        origin: best.1,
        history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axis {
    /// log2 y against log2 x.
    LogLog,
    /// log2 y against x.
    SemiLog,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub parameter: String,
    pub axis: Axis,
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
    pub envelope: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ratio_spread: f64,
}

/// Least squares of log2 y on x (or log2 x).
pub fn fit_scaling(parameter: &str, samples: &[(f64, f64)], axis: Axis) -> Result<ScalingReport> {
    if samples.len() < 3 {
        return invalid("at least three samples are needed for a fit");
    }
    if let Some(bad) = samples.iter().find(|(x, y)| !(*y > 0.0) || (axis == Axis::LogLog && !(*x > 0.0))) {
        return invalid(format!("nonpositive sample {bad:?}"));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(x, y)| (if axis == Axis::LogLog { x.log2() } else { x }, y.log2()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return invalid("parameter values must not all coincide");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - (intercept + slope * p.0)).collect();
    let residual_rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok(ScalingReport {
        parameter: parameter.to_string(),
        axis,
        samples: samples.to_vec(),
        slope,
        intercept,
        residuals,
        residual_rms,
        envelope: Vec::new(),
        ratios: Vec::new(),
        ratio_spread: f64::NAN,
    })
}

/// Ratios estimate / envelope and their max/min spread.
pub fn envelope_ratio(estimates: &[f64], envelope: &[f64]) -> Result<(Vec<f64>, f64)> {
    if estimates.len() != envelope.len() {
        return invalid("estimate and envelope series differ in length");
    }
    let ratios: Vec<f64> = estimates.iter().zip(envelope).map(|(e, v)| e / v).collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((ratios, max / min))
}

impl ScalingReport {
    pub fn with_envelope(mut self, envelope: Vec<f64>) -> Result<Self> {
        let est: Vec<f64> = self.samples.iter().map(|s| s.1).collect();
        let (ratios, spread) = envelope_ratio(&est, &envelope)?;
        self.envelope = envelope;
        self.ratios = ratios;
        self.ratio_spread = spread;
        Ok(self)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,estimate,envelope,ratio\n");
        for (i, (x, y)) in self.samples.iter().enumerate() {
            let env = self.envelope.get(i).map(|v| format!("{v:?}")).unwrap_or_default();
            let ratio = self.ratios.get(i).map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(s, "{x:?},{y:?},{env},{ratio}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AtomSumOperator, AtomSymbol, DenseOperator, DenseSymbol};
    use crate::lattice::CoeffMap;
    use crate::wavelet::AtomFamily;

    #[test]
    fn single_node_projection_has_norm_one() {
        let grid = TorusGrid::new(1, 32, 4.0).unwrap();
        let target = grid.wrap(3);
        let s = DenseSymbol::from_fn(grid, 1, |xi| Complex64::new(if grid.wrap((xi[0] * 4.0).round() as i64) == target { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let op = DenseOperator::new(s).unwrap();
        let est = estimate_opnorm(&op, &EstimateOptions { trials: 8, ascent_steps: 20, ..Default::default() }).unwrap();
        assert!((est.value - 1.0).abs() < 1e-6);
        assert!(est.value <= 1.0 + 1e-12);
    }

    #[test]
    fn linear_case_reaches_sup_of_symbol() {
        let grid = TorusGrid::new(1, 64, 8.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<Complex64> = (0..64).map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
        let s = DenseSymbol::new(grid, 1, vals).unwrap();
        let sup = s.sup;
        let op = DenseOperator::new(s).unwrap();
        let est = estimate_opnorm(&op, &EstimateOptions { trials: 16, ascent_steps: 50, seed: 3, ..Default::default() }).unwrap();
        assert!(est.value >= sup * (1.0 - 1e-6) && est.value <= sup * (1.0 + 1e-12));
        assert!((est.verify(&op).unwrap() - est.value).abs() <= 1e-10 * est.value);
        assert!(est.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn bilinear_product_matches_gaussian_family_oracle() {
        // T(f, g) = fg; the oracle searches centred Gaussian pairs by widths
        let grid = TorusGrid::new(1, 64, 8.0).unwrap();
        let s = DenseSymbol::from_fn(grid, 2, |_| Complex64::new(1.0, 0.0)).unwrap();
        let op = DenseOperator::new(s).unwrap();
        let gauss = |w: f64| GridFunction::from_fn(grid, |x| Complex64::new((-x[0] * x[0] / (2.0 * w * w)).exp(), 0.0));
        let mut oracle: f64 = 0.0;
        for i in 0..24 {
            for j in 0..24 {
                let (w1, w2) = (0.2 * 1.15f64.powi(i), 0.2 * 1.15f64.powi(j));
                oracle = oracle.max(ratio_of(&op, &[gauss(w1), gauss(w2)]).unwrap());
            }
        }
        let est = estimate_opnorm(&op, &EstimateOptions { trials: 16, ascent_steps: 100, seed: 1, ..Default::default() }).unwrap();
        assert!((est.value - oracle).abs() <= 0.05 * oracle, "{} vs {oracle}", est.value);
    }

    #[test]
    fn scale_covariance_and_determinism() {
        let grid = TorusGrid::new(1, 64, 8.0).unwrap();
        let mut coeffs = CoeffMap::new(1, 2);
        for (i, k) in [[0i64, 1], [1, 1], [2, -1], [-1, 0]].iter().enumerate() {
            coeffs.coeffs.insert(k.to_vec(), Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0));
        }
        let sigma = AtomSymbol::bump(0, AtomFamily::bump(1.0).unwrap(), coeffs).unwrap();
        let opts = EstimateOptions { trials: 8, ascent_steps: 10, seed: 5, ..Default::default() };
        let a = estimate_opnorm(&AtomSumOperator::new(sigma.clone(), grid).unwrap(), &opts).unwrap();
        let b = estimate_opnorm(&AtomSumOperator::new(sigma.scaled(3.0), grid).unwrap(), &opts).unwrap();
        assert!((b.value - 3.0 * a.value).abs() <= 1e-10 * b.value);
        let c = estimate_opnorm(&AtomSumOperator::new(sigma, grid).unwrap(), &opts).unwrap();
        assert_eq!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn fits() {
        let xs = [16.0, 32.0, 64.0, 128.0, 256.0];
        let exact: Vec<(f64, f64)> = xs.iter().map(|&x: &f64| (x, x.powf(0.25))).collect();
        assert!((fit_scaling("N", &exact, Axis::LogLog).unwrap().slope - 0.25).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 3.0)).collect();
        assert!(fit_scaling("N", &flat, Axis::LogLog).unwrap().slope.abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy: Vec<(f64, f64)> = xs.iter().map(|&x: &f64| (x, x.powf(0.25) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))).collect();
        assert!((fit_scaling("N", &noisy, Axis::LogLog).unwrap().slope - 0.25).abs() < 0.02);
        assert!(fit_scaling("N", &[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], Axis::LogLog).is_err());
        assert!(fit_scaling("N", &exact[..2], Axis::LogLog).is_err());
    }

    #[test]
    fn envelope_ratios() {
        let (r, spread) = envelope_ratio(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(r, vec![1.0; 3]);
        assert_eq!(spread, 1.0);
        let (r2, _) = envelope_ratio(&[1.0, 2.0, 4.0], &[2.0, 4.0, 8.0]).unwrap();
        assert_eq!(r2, vec![0.5; 3]);
    }
}

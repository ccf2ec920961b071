//! Atom families: smooth bumps ω and Daubechies product wavelets Ψ_G, with
//! symbol analysis, synthesis and Sobolev norms.

mod analysis;
mod bump;
mod daubechies;

use std::sync::Arc;

use num_complex::Complex64;

pub use analysis::{analyze, coeff_norms, eval_atom_box, letter_sets, synthesize, AtomIndex, CoefficientTable, DyadicField};
pub use bump::BumpProfile;
pub use daubechies::{daubechies_filter, highpass, Letter, MotherWavelets, CASCADE_LEVELS};

use crate::error::{Error, Result};
use crate::grid::{dft, idft, quasinorm, GridFunction, Spectrum, TorusGrid};

#[derive(Clone, Debug)]
pub enum AtomFamily {
    Bump(BumpProfile),
    Wavelet(Arc<MotherWavelets>),
}

/// log2 of a spacing that is an exact power of two.
pub fn dyadic_res(spacing: f64) -> Option<i32> {
    let r = -spacing.log2().round();
    (2f64.powf(-r) == spacing).then_some(r as i32)
}

impl AtomFamily {
    pub fn bump(rho: f64) -> Result<Self> {
        Ok(AtomFamily::Bump(BumpProfile::new(rho)?))
    }

    pub fn daubechies(moments: usize) -> Result<Self> {
        Ok(AtomFamily::Wavelet(Arc::new(MotherWavelets::build(moments)?)))
    }

    /// Support of the level-λ translate k in one frequency variable.
    pub fn support_1d(&self, lambda: u32, k: i64) -> (f64, f64) {
        let s = 2f64.powi(-(lambda as i32));
        match self {
            AtomFamily::Bump(b) => ((k as f64 - b.rho) * s, (k as f64 + b.rho) * s),
            AtomFamily::Wavelet(w) => (k as f64 * s, (k as f64 + w.c0()) * s),
        }
    }

    /// Radius of the ball around 2^{-λ}k containing the atom, in units of
    /// 2^{-λ}.
    pub fn radius(&self) -> f64 {
        match self {
            AtomFamily::Bump(b) => b.rho,
            AtomFamily::Wavelet(w) => w.c0(),
        }
    }

    /// 2^{λ/2} ω(2^λ ξ - k) or 2^{λ/2} ψ_letter(2^λ ξ - k). On a dyadic
    /// frequency lattice of spacing 2^{-res} the wavelet value is read from
    /// cascade level res - λ.
    pub fn value_1d(&self, letter: Letter, lambda: u32, k: i64, xi: f64, res: Option<i32>) -> f64 {
        let amp = 2f64.powf(lambda as f64 / 2.0);
        match self {
            AtomFamily::Bump(b) => amp * b.eval(2f64.powi(lambda as i32) * xi - k as f64),
            AtomFamily::Wavelet(w) => match res {
                Some(r) if r >= lambda as i32 && r - lambda as i32 <= CASCADE_LEVELS as i32 => {
                    let level = (r - lambda as i32) as u32;
                    let p = (xi * 2f64.powi(r)).round() as i64;
                    amp * w.sample(letter, level, p - (k << level))
                }
                _ => amp * w.eval(letter, 2f64.powi(lambda as i32) * xi - k as f64),
            },
        }
    }

    pub fn check_resolution(&self, grid: &TorusGrid, lambda: u32) -> Result<()> {
        let spacing = 1.0 / grid.period;
        if spacing > 2f64.powi(-(lambda as i32)) / 8.0 * (1.0 + 1e-12) {
            return Err(Error::Resolution(format!(
                "frequency spacing {spacing} exceeds 2^-{lambda}/8; need period >= {}",
                2f64.powi(lambda as i32 + 3)
            )));
        }
        Ok(())
    }

    /// One-variable atom on the frequency lattice of `grid`.
    pub fn atom_line(&self, grid: &TorusGrid, letter: Letter, lambda: u32, k: i64) -> Vec<f64> {
        let res = dyadic_res(1.0 / grid.period);
        (0..grid.g).map(|a| self.value_1d(letter, lambda, k, grid.freq(a), res)).collect()
    }
}

/// Product atom Π_d atom(λ, letter_d, k_d) on the frequency lattice of
/// `grid`, returned as a spectrum.
pub fn eval_atom(family: &AtomFamily, lambda: u32, letters: &[Letter], k: &[i64], grid: &TorusGrid) -> Result<Spectrum> {
    if k.len() != grid.dim || letters.len() != grid.dim {
        return Err(Error::InvalidArgument(format!("atom has {} axes, grid has {}", k.len(), grid.dim)));
    }
    family.check_resolution(grid, lambda)?;
    let lines: Vec<Vec<f64>> = (0..grid.dim).map(|d| family.atom_line(grid, letters[d], lambda, k[d])).collect();
    let values = (0..grid.len())
        .map(|idx| {
            let v: f64 = grid.unflatten(idx).iter().enumerate().map(|(d, &a)| lines[d][a]).product();
            Complex64::new(v, 0.0)
        })
        .collect();
    Ok(Spectrum { grid: *grid, values })
}

/// L^q norm of (I - Δ)^{s/2} F on the periodic grid, with multiplier
/// (1 + 4π^2|ξ|^2)^{s/2} for ξ the ordinary frequency of the node lattice.
pub fn sobolev_norm(f: &GridFunction, s: f64, q: f64) -> Result<f64> {
    if s < 0.0 || !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("need s >= 0 and 1 < q < ∞, got s={s}, q={q}")));
    }
    if s == 0.0 {
        return Ok(quasinorm(f, q));
    }
    let mut spec = dft(f);
    let grid = f.grid;
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    for (idx, v) in spec.values.iter_mut().enumerate() {
        let xi2: f64 = grid.unflatten(idx).iter().map(|&a| grid.freq(a).powi(2)).sum();
        *v *= (1.0 + four_pi2 * xi2).powf(s / 2.0);
    }
    Ok(quasinorm(&idft(&spec), q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn level_zero_atom_is_mother() {
        let fam = AtomFamily::bump(1.0).unwrap();
        let grid = TorusGrid::new(1, 64, 8.0).unwrap();
        let s = eval_atom(&fam, 0, &[Letter::F], &[0], &grid).unwrap();
        let b = BumpProfile::new(1.0).unwrap();
        for a in 0..64 {
            assert_eq!(s.values[a].re, b.eval(grid.freq(a)));
        }
    }

    #[test]
    fn wavelet_atom_support_and_mass() {
        let fam = AtomFamily::daubechies(2).unwrap();
        let c0 = fam.radius();
        let grid = TorusGrid::new(1, 1024, 64.0).unwrap();
        let s = eval_atom(&fam, 3, &[Letter::M], &[8], &grid).unwrap();
        for a in 0..grid.g {
            if (grid.freq(a) - 1.0).abs() > c0 / 8.0 {
                assert_eq!(s.values[a].re, 0.0);
            }
        }
        let mass: f64 = s.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.period;
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let fam = AtomFamily::bump(1.0).unwrap();
        let grid = TorusGrid::new(1, 64, 8.0).unwrap();
        assert!(matches!(eval_atom(&fam, 1, &[Letter::F], &[0], &grid), Err(Error::Resolution(_))));
    }

    #[test]
    fn sobolev_of_pure_mode() {
        let grid = TorusGrid::new(1, 64, 4.0).unwrap();
        let f = GridFunction::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * PI * 1.25 * x[0]));
        let want = (1.0 + (2.0 * PI * 1.25f64).powi(2)).powf(0.75) * f.l2_norm();
        assert!((sobolev_norm(&f, 1.5, 2.0).unwrap() - want).abs() < 1e-10 * want);
        assert!((sobolev_norm(&f, 0.0, 3.0).unwrap() - quasinorm(&f, 3.0)).abs() < 1e-14);
    }

    #[test]
    fn sobolev_matches_second_derivative() {
        // F - F'' for a random trigonometric polynomial, differentiated by hand
        let grid = TorusGrid::new(1, 128, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let modes: Vec<(f64, Complex64)> = (-10..=10)
            .map(|j| (j as f64 / grid.period, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        let f = GridFunction::from_fn(grid, |x| modes.iter().map(|(w, c)| c * Complex64::from_polar(1.0, 2.0 * PI * w * x[0])).sum());
        let lf = GridFunction::from_fn(grid, |x| {
            modes.iter().map(|(w, c)| c * (1.0 + (2.0 * PI * w).powi(2)) * Complex64::from_polar(1.0, 2.0 * PI * w * x[0])).sum()
        });
        let got = sobolev_norm(&f, 2.0, 2.0).unwrap();
        let want = lf.l2_norm();
        assert!((got - want).abs() <= 1e-6 * want);
    }
}

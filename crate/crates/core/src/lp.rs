//! Littlewood–Paley window, dyadic slices and sharp frequency bands.

use crate::grid::{dft, idft, GridFunction};

/// Smooth step: 0 for t <= 0, 1 for t >= 1.
fn smooth_step(t: f64) -> f64 {
    let e = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let (a, b) = (e(t), e(1.0 - t));
    a / (a + b)
}

/// Radial window Φ̂(ξ) = β(log2 |ξ|) with β(t) = h(t + 1) - h(t), supported
/// in 1/2 <= |ξ| <= 2. Its dyadic dilates telescope to 1 away from 0.
#[derive(Clone, Copy, Debug)]
pub struct LPWindow {
    pub m: usize,
    pub n: usize,
}

pub fn build_lp_window(m: usize, n: usize) -> LPWindow {
    LPWindow { m, n }
}

impl LPWindow {
    pub fn profile(&self, r: f64) -> f64 {
        if !(r > 0.5 && r < 2.0) {
            return 0.0;
        }
        let t = r.log2();
        smooth_step(t + 1.0) - smooth_step(t)
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.profile(xi.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// (r, Φ̂(r)) on `count` equispaced radii covering [0, 2.5].
    pub fn samples(&self, count: usize) -> Vec<(f64, f64)> {
        (0..count).map(|i| {
            let r = 2.5 * i as f64 / (count.max(2) - 1) as f64;
            (r, self.profile(r))
        }).collect()
    }

    /// Scales γ with Φ̂(ξ / 2^γ) possibly nonzero.
    pub fn active_scales(&self, xi: &[f64]) -> std::ops::RangeInclusive<i32> {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r == 0.0 {
            return 1..=0;
        }
        let t = r.log2();
        (t - 1.0).floor() as i32..=(t + 1.0).ceil() as i32
    }

    /// σ_γ(ξ) = σ(2^γ ξ) Φ̂(ξ).
    pub fn slice<'a, F: Fn(&[f64]) -> num_complex::Complex64 + 'a>(
        &'a self,
        sigma: F,
        gamma: i32,
    ) -> impl Fn(&[f64]) -> num_complex::Complex64 + 'a {
        let s = 2f64.powi(gamma);
        move |xi: &[f64]| {
            let w = self.eval(xi);
            if w == 0.0 {
                return num_complex::Complex64::new(0.0, 0.0);
            }
            let scaled: Vec<f64> = xi.iter().map(|x| x * s).collect();
            sigma(&scaled) * w
        }
    }
}

/// Function-side piece with transform f̂(ξ) Φ̂(2^{-γ} ξ).
pub fn lp_piece(f: &GridFunction, window: &LPWindow, gamma: i32) -> GridFunction {
    let mut spec = dft(f);
    let grid = f.grid;
    let s = 2f64.powi(-gamma);
    for (idx, v) in spec.values.iter_mut().enumerate() {
        let xi: Vec<f64> = grid.unflatten(idx).into_iter().map(|a| grid.freq(a) * s).collect();
        *v *= window.eval(&xi);
    }
    idft(&spec)
}

/// Edges of the band C0 √n 2^{γ-λ} <= |ξ| <= 2^{γ+μ+3}.
pub fn band_edges(dim: usize, lambda: i32, gamma: i32, mu: i32, c0: f64) -> (f64, f64) {
    (c0 * (dim as f64).sqrt() * 2f64.powi(gamma - lambda), 2f64.powi(gamma + mu + 3))
}

/// Sharp cut of f̂ to the band.
pub fn frequency_restrict(f: &GridFunction, lambda: i32, gamma: i32, mu: i32, c0: f64) -> GridFunction {
    let grid = f.grid;
    let (lo, hi) = band_edges(grid.dim, lambda, gamma, mu, c0);
    let mut spec = dft(f);
    for (idx, v) in spec.values.iter_mut().enumerate() {
        let r = grid.unflatten(idx).into_iter().map(|a| grid.freq(a).powi(2)).sum::<f64>().sqrt();
        if !(r >= lo && r <= hi) {
            *v = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    idft(&spec)
}

/// All γ whose band meets the nonzero frequencies of the grid.
pub fn band_scales(f: &GridFunction, lambda: i32, mu: i32, c0: f64) -> std::ops::RangeInclusive<i32> {
    let grid = f.grid;
    let fmin = 1.0 / grid.period;
    let fmax = (grid.dim as f64).sqrt() * grid.g as f64 / (2.0 * grid.period);
    let lo = (fmin.log2() - mu as f64 - 3.0).floor() as i32;
    let hi = ((fmax / (c0 * (grid.dim as f64).sqrt())).log2() + lambda as f64).ceil() as i32;
    lo..=hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_of_unity() {
        let w = build_lp_window(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let scale = 2f64.powf(rng.gen_range(-12.0..12.0));
            let xi = [rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale];
            let total: f64 = (-60..=60).map(|g| w.eval(&[xi[0] / 2f64.powi(g), xi[1] / 2f64.powi(g)])).sum();
            assert!((total - 1.0).abs() <= 1e-10, "{xi:?}: {total}");
            let active: f64 = w.active_scales(&xi).map(|g| w.eval(&[xi[0] / 2f64.powi(g), xi[1] / 2f64.powi(g)])).sum();
            assert!((active - total).abs() < 1e-15);
        }
    }

    #[test]
    fn window_support() {
        let w = build_lp_window(1, 1);
        assert_eq!(w.profile(0.5), 0.0);
        assert_eq!(w.profile(2.0), 0.0);
        assert_eq!(w.profile(0.0), 0.0);
        assert!(w.profile(1.0) > 0.0);
        let one = w.slice(|_| Complex64::new(1.0, 0.0), 3);
        assert_eq!(one(&[1.3]).re, w.profile(1.3));
    }

    #[test]
    fn band_counting_bound() {
        let grid = TorusGrid::new(1, 256, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = GridFunction::new(grid, (0..256).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).unwrap();
        let total = f.l2_norm().powi(2);
        for lambda in 0..=3 {
            for mu in 4..=8 {
                let sum: f64 = band_scales(&f, lambda, mu, 1.0).map(|g| frequency_restrict(&f, lambda, g, mu, 1.0).l2_norm().powi(2)).sum();
                assert!(sum <= (mu + lambda + 5) as f64 * total * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn band_identity_and_empty() {
        let grid = TorusGrid::new(1, 64, 4.0).unwrap();
        let f = GridFunction::from_fn(grid, |x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 2.0 * x[0]));
        let same = frequency_restrict(&f, 0, 0, 4, 1.0);
        for (a, b) in same.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-12);
        }
        let none = frequency_restrict(&f, 0, 10, 0, 1.0);
        assert!(none.values.iter().all(|v| v.norm() < 1e-12));
    }
}

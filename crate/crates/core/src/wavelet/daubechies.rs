//! Daubechies scaling and wavelet functions from spectral factorization of
//! the half-band polynomial, refined by the cascade algorithm.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub const CASCADE_LEVELS: u32 = 12;

/// Binomial sum Σ_{k<N} C(N-1+k, k) y^k, lowest degree first.
fn halfband_poly(order: usize) -> Vec<f64> {
    (0..order)
        .map(|k| {
            let mut c = 1.0;
            for i in 1..=k {
                c = c * (order - 1 + i) as f64 / i as f64;
            }
            c
        })
        .collect()
}

fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn horner_deriv(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, (k, &c)| acc * z + c * k as f64)
}

/// All roots by Weierstrass iteration, then Newton polishing.
fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let radius = 1.0 + monic[..deg].iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let seed = Complex64::from_polar(1.0, 0.4);
    let mut z: Vec<Complex64> = (0..deg).map(|i| seed.powu(i as u32) * radius * 0.5).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            let step = horner(&monic, z[i]) / denom;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    for r in &mut z {
        for _ in 0..5 {
            let d = horner_deriv(&monic, *r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= horner(&monic, *r) / d;
        }
    }
    if z.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numeric("root finding diverged".into()));
    }
    Ok(z)
}

/// Order-N low-pass filter h_0..h_{2N-1} with Σh = √2.
pub fn daubechies_filter(order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return invalid("filter order must be positive");
    }
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    let mul = |poly: &mut Vec<Complex64>, root: Complex64| {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * root;
        }
        *poly = next;
    };
    for _ in 0..order {
        mul(&mut poly, Complex64::new(-1.0, 0.0));
    }
    for y in poly_roots(&halfband_poly(order))? {
        // y = (2 - z - 1/z)/4, keep the root outside the unit circle
        let b = Complex64::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - 4.0).sqrt();
        let (z1, z2) = ((b + disc) / 2.0, (b - disc) / 2.0);
        mul(&mut poly, if z1.norm() > z2.norm() { z1 } else { z2 });
    }
    let h: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let sum: f64 = h.iter().sum();
    Ok(h.iter().map(|c| c * std::f64::consts::SQRT_2 / sum).collect())
}

pub fn highpass(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l).map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] }).collect()
}

/// One cascade step: a_{r+1}[i] = Σ_k a_r[k] h[i - 2k].
fn refine(a: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * (a.len() - 1) + h.len()];
    for (k, &ak) in a.iter().enumerate() {
        if ak == 0.0 {
            continue;
        }
        for (t, &ht) in h.iter().enumerate() {
            out[2 * k + t] += ak * ht;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    F,
    M,
}

impl Letter {
    pub fn as_char(self) -> char {
        match self {
            Letter::F => 'F',
            Letter::M => 'M',
        }
    }

    pub fn parse(c: char) -> Option<Self> {
        match c {
            'F' => Some(Letter::F),
            'M' => Some(Letter::M),
            _ => None,
        }
    }
}

/// Scaling (letter F) and wavelet (letter M) functions of order M+1.
///
/// `father[r]` and `mother[r]` are the cascade coefficient vectors at level
/// r; the function value at i/2^r is approximated by 2^{r/2} times the
/// entry, and these vectors are exactly orthonormal under shifts by 2^r.
#[derive(Clone, Debug)]
pub struct MotherWavelets {
    pub moments: usize,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub support: f64,
    father: Vec<Vec<f64>>,
    mother: Vec<Vec<f64>>,
}

impl MotherWavelets {
    pub fn build(moments: usize) -> Result<Self> {
        if !(1..=10).contains(&moments) {
            return invalid(format!("vanishing-moment order {moments} outside 1..=10"));
        }
        let h = daubechies_filter(moments + 1)?;
        let g = highpass(&h);
        let mut father = vec![vec![1.0]];
        let mut mother = vec![Vec::new(), g.clone()];
        for r in 0..CASCADE_LEVELS as usize {
            father.push(refine(&father[r], &h));
            if r >= 1 {
                mother.push(refine(&mother[r], &h));
            }
        }
        Ok(Self { moments, support: (h.len() - 1) as f64, h, g, father, mother })
    }

    /// Support radius C0 of both functions, whose supports are [0, C0].
    pub fn c0(&self) -> f64 {
        self.support
    }

    pub fn coeffs(&self, letter: Letter, level: u32) -> &[f64] {
        match letter {
            Letter::F => &self.father[level as usize],
            Letter::M => &self.mother[level as usize],
        }
    }

    /// Value at i/2^level taken from that cascade level.
    pub fn sample(&self, letter: Letter, level: u32, i: i64) -> f64 {
        let c = self.coeffs(letter, level);
        if i < 0 || i as usize >= c.len() {
            0.0
        } else {
            2f64.powf(level as f64 / 2.0) * c[i as usize]
        }
    }

    /// Off-grid evaluation by linear interpolation on the finest level.
    pub fn eval(&self, letter: Letter, t: f64) -> f64 {
        if t < 0.0 || t > self.support {
            return 0.0;
        }
        let scale = 2f64.powi(CASCADE_LEVELS as i32);
        let x = t * scale;
        let i = x.floor();
        let frac = x - i;
        let a = self.sample(letter, CASCADE_LEVELS, i as i64);
        if frac == 0.0 {
            return a;
        }
        a * (1.0 - frac) + self.sample(letter, CASCADE_LEVELS, i as i64 + 1) * frac
    }

    /// Midpoint-rule moment Σ s_r[i] (i/2^r)^α 2^{-r} on the finest level.
    pub fn moment(&self, letter: Letter, alpha: u32) -> f64 {
        let r = CASCADE_LEVELS;
        let h = 2f64.powi(-(r as i32));
        self.coeffs(letter, r)
            .iter()
            .enumerate()
            .map(|(i, &c)| 2f64.powf(r as f64 / 2.0) * c * (i as f64 * h).powi(alpha as i32) * h)
            .sum()
    }

    pub fn l2_norm(&self, letter: Letter) -> f64 {
        let r = CASCADE_LEVELS;
        let h = 2f64.powi(-(r as i32));
        (0..self.coeffs(letter, r).len() as i64).map(|i| self.sample(letter, r, i).powi(2) * h).sum::<f64>().sqrt()
    }

    /// Quadrature inner product of two integer translates on the finest level.
    pub fn translate_inner(&self, a: Letter, b: Letter, shift: i64) -> f64 {
        let r = CASCADE_LEVELS;
        let h = 2f64.powi(-(r as i32));
        let off = shift << r;
        (0..self.coeffs(a, r).len() as i64).map(|i| self.sample(a, r, i) * self.sample(b, r, i - off) * h).sum()
    }

    pub fn to_cache_text(&self) -> String {
        let mut s = format!("{} {}\n", self.moments, CASCADE_LEVELS);
        for letter in [Letter::F, Letter::M] {
            for v in self.coeffs(letter, CASCADE_LEVELS) {
                s.push_str(&format!("{} {v:?}\n", letter.as_char()));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db2_closed_form() {
        let h = daubechies_filter(2).unwrap();
        let s3 = 3f64.sqrt();
        let d = 4.0 * std::f64::consts::SQRT_2;
        let want = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{h:?}");
        }
    }

    #[test]
    fn db3_published() {
        let want = [
            0.33267055295008263,
            0.8068915093110925,
            0.45987750211849154,
            -0.13501102001025458,
            -0.08544127388202666,
            0.035226291885709536,
        ];
        let h = daubechies_filter(3).unwrap();
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{h:?}");
        }
    }

    #[test]
    fn filters_are_orthogonal() {
        for order in 1..=11 {
            let h = daubechies_filter(order).unwrap();
            for l in 0..order {
                let s: f64 = (0..h.len() - 2 * l).map(|k| h[k] * h[k + 2 * l]).sum();
                let want = if l == 0 { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-10, "order {order}, shift {l}: {s}");
            }
        }
    }

    #[test]
    fn norms_moments_and_translates() {
        for m in [1usize, 2, 3, 5] {
            let w = MotherWavelets::build(m).unwrap();
            assert_eq!(w.c0(), (2 * m + 1) as f64);
            assert!((w.l2_norm(Letter::F) - 1.0).abs() < 1e-10);
            assert!((w.l2_norm(Letter::M) - 1.0).abs() < 1e-10);
            for alpha in 0..=m as u32 {
                let mom = w.moment(Letter::M, alpha);
                assert!(mom.abs() <= 1e-6 * w.c0().powi(alpha as i32), "M={m}, α={alpha}: {mom}");
            }
            assert!(w.translate_inner(Letter::M, Letter::M, 1).abs() < 1e-10);
            assert!(w.translate_inner(Letter::F, Letter::M, 0).abs() < 1e-10);
        }
        assert!(MotherWavelets::build(0).is_err());
        assert!(MotherWavelets::build(11).is_err());
    }

    #[test]
    fn father_integrates_to_one() {
        let w = MotherWavelets::build(3).unwrap();
        assert!((w.moment(Letter::F, 0) - 1.0).abs() < 1e-10);
        assert_eq!(w.eval(Letter::M, -0.1), 0.0);
        assert_eq!(w.eval(Letter::M, 7.5), 0.0);
    }
}

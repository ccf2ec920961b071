use crate::error::{invalid, Result};

/// Smooth cutoff exp(1 - 1/(1 - (t/ρ)^2)) on |t| < ρ, zero elsewhere.
/// Peak value 1 at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    pub rho: f64,
    /// Maximal number of integer translates covering one point.
    pub c_ov: usize,
}

impl BumpProfile {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return invalid(format!("bump radius must be positive, got {rho}"));
        }
        Ok(Self { rho, c_ov: (2.0 * rho).ceil() as usize + 1 })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let u = t / self.rho;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }

    /// Dense samples at spacing 2^{-j} over [-ρ, ρ].
    pub fn samples(&self, j: u32) -> Vec<(f64, f64)> {
        let h = 2f64.powi(-(j as i32));
        let count = (self.rho / h).floor() as i64;
        (-count..=count).map(|i| (i as f64 * h, self.eval(i as f64 * h))).collect()
    }

    /// Integer translates k whose support can meet t.
    pub fn covering(&self, t: f64) -> std::ops::RangeInclusive<i64> {
        (t - self.rho).floor() as i64..=(t + self.rho).ceil() as i64
    }
}

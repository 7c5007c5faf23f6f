//! Frequency grids and real-line quadrature rules.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing, finite, nonempty list of angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        FrequencyGrid::new(points)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Vec<f64> {
        g.points
    }
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if points.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidGrid("grid has non-finite points".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid is not strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// `points` logarithmically spaced values over `[min, max]`, both ends
    /// included.
    pub fn log(min: f64, max: f64, points: usize) -> Result<Self> {
        if !(min > 0.0 && max > min) || points < 2 {
            return Err(Error::InvalidGrid(format!(
                "log grid needs 0 < min < max and >= 2 points (got {min}, {max}, {points})"
            )));
        }
        let (a, b) = (min.log10(), max.log10());
        let step = (b - a) / (points - 1) as f64;
        Self::new((0..points).map(|k| 10f64.powf(a + step * k as f64)).collect())
    }

    /// A log grid with `per_decade` points in each decade of `[min, max]`.
    pub fn log_per_decade(min: f64, max: f64, per_decade: usize) -> Result<Self> {
        let decades = (max / min).log10();
        let points = (decades * per_decade as f64).round() as usize + 1;
        Self::log(min, max, points)
    }

    /// Mirror a positive log grid about zero: `-max..-min, [0], min..max`.
    pub fn symmetric_log(min: f64, max: f64, points: usize, include_zero: bool) -> Result<Self> {
        let pos = Self::log(min, max, points)?;
        let mut pts: Vec<f64> = pos.points.iter().rev().map(|w| -w).collect();
        if include_zero {
            pts.push(0.0);
        }
        pts.extend_from_slice(&pos.points);
        Self::new(pts)
    }

    /// Both signs of `ω` over `[1e-3, 1e3]` plus `0`; basis fits need the
    /// negative half since the parameters are complex.
    pub fn fitting() -> Self {
        Self::symmetric_log(1e-3, 1e3, 129, true).unwrap()
    }

    /// Grid used to verify rational identities: 129 log-spaced points over
    /// `[1e-3, 1e3]` plus `0`.
    pub fn verification() -> Self {
        let mut pts = vec![0.0];
        pts.extend(Self::log(1e-3, 1e3, 129).unwrap().points);
        Self::new(pts).unwrap()
    }

    /// Default grid for the physical-realizability check: 64 points per
    /// decade over `[1e-3, 1e3]`.
    pub fn pr_default() -> Self {
        Self::log_per_decade(1e-3, 1e3, 64).unwrap()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Quadrature rule for `(1/2π) ∫ f(ω) dω` over the whole real line.
///
/// Uses the map `ω = scale · tan θ` and composite Gauss–Legendre panels in
/// `θ ∈ (-π/2, π/2)`. Integrands must decay at least like `1/ω²`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn real_line(scale: f64, panels: usize, order: usize) -> Self {
        let h = PI / panels as f64;
        let cuts: Vec<f64> = (0..=panels).map(|p| -PI / 2.0 + h * p as f64).collect();
        Self::panels(scale, &cuts, order)
    }

    /// Default rule for systems whose poles have magnitudes around `scale`.
    pub fn for_scale(scale: f64) -> Self {
        Self::real_line(scale, 64, 16)
    }

    /// `for_scale` plus extra panel boundaries around every pole whose
    /// resonance (half-width `|Re λ|` at `ω = Im λ`) is narrow compared with
    /// the panel it falls in.
    pub fn adapted(scale: f64, poles: &[Complex64]) -> Self {
        let (panels, order) = (64, 16);
        let h = PI / panels as f64;
        let mut cuts: Vec<f64> = (0..=panels).map(|p| -PI / 2.0 + h * p as f64).collect();
        for p in poles {
            let (sigma, nu) = (p.re.abs(), p.im);
            let th = (nu / scale).atan();
            let width = scale * h / th.cos().powi(2);
            if sigma == 0.0 || sigma >= 0.25 * width {
                continue;
            }
            // geometric cuts out to the size of the surrounding panel
            let mut k = 0.25;
            while k * sigma < width {
                cuts.push(((nu - k * sigma) / scale).atan());
                cuts.push(((nu + k * sigma) / scale).atan());
                k *= 4.0;
            }
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        Self::panels(scale, &cuts, order)
    }

    fn panels(scale: f64, cuts: &[f64], order: usize) -> Self {
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(cuts.len() * order);
        let mut weights = Vec::with_capacity(cuts.len() * order);
        for pair in cuts.windows(2) {
            let (mid, half) = (0.5 * (pair[0] + pair[1]), 0.5 * (pair[1] - pair[0]));
            for (x, wt) in gx.iter().zip(&gw) {
                let th = mid + half * x;
                let sec = 1.0 / th.cos();
                nodes.push(scale * th.tan());
                weights.push(wt * half * scale * sec * sec / (2.0 * PI));
            }
        }
        Self { nodes, weights }
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid::new(self.nodes.clone()).expect("quadrature nodes are increasing")
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(FrequencyGrid::log(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn default_grids() {
        let v = FrequencyGrid::verification();
        assert_eq!(v.len(), 130);
        assert_eq!(v.points()[0], 0.0);
        assert!((v.max() - 1e3).abs() < 1e-9);
        assert_eq!(FrequencyGrid::pr_default().len(), 385);
    }

    #[test]
    fn adapted_rule_resolves_narrow_resonances() {
        // (1/2π) ∫ dω / ((ω - ν)² + σ²) = 1 / (2σ)
        let (sigma, nu) = (1e-3, 5.0);
        let f = |w: f64| 1.0 / ((w - nu).powi(2) + sigma * sigma);
        let exact = 0.5 / sigma;
        let q = Quadrature::adapted(1.0, &[Complex64::new(-sigma, nu)]);
        let v: Vec<f64> = q.nodes.iter().map(|&w| f(w)).collect();
        assert!((q.integrate(&v) - exact).abs() < 1e-9 * exact);
        let plain = Quadrature::for_scale(1.0);
        let v: Vec<f64> = plain.nodes.iter().map(|&w| f(w)).collect();
        assert!((plain.integrate(&v) - exact).abs() > 1e-3 * exact);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((int - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn lorentzian_integral() {
        // (1/2π) ∫ dω / (1 + ω²) = 1/2
        let q = Quadrature::for_scale(1.0);
        let v: Vec<f64> = q.nodes.iter().map(|w| 1.0 / (1.0 + w * w)).collect();
        assert!((q.integrate(&v) - 0.5).abs() < 1e-13);
    }
}

//! Weighted H∞ objective of a candidate Youla parameter.

use crate::error::Result;
use crate::exec::Exec;
use crate::grid::FrequencyGrid;
use crate::linalg;
use crate::norms::{hinf_norm, HINF_REL_TOL};
use crate::statespace::{FreqResponse, StateSpace};
use crate::synthesis::WeightedTriple;

#[derive(Debug, Clone, PartialEq)]
pub struct HinfReport {
    pub norm: f64,
    pub peak_omega: f64,
    /// `(ω, σ_max)` at each grid point, in grid order.
    pub grid_profile: Vec<(f64, f64)>,
    /// The peak lies outside the span of the profile grid.
    pub peak_outside_grid: bool,
}

/// `‖𝑻0 + 𝑻1 Q 𝑻2‖∞` with its σ_max profile on `grid`. The weights need not
/// be strictly proper here.
pub fn hinf_cost(weighted: &WeightedTriple, q: &StateSpace, grid: &FrequencyGrid) -> Result<HinfReport> {
    let g = weighted.closed_loop(q)?;
    hinf_report(&g, grid)
}

pub fn hinf_report(g: &StateSpace, grid: &FrequencyGrid) -> Result<HinfReport> {
    let h = hinf_norm(g, HINF_REL_TOL)?;
    let sig = Exec::default().try_map(grid.points(), |&w| Ok::<f64, crate::Error>(linalg::sigma_max(&g.at(w)?)))?;
    let grid_profile: Vec<(f64, f64)> = grid.points().iter().copied().zip(sig).collect();
    let grid_max = grid_profile.iter().map(|p| p.1).fold(0.0, f64::max);
    // the bisection returns a verified lower bound; never report less than
    // what the grid already shows
    let (norm, peak_omega) = if grid_max > h.norm {
        let (w, s) = grid_profile.iter().copied().fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        (s, w)
    } else {
        (h.norm, h.peak_omega)
    };
    let peak_outside_grid = !(peak_omega >= grid.min() && peak_omega <= grid.max());
    Ok(HinfReport { norm, peak_omega, grid_profile, peak_outside_grid })
}

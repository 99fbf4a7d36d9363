//! Effective resistance, Kirchhoff index and lattice scaling sweeps.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::network::{generate_hfuzz, generate_lattice, laplacian, reduced_laplacian, Network};
use crate::numerics::{eigvals_sym, pinv_laplacian, ZERO_EIG_TOL};
use crate::systems::{dapi_from_spectrum, droop_from_spectrum, slack_from_spectrum, ControllerParams};
use crate::{Error, Matrix, Result};

/// All pairwise effective resistances, from one Laplacian pseudoinverse.
#[derive(Debug, Clone)]
pub struct ResistanceMatrix {
    pinv: Matrix,
}

impl ResistanceMatrix {
    pub fn new(net: &Network) -> Result<Self> {
        Ok(ResistanceMatrix { pinv: pinv_laplacian(&laplacian(net))? })
    }

    pub fn node_count(&self) -> usize {
        self.pinv.rows()
    }

    /// `(e_i - e_j)ᵀ L† (e_i - e_j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let p = &self.pinv;
        p[(i, i)] + p[(j, j)] - 2.0 * p[(i, j)]
    }

    /// Sum over unordered pairs.
    pub fn total(&self) -> f64 {
        let n = self.node_count();
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += self.get(i, j);
            }
        }
        s
    }
}

pub fn effective_resistance(net: &Network, i: usize, j: usize) -> Result<f64> {
    let n = net.node_count();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, len: n });
        }
    }
    if i == j {
        return Err(Error::SameNode(i));
    }
    Ok(ResistanceMatrix::new(net)?.get(i, j))
}

/// Kirchhoff index `K_f = Σ_{i<j} R^eff_ij`.
pub fn kirchhoff_index(net: &Network) -> Result<f64> {
    Ok(ResistanceMatrix::new(net)?.total())
}

/// Nonzero Laplacian eigenvalues (the smallest one dropped), ascending.
fn nonzero_spectrum(eigs: &[f64]) -> Result<&[f64]> {
    let lmax = eigs.last().copied().unwrap_or(0.0);
    let thr = ZERO_EIG_TOL * lmax.max(1.0);
    let zero_modes = eigs.iter().filter(|v| v.abs() < thr).count();
    if zero_modes != 1 {
        return Err(Error::Disconnected { zero_modes });
    }
    Ok(&eigs[1..])
}

fn kstar_from_spectrum(eigs: &[f64]) -> Result<f64> {
    let n = eigs.len() as f64;
    Ok(nonzero_spectrum(eigs)?.iter().map(|l| 1.0 / l).sum::<f64>() / n)
}

/// `K* = (1/n) Σ_{i>=2} 1/λ_i`.
pub fn kstar(net: &Network) -> Result<f64> {
    kstar_from_spectrum(&eigvals_sym(&laplacian(net))?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeChange {
    Remove(usize),
    /// Multiply the edge's resistance by a factor `>= 1`.
    ScaleResistance(usize, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighReport {
    pub pairs: usize,
    /// `max (R_before - R_after)` over pairs; non-positive up to rounding.
    pub max_decrease: f64,
    /// `min (R_after - R_before)` over pairs.
    pub min_increase: f64,
    /// Largest single pairwise increase.
    pub max_increase: f64,
    /// No pair decreased by more than [`RAYLEIGH_TOL`].
    pub holds: bool,
}

pub const RAYLEIGH_TOL: f64 = 1e-10;

/// Compares every pairwise effective resistance before and after weakening one line.
pub fn rayleigh_check(net: &Network, change: EdgeChange) -> Result<RayleighReport> {
    let after = match change {
        EdgeChange::Remove(e) => net.without_edge(e)?,
        EdgeChange::ScaleResistance(e, f) => {
            if !(f >= 1.0) {
                return Err(Error::InvalidScaling(f));
            }
            net.with_scaled_edge(e, f)?
        }
    };
    let before = ResistanceMatrix::new(net)?;
    let after = ResistanceMatrix::new(&after)?;
    let n = net.node_count();
    let mut max_decrease = f64::NEG_INFINITY;
    let mut max_increase = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = after.get(i, j) - before.get(i, j);
            max_decrease = max_decrease.max(-d);
            max_increase = max_increase.max(d);
        }
    }
    Ok(RayleighReport {
        pairs: n * (n - 1) / 2,
        max_decrease,
        min_increase: -max_decrease,
        max_increase,
        holds: max_decrease <= RAYLEIGH_TOL,
    })
}

/// Network families for scaling sweeps, indexed by side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Path,
    Grid2d,
    Grid3d,
    /// h-fuzz of the `dim`-dimensional cubic lattice.
    Hfuzz { dim: usize, h: usize },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Path => "path",
            Family::Grid2d => "grid2d",
            Family::Grid3d => "grid3d",
            Family::Hfuzz { .. } => "hfuzz",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Family::Path => 1,
            Family::Grid2d => 2,
            Family::Grid3d => 3,
            Family::Hfuzz { dim, .. } => *dim,
        }
    }

    /// Family member with side length `side`; all lines have resistance `r`.
    pub fn build(&self, side: usize, r: f64) -> Result<Network> {
        let sides = vec![side; self.dimension()];
        match self {
            Family::Hfuzz { h, .. } => generate_hfuzz(&generate_lattice(&sides, r)?, *h, r),
            _ => generate_lattice(&sides, r),
        }
    }

    /// Regression axis matching the expected slack growth: `n` in one
    /// dimension, `ln n` in two, none (bounded) in three.
    pub fn fit_axis(&self) -> FitAxis {
        match self.dimension() {
            1 => FitAxis::Linear,
            2 => FitAxis::Log,
            _ => FitAxis::Bounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitAxis {
    Linear,
    Log,
    Bounded,
}

impl FitAxis {
    pub fn x(&self, n: usize) -> f64 {
        match self {
            FitAxis::Linear => n as f64,
            FitAxis::Log => libm::log(n as f64),
            FitAxis::Bounded => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub family: String,
    pub n: usize,
    pub h2_slack: f64,
    pub h2_droop: f64,
    pub h2_dapi: f64,
    pub kstar: f64,
    pub kirchhoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub axis: FitAxis,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let m = xs.len();
    if m < 2 || ys.len() != m {
        return None;
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, intercept, r_squared))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub family: Family,
    pub records: Vec<ScalingRecord>,
    /// Slack norm regressed on the family's axis; `None` for bounded families.
    pub fit: Option<LinearFit>,
}

impl SweepResult {
    /// Largest relative deviation of `h2_slack / x(n)` from its mean, where
    /// `x` is the family's fit axis (`1` for bounded families).
    pub fn normalized_slack_spread(&self) -> f64 {
        let axis = self.family.fit_axis();
        let ratios: Vec<f64> = self.records.iter().map(|r| r.h2_slack / axis.x(r.n)).collect();
        relative_spread(&ratios)
    }
}

/// `max |v / mean - 1|`.
pub fn relative_spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max)
}

/// Closed-form norms, `K*` and `K_f` for one network.
///
/// `K_f` is taken as `n² K*`; the pairwise route through
/// [`ResistanceMatrix`] agrees with it and is checked in the tests.
pub fn scaling_record(family_name: &str, net: &Network, params: &ControllerParams, ground: usize) -> Result<ScalingRecord> {
    params.validate()?;
    let n = net.node_count();
    let l = laplacian(net);
    let eigs = eigvals_sym(&l)?;
    let reduced = eigvals_sym(&reduced_laplacian(&l, ground)?)?;
    let kstar = kstar_from_spectrum(&eigs)?;
    Ok(ScalingRecord {
        family: family_name.into(),
        n,
        h2_slack: slack_from_spectrum(&reduced, n, params.c),
        h2_droop: droop_from_spectrum(&eigs, params),
        h2_dapi: dapi_from_spectrum(&eigs, params),
        kstar,
        kirchhoff: kstar * (n * n) as f64,
    })
}

/// Fits the slack norm across a family.
pub fn fit_records(family: Family, records: Vec<ScalingRecord>) -> SweepResult {
    let axis = family.fit_axis();
    let fit = match axis {
        FitAxis::Bounded => None,
        _ => {
            let xs: Vec<f64> = records.iter().map(|r| axis.x(r.n)).collect();
            let ys: Vec<f64> = records.iter().map(|r| r.h2_slack).collect();
            least_squares(&xs, &ys).map(|(slope, intercept, r_squared)| LinearFit { axis, slope, intercept, r_squared })
        }
    };
    SweepResult { family, records, fit }
}

pub fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidSize("size list is empty"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSize("sizes must be strictly ascending"));
    }
    Ok(())
}

/// One record per side length in `sizes`, lines of resistance `r`, slack
/// bus at `ground` (node 0 is the end of a path and a corner of a grid).
pub fn scaling_sweep(
    family: Family,
    sizes: &[usize],
    params: &ControllerParams,
    ground: usize,
    r: f64,
) -> Result<SweepResult> {
    check_sizes(sizes)?;
    let records = sizes
        .iter()
        .map(|&m| scaling_record(family.name(), &family.build(m, r)?, params, ground))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_records(family, records))
}

//! Scaling sweeps with one worker per network size.

use mtdc_core::resistance::{check_sizes, fit_records, scaling_record};
use mtdc_core::{ControllerParams, Family, Result, SweepResult};
use rayon::prelude::*;

/// Same records as [`mtdc_core::resistance::scaling_sweep`], computed in
/// parallel.
pub fn parallel_sweep(family: Family, sizes: &[usize], params: &ControllerParams, ground: usize, r: f64) -> Result<SweepResult> {
    check_sizes(sizes)?;
    let records = sizes
        .par_iter()
        .map(|&m| scaling_record(family.name(), &family.build(m, r)?, params, ground))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_records(family, records))
}

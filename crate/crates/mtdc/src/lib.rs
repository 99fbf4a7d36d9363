//! File formats, generator specs, parallel sweeps and the command line for
//! [`mtdc_core`].

pub mod cli;
pub mod formats;
pub mod genspec;
pub mod sweep;

#![allow(dead_code)]

use mtdc_core::network::build_network;
use mtdc_core::{ControllerParams, Network};
use rand::rngs::StdRng;
use rand::Rng;

/// Connected Erdős–Rényi graph by rejection, resistances uniform in `r_range`.
pub fn random_connected(rng: &mut StdRng, n: usize, p: f64, r_range: (f64, f64)) -> Network {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j, rng.random_range(r_range.0..=r_range.1)));
                }
            }
        }
        if let Ok(net) = build_network(n, &edges) {
            return net;
        }
    }
}

pub fn random_params(rng: &mut StdRng, lo: f64, hi: f64) -> ControllerParams {
    ControllerParams::new(
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
        rng.random_range(lo..=hi),
    )
    .unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

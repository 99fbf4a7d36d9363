//! End-to-end acceptance checks. Run with
//! `cargo test -p mtdc-core --test acceptance`; prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use common::{random_connected, random_params, rel_err};
use mtdc_core::network::{build_network, generate_lattice, laplacian};
use mtdc_core::numerics::eigvals_sym;
use mtdc_core::resistance::{kirchhoff_index, kstar, rayleigh_check, scaling_sweep, EdgeChange};
use mtdc_core::simulate::{default_step, monte_carlo_h2, monte_carlo_h2_with, slowest_time_constant, white_noise_variance};
use mtdc_core::systems::{
    assemble_dapi, assemble_droop, assemble_slack, compare_controllers, h2_closed_form_droop, h2_closed_form_slack,
    h2_lyapunov,
};
use mtdc_core::{ControllerParams, Error, Family, InitialMode, Network};
use rand::rngs::StdRng;
use rand::SeedableRng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

type Check = fn() -> Outcome;

/// The 50 random graphs shared by the first two checks.
fn oracle_cases() -> Vec<(Network, ControllerParams, usize)> {
    let mut rng = StdRng::seed_from_u64(2024);
    (0..50)
        .map(|case| {
            let n = 3 + case % 10;
            let net = random_connected(&mut rng, n, 0.5, (0.5, 2.0));
            let params = random_params(&mut rng, 0.1, 10.0);
            (net, params, case % n)
        })
        .collect()
}

fn ac1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (net, p, ground) in oracle_cases() {
        let r = compare_controllers(&net, &p, ground).unwrap();
        let pairs = [
            (h2_lyapunov(&assemble_slack(&net, &p, ground).unwrap()).unwrap(), r.values.slack),
            (h2_lyapunov(&assemble_droop(&net, &p).unwrap()).unwrap(), r.values.droop),
            (h2_lyapunov(&assemble_dapi(&net, &p).unwrap()).unwrap(), r.values.dapi),
        ];
        for (oracle, closed) in pairs {
            worst = worst.max(rel_err(closed, oracle));
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1e-6 && elapsed < Duration::from_secs(30),
        format!("max rel err {worst:.2e} (tol 1e-6), {:.2}s (limit 30s)", elapsed.as_secs_f64()),
    )
}

fn ac2_ordering_and_slack_bound() -> Outcome {
    let mut ordering_failures = 0;
    let mut bound_failures = 0;
    let mut min_gap = f64::INFINITY;
    for (net, p, ground) in oracle_cases() {
        let r = compare_controllers(&net, &p, ground).unwrap();
        if !(r.values.dapi < r.values.droop) {
            ordering_failures += 1;
        }
        min_gap = min_gap.min((r.values.droop - r.values.dapi) / r.values.droop);
        if r.values.slack < p.c * kstar(&net).unwrap() / 2.0 {
            bound_failures += 1;
        }
    }
    Outcome::new(
        ordering_failures == 0 && bound_failures == 0,
        format!(
            "dapi<droop violations {ordering_failures}/50 (min rel gap {min_gap:.2e}), slack<cK*/2 violations {bound_failures}/50"
        ),
    )
}

fn ac3_counterexample() -> Outcome {
    let net = build_network(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let p = ControllerParams::new(1.0, 0.1, 100.0, 1000.0).unwrap();
    let droop = h2_closed_form_droop(&net, &p).unwrap();
    let slack = h2_closed_form_slack(&net, &p, 0).unwrap();
    let pass = (droop - 1.871945).abs() <= 1e-6 && (slack - 0.5).abs() <= 1e-6 && droop > slack;
    Outcome::new(pass, format!("droop {droop:.9} (want 1.871945), slack {slack:.9} (want 0.5)"))
}

fn ac4_paths() -> Outcome {
    let start = Instant::now();
    let p = ControllerParams::new(1.0, 0.1, 100.0, 1000.0).unwrap();
    let sweep = scaling_sweep(Family::Path, &[10, 20, 40, 80, 160, 320], &p, 0, 1.0).unwrap();
    let worst_exact = sweep
        .records
        .iter()
        .map(|r| (r.h2_slack - (r.n - 1) as f64 / 4.0).abs())
        .fold(0.0, f64::max);
    let fit = sweep.fit.unwrap();
    let bound = p.c / (2.0 * p.kp);
    let worst_bounded = sweep.records.iter().map(|r| r.h2_droop.max(r.h2_dapi)).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let pass = worst_exact <= 1e-9
        && (fit.slope - 0.25).abs() <= 1e-6
        && fit.r_squared > 0.999999
        && worst_bounded <= bound
        && elapsed < Duration::from_secs(60);
    Outcome::new(
        pass,
        format!(
            "max |slack-(n-1)/4| {worst_exact:.2e} (tol 1e-9), slope {:.9}, R² {:.12}, max droop/dapi {worst_bounded:.6} (≤ {bound}), {:.2}s (limit 60s)",
            fit.slope,
            fit.r_squared,
            elapsed.as_secs_f64()
        ),
    )
}

fn ac5_lattices() -> Outcome {
    let start = Instant::now();
    let p = ControllerParams::default();
    let (d2, d3) = thread::scope(|s| {
        let d2 = s.spawn(|| scaling_sweep(Family::Grid2d, &[5, 10, 20, 40], &p, 0, 1.0).unwrap());
        let d3 = s.spawn(|| scaling_sweep(Family::Grid3d, &[3, 4, 5, 6], &p, 0, 1.0).unwrap());
        (d2.join().unwrap(), d3.join().unwrap())
    });
    let spread2 = d2.normalized_slack_spread();
    let spread3 = d3.normalized_slack_spread();
    let elapsed = start.elapsed();
    Outcome::new(
        spread2 <= 0.2 && spread3 <= 0.15 && elapsed < Duration::from_secs(600),
        format!(
            "2-D slack/ln n spread {:.1}% (≤ 20%), 3-D slack spread {:.1}% (≤ 15%), {:.1}s (limit 600s)",
            100.0 * spread2,
            100.0 * spread3,
            elapsed.as_secs_f64()
        ),
    )
}

fn ac6_gutman_rayleigh() -> Outcome {
    let mut rng = StdRng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut removals = 0;
    let mut violations = 0;
    for case in 0..30 {
        let n = 3 + case % 14;
        let net = random_connected(&mut rng, n, 0.5, (0.5, 2.0));
        let lam = eigvals_sym(&laplacian(&net)).unwrap();
        let spectral = n as f64 * lam[1..].iter().map(|l| 1.0 / l).sum::<f64>();
        worst = worst.max(rel_err(kirchhoff_index(&net).unwrap(), spectral));
        for e in 0..net.edges().len() {
            match rayleigh_check(&net, EdgeChange::Remove(e)) {
                Ok(report) => {
                    removals += 1;
                    if !report.holds {
                        violations += 1;
                    }
                }
                Err(Error::DisconnectsGraph(_)) => {}
                Err(other) => panic!("{other}"),
            }
        }
    }
    Outcome::new(
        worst <= 1e-8 && violations == 0,
        format!("max Gutman rel err {worst:.2e} (tol 1e-8), Rayleigh violations {violations}/{removals} removals"),
    )
}

fn ac7_monte_carlo() -> Outcome {
    let k2 = build_network(2, &[(0, 1, 1.0)]).unwrap();
    let p3 = build_network(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    let droop = assemble_droop(&k2, &ControllerParams::new(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
    let slack = assemble_slack(&p3, &ControllerParams::new(1.0, 1.0, 1.0, 1.0).unwrap(), 0).unwrap();
    let cases = [("droop K2", &droop, 1.0 / 3.0), ("slack P3", &slack, 0.5)];
    let seeds = 20u64;
    let results: Vec<(String, usize)> = thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .flat_map(|&(name, model, target)| {
                let dt = default_step(model);
                let tau = slowest_time_constant(model, dt).unwrap();
                [
                    s.spawn(move || {
                        let hits = (0..seeds)
                            .filter(|&seed| {
                                let est = monte_carlo_h2(model, 10_000, 10.0 * tau, dt, seed).unwrap();
                                (est.mean - target).abs() <= 3.0 * est.stderr
                            })
                            .count();
                        (format!("{name} initial-condition"), hits)
                    }),
                    s.spawn(move || {
                        let hits = (0..seeds)
                            .filter(|&seed| {
                                let est = white_noise_variance(model, 200.0 * tau, dt, seed).unwrap();
                                (est.mean - target).abs() <= 3.0 * est.stderr
                            })
                            .count();
                        (format!("{name} white-noise"), hits)
                    }),
                ]
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let pass = results.iter().all(|(_, hits)| *hits >= 19);
    let detail = results.iter().map(|(name, hits)| format!("{name} {hits}/20")).collect::<Vec<_>>().join(", ");
    Outcome::new(pass, format!("{detail} (need ≥ 19/20 within 3·stderr)"))
}

fn ac8_size_ratios() -> Outcome {
    let p = ControllerParams::default();
    let seed = 0;
    let energy = |n: usize, which: usize| {
        let net = generate_lattice(&[n], 1.0).unwrap();
        let model = match which {
            0 => assemble_slack(&net, &p, 0),
            1 => assemble_droop(&net, &p),
            _ => assemble_dapi(&net, &p),
        }
        .unwrap();
        let dt = default_step(&model);
        monte_carlo_h2_with(&model, 100, 30.0, dt, seed, InitialMode::PaperFig2).unwrap().mean
    };
    let ratios: Vec<f64> = thread::scope(|s| {
        let handles: Vec<_> = (0..3).map(|w| s.spawn(move || energy(100, w) / energy(10, w))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let pass = (ratios[0] / 11.0 - 1.0).abs() <= 0.3 && (ratios[1] - 1.0).abs() <= 0.3 && (ratios[2] - 1.0).abs() <= 0.3;
    Outcome::new(
        pass,
        format!(
            "n=100/n=10 ratios: slack {:.3} (11 ± 30%), droop {:.3} (1 ± 30%), dapi {:.3} (1 ± 30%)",
            ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn main() -> ExitCode {
    let checks: [(&str, Check); 8] = [
        ("AC1 closed form matches Lyapunov", ac1_oracle_equivalence),
        ("AC2 dapi < droop and slack ≥ cK*/2", ac2_ordering_and_slack_bound),
        ("AC3 P3 droop exceeds slack", ac3_counterexample),
        ("AC4 path scaling", ac4_paths),
        ("AC5 lattice scaling in 2-D and 3-D", ac5_lattices),
        ("AC6 Gutman identity and Rayleigh monotonicity", ac6_gutman_rayleigh),
        ("AC7 Monte Carlo consistency", ac7_monte_carlo),
        ("AC8 size ratios on paths", ac8_size_ratios),
    ];
    let results: Vec<(Outcome, Duration)> = thread::scope(|s| {
        let handles: Vec<_> = checks
            .iter()
            .map(|&(_, check)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let outcome = check();
                    (outcome, start.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for ((name, _), (outcome, elapsed)) in checks.iter().zip(&results) {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {} [{:.1}s]", outcome.detail, elapsed.as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

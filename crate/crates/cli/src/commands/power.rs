use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use ttcirc_core::circuit::circuit_from_unitary_mpo;
use ttcirc_core::linalg::{C64, ONE};
use ttcirc_core::sim::{run_postselected, sample_measurements, Statevector};
use ttcirc_core::tt::{TTVector, VECTOR_DENSE_LIMIT};
use ttcirc_core::zoo::diag_mpo_from_mps;
use ttcirc_core::Error as CoreError;

use super::fit_best;
use crate::config::ExperimentConfig;
use crate::error::{config_err, Result};
use crate::output::{fmt_f64, Artifacts, Table};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const SIMULATE_LIMIT: usize = 6;

pub struct PowerOutcome {
    pub profile: Vec<f64>,
    /// Largest entry of the final iterate.
    pub argmax: usize,
    /// Exhaustive scan of the profile itself.
    pub dense_argmax: usize,
    /// Most frequent Z-basis outcome of the final state (simulator mode).
    pub measured_argmax: Option<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub growth: Vec<f64>,
    pub state: TTVector,
}

/// Values of the named profile on `2^n` points.
pub fn profile(name: &str, n: usize, index: usize, seed: Option<u64>) -> Result<Vec<f64>> {
    if n > VECTOR_DENSE_LIMIT {
        return Err(CoreError::SizeGuard { what: "power profile", n, limit: VECTOR_DENSE_LIMIT }.into());
    }
    let dim = 1usize << n;
    Ok(match name {
        "ramp" => (0..dim).map(|j| j as f64).collect(),
        "delta" => {
            if index >= dim {
                return Err(config_err(format!("power.index {index} is outside 0..{dim}")));
            }
            (0..dim).map(|j| if j == index { 1.0 } else { 0.0 }).collect()
        }
        "smooth" => {
            let seed = seed.ok_or_else(|| config_err("the smooth profile is random and needs a seed"))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let modes: Vec<(f64, f64)> =
                (1..=4).map(|_| (rng.random::<f64>() * 0.2, rng.random::<f64>() * std::f64::consts::TAU)).collect();
            (0..dim)
                .map(|j| {
                    let x = j as f64 / dim as f64;
                    1.0 + modes
                        .iter()
                        .enumerate()
                        .map(|(m, (a, ph))| a * (std::f64::consts::TAU * (m + 1) as f64 * x + ph).cos() / (m + 1) as f64)
                        .sum::<f64>()
                })
                .collect()
        }
        other => return Err(config_err(format!("unknown power profile {other:?} (ramp, delta, smooth)"))),
    })
}

fn argmax_abs(v: &[C64]) -> usize {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() {
            best = i;
        }
    }
    best
}

pub fn run(cfg: &ExperimentConfig) -> Result<PowerOutcome> {
    let p = &cfg.power;
    let n = cfg.qubits.unwrap_or(8);
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let y = profile(&p.profile, n, p.index, cfg.seed)?;
    if y.iter().any(|&v| !(v >= 0.0)) || y.iter().all(|&v| v == 0.0) {
        return Err(config_err("the power method needs a non-negative, nonzero profile"));
    }
    let dense_argmax = y.iter().enumerate().fold(0, |b, (i, &v)| if v > y[b] { i } else { b });
    let ytt = TTVector::from_dense(&y.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>(), tol)?;
    let d = diag_mpo_from_mps(&ytt)?;

    let encoded = if p.simulate {
        if n > SIMULATE_LIMIT {
            return Err(CoreError::SizeGuard { what: "simulated power step", n, limit: SIMULATE_LIMIT }.into());
        }
        let seed = cfg.require_seed()?;
        let (mpo, _, _) = fit_best(&d, &cfg.fit.options(cfg.fit.rank, seed), cfg.fit.restarts)?;
        Some((circuit_from_unitary_mpo(&mpo)?, mpo.c))
    } else {
        None
    };

    // a vector of units
    let ones = TTVector::product(&vec![vec![ONE, ONE]; n])?;
    let mut x = ones.scale(C64::new(1.0 / ones.norm(), 0.0));
    let mut growth = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < p.steps {
        let rank = x.rank_profile().max_rank();
        let quantum = encoded.as_ref().filter(|_| p.switch_rank.is_none_or(|s| rank >= s));
        let next = if let Some((circ, c)) = quantum {
            let res = run_postselected(circ, &Statevector::from_tt(&x)?)?;
            growth.push(c * res.success_prob.sqrt());
            TTVector::from_dense(&res.output.amplitudes, tol)?
        } else {
            let dx = d.matvec(&x)?.round(tol, None)?;
            let g = dx.norm();
            growth.push(g);
            dx.scale(C64::new(1.0 / g, 0.0))
        };
        iterations += 1;
        let diff = next.add(&x.scale(C64::new(-1.0, 0.0)))?.norm();
        x = next;
        if diff <= p.conv_tol {
            converged = true;
            break;
        }
    }

    let dense_x = x.to_dense()?;
    let argmax = argmax_abs(&dense_x);
    let measured_argmax = if p.simulate {
        let seed = cfg.require_seed()?;
        let state = Statevector::from_amplitudes(dense_x.clone())?.normalized()?;
        let outcomes = sample_measurements(&state, &"Z".repeat(n), p.shots, seed.wrapping_add(1))?;
        let mut counts = vec![0usize; 1 << n];
        for o in &outcomes {
            counts[o.iter().fold(0, |acc, &b| (acc << 1) | b as usize)] += 1;
        }
        Some(counts.iter().enumerate().fold(0, |b, (i, &c)| if c > counts[b] { i } else { b }))
    } else {
        None
    };

    let art = Artifacts::create(&cfg.out_dir(), &cfg.hash())?;
    let mut t = Table::new(&["step", "growth"]);
    for (i, g) in growth.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_f64(*g)]);
    }
    art.write_csv("power.csv", &t)?;
    art.write_json(
        "power.json",
        json!({
            "command": "power",
            "profile": p.profile,
            "n": n,
            "argmax": argmax,
            "dense_argmax": dense_argmax,
            "measured_argmax": measured_argmax,
            "iterations": iterations,
            "converged": converged,
            "peak_probability": dense_x[argmax].norm_sqr(),
        }),
    )?;
    Ok(PowerOutcome { profile: y, argmax, dense_argmax, measured_argmax, iterations, converged, growth, state: x })
}

use rayon::prelude::*;
use serde::Serialize;
use ttcirc_core::tomo::{fidelity, fit_mps, random_model, sample_records, vqc_output_state, TomographyOptions, VQCSpec};

use super::with_pool;
use crate::config::ExperimentConfig;
use crate::error::{config_err, Result};
use crate::output::{fmt_f64, Artifacts, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomoPoint {
    pub seed: u64,
    pub n_records: usize,
    pub fidelity: f64,
    /// Best held-out negative log-likelihood; NaN for the untrained model.
    pub holdout_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedCurve {
    pub seed: u64,
    pub points: Vec<TomoPoint>,
    /// Smallest tried count whose fit reached the threshold.
    pub n_min: Option<usize>,
}

/// Records for seed `s` are drawn from a stream separate from the circuit
/// angles.
fn record_seed(s: u64) -> u64 {
    s ^ 0x5eed_0000_0000_0000
}

fn curve(n: usize, layers: usize, seed: u64, counts: &[usize], threshold: f64, stop: bool, base: &TomographyOptions) -> Result<SeedCurve> {
    let truth = vqc_output_state(&VQCSpec::random(n, layers, seed))?;
    let max_n = counts.iter().copied().max().unwrap_or(0);
    let records = sample_records(&truth, max_n, record_seed(seed))?;
    let opts = TomographyOptions { seed, ..base.clone() };
    let mut points = Vec::new();
    let mut n_min = None;
    for &count in counts {
        let (model, loss) = if count == 0 {
            (random_model(n, opts.rank, seed)?, f64::NAN)
        } else {
            let res = fit_mps(&records[..count], &opts, None)?;
            let best = res.holdout_loss.iter().copied().fold(f64::INFINITY, f64::min);
            (res.model, best)
        };
        let f = fidelity(&model, &truth)?;
        points.push(TomoPoint { seed, n_records: count, fidelity: f, holdout_loss: loss });
        if count > 0 && f >= threshold && n_min.is_none() {
            n_min = Some(count);
            if stop {
                break;
            }
        }
    }
    Ok(SeedCurve { seed, points, n_min })
}

/// Fidelity-versus-records curves for seeded VQC states.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<SeedCurve>> {
    let t = &cfg.tomo;
    let n = cfg.qubits.unwrap_or(4);
    let seeds = match &t.seeds {
        Some(s) => s.clone(),
        None => vec![cfg.require_seed()?],
    };
    let mut counts = t.record_counts.clone();
    if counts.is_empty() || seeds.is_empty() {
        return Err(config_err("tomo.record_counts and seeds must be non-empty"));
    }
    counts.sort_unstable();
    counts.dedup();
    t.fit.validate()?;

    let curves: Vec<Result<SeedCurve>> = with_pool(t.threads, || {
        seeds
            .par_iter()
            .map(|&s| curve(n, t.layers, s, &counts, t.threshold, t.stop_at_threshold, &t.fit))
            .collect()
    })?;
    let curves = curves.into_iter().collect::<Result<Vec<_>>>()?;

    let art = Artifacts::create(&cfg.out_dir(), &cfg.hash())?;
    let mut table = Table::new(&["n", "seed", "n_records", "fidelity", "holdout_loss"]);
    for c in &curves {
        for p in &c.points {
            table.push(vec![n.to_string(), p.seed.to_string(), p.n_records.to_string(), fmt_f64(p.fidelity), fmt_f64(p.holdout_loss)]);
        }
    }
    art.write_csv("tomo.csv", &table)?;
    let summary: Vec<_> = curves.iter().map(|c| serde_json::json!({ "seed": c.seed, "n_min": c.n_min })).collect();
    art.write_json(
        "tomo.json",
        serde_json::json!({
            "command": "tomo",
            "n": n,
            "layers": t.layers,
            "threshold": t.threshold,
            "sample_complexity": summary,
        }),
    )?;
    Ok(curves)
}

use rayon::prelude::*;
use serde::Serialize;
use ttcirc_core::fit::fit_unitary_mpo;
use ttcirc_core::zoo::{evolution_dense, evolution_mpo, trotter_mpo, IsingParams};
use ttcirc_core::Error as CoreError;

use super::{rel_sq_error, scaled_dense, with_pool};
use crate::config::ExperimentConfig;
use crate::error::{config_err, Result};
use crate::output::{fmt_f64, Artifacts, Table};

/// Dense reference exponentials are formed up to this many qubits.
pub const EVOLUTION_LIMIT: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankRow {
    pub dt: f64,
    pub max_rank: usize,
    pub bonds: Vec<usize>,
    pub trotter1: Option<f64>,
    pub trotter2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub dt: f64,
    pub rank: usize,
    /// `‖cA − U‖²/‖U‖²` against the exact exponential.
    pub epsilon: f64,
    /// Fit error against the truncated target MPO.
    pub epsilon_target: f64,
    pub trotter1: Option<f64>,
    pub trotter2: Option<f64>,
}

pub struct EvolutionOutcome {
    pub ranks: Vec<RankRow>,
    pub errors: Vec<ErrorRow>,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn run(cfg: &ExperimentConfig) -> Result<EvolutionOutcome> {
    let n = cfg.qubits.unwrap_or(8);
    if n > EVOLUTION_LIMIT {
        return Err(CoreError::SizeGuard { what: "evolution benchmark", n, limit: EVOLUTION_LIMIT }.into());
    }
    let ev = &cfg.evolution;
    if ev.dts.is_empty() {
        return Err(config_err("evolution.dts is empty"));
    }
    if let Some(o) = ev.orders.iter().find(|&&o| o != 1 && o != 2) {
        return Err(config_err(format!("Trotter order {o} is not supported (1 or 2)")));
    }
    let seed = if ev.ranks.is_empty() { cfg.seed.unwrap_or(0) } else { cfg.require_seed()? };
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let p = IsingParams { n, j: ev.j, g: ev.g, h: ev.h };

    let mut ranks = Vec::with_capacity(ev.dts.len());
    let mut targets = Vec::with_capacity(ev.dts.len());
    for &dt in &ev.dts {
        let exact = evolution_dense(&p, dt)?;
        let target = evolution_mpo(&p, dt, tol)?;
        let trotter = |order: u8| -> Result<Option<f64>> {
            if !ev.orders.contains(&order) {
                return Ok(None);
            }
            Ok(Some(rel_sq_error(&trotter_mpo(&p, dt, order, tol)?.to_dense()?, &exact)))
        };
        let prof = target.rank_profile();
        ranks.push(RankRow { dt, max_rank: prof.max_rank(), bonds: prof.bonds.clone(), trotter1: trotter(1)?, trotter2: trotter(2)? });
        targets.push((exact, target));
    }

    let jobs: Vec<(usize, usize)> = (0..ev.dts.len()).flat_map(|i| ev.ranks.iter().map(move |&r| (i, r))).collect();
    let fit = cfg.fit.clone();
    let fitted: Vec<Result<ErrorRow>> = with_pool(ev.threads, || {
        jobs.par_iter()
            .map(|&(i, r)| {
                let (exact, target) = &targets[i];
                let (u, rep) = fit_unitary_mpo(target, &fit.options(r, seed))?;
                Ok(ErrorRow {
                    dt: ev.dts[i],
                    rank: r,
                    epsilon: rel_sq_error(&scaled_dense(&u)?, exact),
                    epsilon_target: rep.epsilon,
                    trotter1: ranks[i].trotter1,
                    trotter2: ranks[i].trotter2,
                })
            })
            .collect()
    })?;
    let errors = fitted.into_iter().collect::<Result<Vec<_>>>()?;

    let art = Artifacts::create(&cfg.out_dir(), &cfg.hash())?;
    let mut t = Table::new(&["dt", "max_rank", "bonds", "epsilon_trotter1", "epsilon_trotter2"]);
    for r in &ranks {
        let bonds: Vec<String> = r.bonds.iter().map(usize::to_string).collect();
        t.push(vec![fmt_f64(r.dt), r.max_rank.to_string(), bonds.join(" "), opt(r.trotter1), opt(r.trotter2)]);
    }
    art.write_csv("ranks.csv", &t)?;
    let mut t = Table::new(&["dt", "rank", "epsilon_fit", "epsilon_target", "epsilon_trotter1", "epsilon_trotter2"]);
    for e in &errors {
        t.push(vec![
            fmt_f64(e.dt),
            e.rank.to_string(),
            fmt_f64(e.epsilon),
            fmt_f64(e.epsilon_target),
            opt(e.trotter1),
            opt(e.trotter2),
        ]);
    }
    art.write_csv("errors.csv", &t)?;
    Ok(EvolutionOutcome { ranks, errors })
}

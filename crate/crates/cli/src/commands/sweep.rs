use std::collections::BTreeMap;
use std::sync::Mutex;

use rayon::prelude::*;
use ttcirc_core::fit::fit_unitary_mpo;

use super::{with_pool, TargetSpec};
use crate::config::{ExperimentConfig, VERSION};
use crate::error::{config_err, Result};
use crate::output::{fmt_f64, read_csv, Artifacts, Table};

pub const FILE: &str = "sweep.csv";
pub const HEADER: [&str; 8] = ["matrix", "n", "rank", "seed", "epsilon", "avg_success", "c", "iterations"];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub rank: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub avg_success: f64,
    pub c: f64,
    pub iterations: usize,
}

type Key = (usize, usize, u64);

fn parse_row(cells: &[String]) -> Option<(Key, Vec<String>)> {
    let key = (cells[1].parse().ok()?, cells[2].parse().ok()?, cells[3].parse().ok()?);
    Some((key, cells[..HEADER.len()].to_vec()))
}

fn to_row(cells: &[String]) -> Result<SweepRow> {
    let bad = || config_err(format!("unreadable sweep row {cells:?}"));
    let f = |i: usize| cells[i].parse::<f64>().map_err(|_| bad());
    Ok(SweepRow {
        n: cells[1].parse().map_err(|_| bad())?,
        rank: cells[2].parse().map_err(|_| bad())?,
        seed: cells[3].parse().map_err(|_| bad())?,
        epsilon: f(4)?,
        avg_success: f(5)?,
        c: f(6)?,
        iterations: cells[7].parse().map_err(|_| bad())?,
    })
}

/// Grid of fits over `(n, R, seed)`. Rows already present in `sweep.csv`
/// under the same config hash are kept, so an interrupted sweep resumes
/// where it stopped. The file is rewritten in grid order at the end.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let name = cfg.require_matrix()?.to_string();
    let seeds = match &cfg.sweep.seeds {
        Some(s) => s.clone(),
        None => vec![cfg.require_seed()?],
    };
    if seeds.is_empty() || cfg.sweep.qubits.is_empty() || cfg.sweep.ranks.is_empty() {
        return Err(config_err("sweep axes must be non-empty"));
    }
    let hash = cfg.hash();
    let art = Artifacts::create(&cfg.out_dir(), &hash)?;
    let path = art.path(FILE);

    let mut done: BTreeMap<Key, Vec<String>> = BTreeMap::new();
    if path.exists() {
        let (header, rows) = read_csv(&path)?;
        if header.len() == HEADER.len() + 2 {
            for cells in rows {
                if cells.len() == HEADER.len() + 2 && cells[HEADER.len()] == hash && cells[HEADER.len() + 1] == VERSION {
                    if let Some((k, v)) = parse_row(&cells) {
                        done.insert(k, v);
                    }
                }
            }
        }
    }
    // start the file afresh from the rows we trust
    let mut kept = Table::new(&HEADER);
    kept.rows = done.values().cloned().collect();
    art.write_csv(FILE, &kept)?;

    let mut grid: Vec<Key> = Vec::new();
    for &n in &cfg.sweep.qubits {
        for &r in &cfg.sweep.ranks {
            for &s in &seeds {
                grid.push((n, r, s));
            }
        }
    }
    let todo: Vec<Key> = grid.iter().filter(|k| !done.contains_key(k)).copied().collect();
    let sink = Mutex::new(done);
    let fit = cfg.fit.clone();
    let results: Vec<Result<()>> = with_pool(cfg.sweep.threads, || {
        todo.par_iter()
            .map(|&(n, r, s)| {
                let m = TargetSpec::from_config(cfg, n)?.build()?;
                let (_, rep) = fit_unitary_mpo(&m, &fit.options(r, s))?;
                let cells = vec![
                    name.clone(),
                    n.to_string(),
                    r.to_string(),
                    s.to_string(),
                    fmt_f64(rep.epsilon),
                    fmt_f64(rep.avg_success),
                    fmt_f64(rep.c),
                    rep.iterations.to_string(),
                ];
                let mut guard = sink.lock().expect("sweep sink");
                art.append_csv_row(FILE, &HEADER, &cells)?;
                guard.insert((n, r, s), cells);
                Ok(())
            })
            .collect()
    })?;
    results.into_iter().collect::<Result<Vec<()>>>()?;
    let done = sink.into_inner().expect("sweep sink");

    let mut table = Table::new(&HEADER);
    let mut rows = Vec::with_capacity(grid.len());
    for k in &grid {
        let cells = &done[k];
        rows.push(to_row(cells)?);
        table.push(cells.clone());
    }
    art.write_csv(FILE, &table)?;
    Ok(rows)
}

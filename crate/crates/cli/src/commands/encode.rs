use std::path::PathBuf;

use serde_json::json;
use ttcirc_core::circuit::{circuit_from_unitary_mpo, QuantumCircuit};
use ttcirc_core::fit::{FitReport, UnitaryMPO};
use ttcirc_core::io::unitary_mpo_to_json;

use super::{fit_best, scaled_dense, RunSummary, TargetSpec};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{fmt_f64, Artifacts, Table};

/// Largest n for which the element-wise error map is written.
pub const HEATMAP_LIMIT: usize = 6;

pub struct EncodeOutcome {
    pub mpo: UnitaryMPO,
    pub report: FitReport,
    pub runs: Vec<RunSummary>,
    pub circuit: QuantumCircuit,
    pub dir: PathBuf,
}

pub fn run(cfg: &ExperimentConfig) -> Result<EncodeOutcome> {
    let n = cfg.qubits.unwrap_or(5);
    let spec = TargetSpec::from_config(cfg, n)?;
    let seed = cfg.require_seed()?;
    let m = spec.build()?;
    let (mpo, report, runs) = fit_best(&m, &cfg.fit.options(cfg.fit.rank, seed), cfg.fit.restarts)?;
    let circuit = circuit_from_unitary_mpo(&mpo)?;

    let art = Artifacts::create(&cfg.out_dir(), &cfg.hash())?;
    art.write_json_text("mpo.json", &unitary_mpo_to_json(&mpo)?)?;
    art.write_json_text("circuit.json", &circuit.to_json()?)?;

    let mut hist = Table::new(&["iteration", "epsilon", "c"]);
    for (i, (e, c)) in report.cost_history.iter().zip(&report.c_history).enumerate() {
        hist.push(vec![i.to_string(), fmt_f64(*e), fmt_f64(*c)]);
    }
    art.write_csv("history.csv", &hist)?;

    if n <= HEATMAP_LIMIT {
        let target = m.to_dense()?;
        let diff = scaled_dense(&mpo)? - &target;
        let scale = target.norm();
        let mut heat = Table::new(&["row", "col", "rel_error"]);
        for i in 0..diff.nrows() {
            for j in 0..diff.ncols() {
                heat.push(vec![i.to_string(), j.to_string(), fmt_f64(diff[(i, j)].norm() / scale)]);
            }
        }
        art.write_csv("heatmap.csv", &heat)?;
    }

    art.write_json(
        "report.json",
        json!({
            "command": "encode",
            "target": spec,
            "rank": mpo.rank,
            "ancillas": mpo.ancillas(),
            "epsilon": report.epsilon,
            "c": report.c,
            "avg_success": report.avg_success,
            "iterations": report.iterations,
            "best_seed": report.seed,
            "isometry_deviation": mpo.isometry_deviation(),
            "runs": runs,
            "circuit": { "wires": circuit.n_wires(), "gates": circuit.gates.len() },
        }),
    )?;
    Ok(EncodeOutcome { mpo, report, runs, circuit, dir: art.dir })
}

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use ttcirc_core::circuit::QuantumCircuit;
use ttcirc_core::io::unitary_mpo_from_json;
use ttcirc_core::linalg::max_abs_diff;
use ttcirc_core::sim::{circuit_to_matrix, haar_random_state, run_postselected, run_sampled, spectral_success_prob};
use ttcirc_core::Error as CoreError;

use super::{rel_sq_error, scaled_dense, TargetSpec};
use crate::config::ExperimentConfig;
use crate::error::{config_err, CliError, Result};
use crate::output::Artifacts;

/// Largest system size compared densely.
pub const VERIFY_LIMIT: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub matrix: String,
    pub n: usize,
    /// `max |block − A|` between the post-selected circuit block and the MPO.
    pub circuit_vs_mpo: f64,
    /// `max |cA − M| / ‖M‖_F`.
    pub mpo_vs_target: f64,
    pub epsilon: f64,
    /// `‖Aψ‖²` for a seeded Haar input, from the MPO and from the circuit.
    pub exact_success_mpo: f64,
    pub exact_success_circuit: f64,
    pub avg_success: f64,
    pub shots: u64,
    pub accepted: u64,
    pub sampled_success: f64,
    /// `|sampled − exact| / σ` with `σ² = p(1 − p)/shots`.
    pub sampled_z: f64,
    pub within_3_sigma: bool,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))
}

/// Checks an `encode` output directory.
pub fn run(cfg: &ExperimentConfig, artifacts: &Path) -> Result<VerifyReport> {
    let seed = cfg.require_seed()?;
    let meta: Value = serde_json::from_str(&read(artifacts, "report.json")?)?;
    let spec: TargetSpec = serde_json::from_value(meta["target"].clone())
        .map_err(|e| config_err(format!("report.json has no usable \"target\": {e}")))?;
    let n = spec.n;
    if n > VERIFY_LIMIT {
        return Err(CoreError::SizeGuard { what: "verified operator", n, limit: VERIFY_LIMIT }.into());
    }
    let mpo = unitary_mpo_from_json(&read(artifacts, "mpo.json")?)?;
    let circuit = QuantumCircuit::from_json(&read(artifacts, "circuit.json")?)?;
    if mpo.mpo.n() != n || circuit.n_system != n {
        return Err(config_err("artifacts disagree on the number of qubits"));
    }

    let target = spec.build()?.to_dense()?;
    let a = mpo.mpo.to_dense()?;
    let block = circuit_to_matrix(&circuit)?;
    let ca = scaled_dense(&mpo)?;
    let mpo_vs_target = max_abs_diff(&ca, &target) / target.norm();

    let psi = haar_random_state(n, seed);
    let exact_success_mpo = spectral_success_prob(&a, &psi.amplitudes)?.success_prob;
    let exact_success_circuit = run_postselected(&circuit, &psi)?.success_prob;
    let shots = cfg.verify.shots;
    let sampled = run_sampled(&circuit, &psi, shots, seed.wrapping_add(1))?;
    let p = exact_success_circuit;
    let sampled_success = sampled.shots_accepted as f64 / shots.max(1) as f64;
    let sigma = (p * (1.0 - p) / shots.max(1) as f64).sqrt();
    let gap = (sampled_success - p).abs();
    let sampled_z = if sigma > 0.0 { gap / sigma } else if gap == 0.0 { 0.0 } else { f64::INFINITY };

    let report = VerifyReport {
        matrix: spec.matrix.clone(),
        n,
        circuit_vs_mpo: max_abs_diff(&block, &a),
        mpo_vs_target,
        epsilon: rel_sq_error(&ca, &target),
        exact_success_mpo,
        exact_success_circuit,
        avg_success: a.norm_squared() / (1u64 << n) as f64,
        shots,
        accepted: sampled.shots_accepted,
        sampled_success,
        sampled_z,
        within_3_sigma: sampled_z <= 3.0,
    };
    let out = cfg.out.clone().unwrap_or_else(|| artifacts.to_path_buf());
    let art = Artifacts::create(&out, &cfg.hash())?;
    art.write_json("verify.json", serde_json::to_value(&report)?)?;
    Ok(report)
}

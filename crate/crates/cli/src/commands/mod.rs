pub mod encode;
pub mod evolution;
pub mod heat;
pub mod power;
pub mod sweep;
pub mod tomo;
pub mod verify;

use serde::{Deserialize, Serialize};
use ttcirc_core::fit::{fit_unitary_mpo, FitOptions, FitReport, UnitaryMPO};
use ttcirc_core::linalg::{CMat, C64};
use ttcirc_core::tt::TTMatrix;
use ttcirc_core::zoo::{self, IsingParams};

use crate::config::ExperimentConfig;
use crate::error::{config_err, Result};

pub const MATRICES: [&str; 8] = ["diag", "laplace", "mct", "identity", "ising", "evolution", "trotter1", "trotter2"];

/// Tolerance for building evolution and Trotter targets when none is given.
pub const TARGET_TOL: f64 = 1e-10;

/// A named target operator with everything needed to rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub matrix: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ising: Option<IsingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl TargetSpec {
    /// Reads the matrix name and, for Hamiltonian targets, the Ising
    /// couplings, the first `evolution.dts` entry and `tol`.
    pub fn from_config(cfg: &ExperimentConfig, n: usize) -> Result<Self> {
        let matrix = cfg.require_matrix()?.to_string();
        if !MATRICES.contains(&matrix.as_str()) {
            return Err(config_err(format!("unknown matrix {matrix:?}; expected one of {MATRICES:?}")));
        }
        let ev = &cfg.evolution;
        let hamiltonian = matches!(matrix.as_str(), "ising" | "evolution" | "trotter1" | "trotter2");
        let timed = hamiltonian && matrix != "ising";
        let dt = if timed {
            Some(*ev.dts.first().ok_or_else(|| config_err("evolution targets need a time step (--dt)"))?)
        } else {
            None
        };
        Ok(TargetSpec {
            matrix,
            n,
            ising: hamiltonian.then_some(IsingParams { n, j: ev.j, g: ev.g, h: ev.h }),
            dt,
            tol: timed.then(|| cfg.tol.unwrap_or(TARGET_TOL)),
        })
    }

    pub fn build(&self) -> Result<TTMatrix> {
        let n = self.n;
        let p = self.ising.unwrap_or(IsingParams::new(n));
        let dt = || self.dt.ok_or_else(|| config_err(format!("{} needs dt", self.matrix)));
        let tol = self.tol.unwrap_or(TARGET_TOL);
        Ok(match self.matrix.as_str() {
            "diag" => zoo::diag_linear_mpo(n)?,
            "laplace" => zoo::laplace_mpo(n)?,
            "mct" => zoo::mct_mpo(n)?,
            "identity" => zoo::identity_mpo(n)?,
            "ising" => zoo::ising_mpo(&p)?,
            "evolution" => zoo::evolution_mpo(&p, dt()?, tol)?,
            "trotter1" => zoo::trotter_mpo(&p, dt()?, 1, tol)?,
            "trotter2" => zoo::trotter_mpo(&p, dt()?, 2, tol)?,
            other => return Err(config_err(format!("unknown matrix {other:?}; expected one of {MATRICES:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub epsilon: f64,
    pub c: f64,
    pub avg_success: f64,
    pub iterations: usize,
}

impl From<&FitReport> for RunSummary {
    fn from(r: &FitReport) -> Self {
        RunSummary { seed: r.seed, epsilon: r.epsilon, c: r.c, avg_success: r.avg_success, iterations: r.iterations }
    }
}

/// Fits from `restarts` consecutive seeds and keeps the lowest error; ties
/// go to the earlier seed.
pub fn fit_best(
    m: &TTMatrix,
    base: &FitOptions,
    restarts: usize,
) -> Result<(UnitaryMPO, FitReport, Vec<RunSummary>)> {
    if restarts == 0 {
        return Err(config_err("restarts must be >= 1"));
    }
    let mut best: Option<(UnitaryMPO, FitReport)> = None;
    let mut runs = Vec::with_capacity(restarts);
    for i in 0..restarts as u64 {
        let opts = FitOptions { seed: base.seed.wrapping_add(i), ..base.clone() };
        let (u, rep) = fit_unitary_mpo(m, &opts)?;
        runs.push(RunSummary::from(&rep));
        if best.as_ref().is_none_or(|(_, b)| rep.epsilon < b.epsilon) {
            best = Some((u, rep));
        }
    }
    let (u, rep) = best.expect("restarts >= 1");
    Ok((u, rep, runs))
}

/// `‖X − Y‖²_F / ‖Y‖²_F`.
pub fn rel_sq_error(x: &CMat, y: &CMat) -> f64 {
    (x - y).norm_squared() / y.norm_squared()
}

pub fn scaled_dense(u: &UnitaryMPO) -> Result<CMat> {
    Ok(u.mpo.to_dense()? * C64::new(u.c, 0.0))
}

/// Runs `f` on a pool with `threads` workers (0 picks the default).
pub(crate) fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

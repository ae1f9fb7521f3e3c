use serde::Serialize;
use serde_json::json;
use ttcirc_core::circuit::{circuit_from_unitary_mpo, QuantumCircuit};
use ttcirc_core::linalg::{C64, ONE};
use ttcirc_core::sim::{run_postselected, Statevector};
use ttcirc_core::tt::{TTMatrix, TTVector, VECTOR_DENSE_LIMIT};
use ttcirc_core::zoo::{identity_mpo, laplace_mpo};
use ttcirc_core::Error as CoreError;

use super::fit_best;
use crate::config::{ExperimentConfig, HeatConfig};
use crate::error::{config_err, Result};
use crate::output::{fmt_f64, Artifacts, Table};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Circuit-routed steps are simulated densely up to this size.
pub const SIMULATE_LIMIT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub n: usize,
    pub dx: f64,
    pub dt: f64,
    pub k2: f64,
    /// `(Δt/Δx²)·k²`; explicit stepping is stable up to 1/2.
    pub ratio: f64,
}

impl Grid {
    pub fn new(n: usize, h: &HeatConfig) -> Result<Self> {
        let dx = h.dx.unwrap_or(1.0 / ((1u64 << n) as f64 + 1.0));
        if !(dx > 0.0 && h.k2 > 0.0) {
            return Err(config_err("heat.dx and heat.k2 must be positive"));
        }
        let dt = h.dt.unwrap_or(0.4 * dx * dx / h.k2);
        if !(dt > 0.0) {
            return Err(config_err("heat.dt must be positive"));
        }
        Ok(Grid { n, dx, dt, k2: h.k2, ratio: dt / (dx * dx) * h.k2 })
    }

    pub fn unstable(&self) -> bool {
        self.ratio > 0.5
    }

    /// Grid point `j` sits at `x = (j + 1)·dx`.
    pub fn x(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.dx
    }
}

/// Explicit step `I − (Δt/Δx²)k²·M_L`, with `M_L = tridiag(−1, 2, −1)`.
pub fn step_operator(grid: &Grid) -> Result<TTMatrix> {
    let lap = laplace_mpo(grid.n)?.scale(C64::new(-grid.ratio, 0.0));
    Ok(identity_mpo(grid.n)?.add(&lap)?.round(1e-14, None)?)
}

/// `sin(πx)` sampled on the grid, built as a rank-2 train for any `n`.
fn sine(grid: &Grid) -> Result<TTVector> {
    let theta = std::f64::consts::PI * grid.dx;
    let n = grid.n;
    let wave = |sign: f64| -> Result<TTVector> {
        let locals: Vec<Vec<C64>> =
            (0..n).map(|k| vec![ONE, C64::from_polar(1.0, sign * theta * (1u64 << (n - 1 - k)) as f64)]).collect();
        Ok(TTVector::product(&locals)?.scale(C64::from_polar(1.0, sign * theta)))
    };
    let diff = wave(1.0)?.add(&wave(-1.0)?.scale(C64::new(-1.0, 0.0)))?;
    Ok(diff.scale(C64::new(0.0, -0.5)).round(1e-14, None)?)
}

pub fn initial_state(grid: &Grid, name: &str) -> Result<TTVector> {
    let n = grid.n;
    match name {
        "sin" => sine(grid),
        "zero" => Ok(TTVector::product(&vec![vec![C64::new(0.0, 0.0); 2]; n])?),
        "gauss" => {
            if n > VECTOR_DENSE_LIMIT {
                return Err(CoreError::SizeGuard { what: "gauss initial condition", n, limit: VECTOR_DENSE_LIMIT }.into());
            }
            let dense: Vec<C64> = (0..1usize << n)
                .map(|j| C64::new((-(grid.x(j) - 0.5).powi(2) / 0.02).exp(), 0.0))
                .collect();
            Ok(TTVector::from_dense(&dense, 1e-14)?)
        }
        other => Err(config_err(format!("unknown initial condition {other:?} (sin, gauss, zero)"))),
    }
}

pub struct HeatOutcome {
    pub grid: Grid,
    pub norms: Vec<f64>,
    pub ranks: Vec<usize>,
    pub routes: Vec<&'static str>,
    pub state: TTVector,
    pub fit_epsilon: Option<f64>,
}

/// One circuit-routed step: `B·u ≈ c·√p·‖u‖·out`.
fn circuit_step(circ: &QuantumCircuit, c: f64, u: &TTVector, tol: f64) -> Result<TTVector> {
    let nrm = u.norm();
    let psi = Statevector::from_tt(u)?.normalized()?;
    let res = run_postselected(circ, &psi)?;
    let scale = C64::new(c * res.success_prob.sqrt() * nrm, 0.0);
    let amps: Vec<C64> = res.output.amplitudes.iter().map(|z| z * scale).collect();
    Ok(TTVector::from_dense(&amps, tol)?)
}

pub fn run(cfg: &ExperimentConfig) -> Result<HeatOutcome> {
    let h = &cfg.heat;
    let n = cfg.qubits.unwrap_or(6);
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    let grid = Grid::new(n, h)?;
    if grid.unstable() {
        eprintln!(
            "{}",
            json!({ "warning": { "kind": "cfl", "message": format!("(dt/dx^2)k^2 = {} exceeds 1/2; the iteration is unstable", grid.ratio) } })
        );
    }
    let b = step_operator(&grid)?;
    let mut u = initial_state(&grid, &h.initial)?;

    let encoded = if h.simulate {
        if n > SIMULATE_LIMIT {
            return Err(CoreError::SizeGuard { what: "simulated heat step", n, limit: SIMULATE_LIMIT }.into());
        }
        let seed = cfg.require_seed()?;
        let (mpo, rep, _) = fit_best(&b, &cfg.fit.options(cfg.fit.rank, seed), cfg.fit.restarts)?;
        Some((circuit_from_unitary_mpo(&mpo)?, mpo.c, rep.epsilon))
    } else {
        None
    };

    let mut norms = vec![u.norm()];
    let mut ranks = vec![u.rank_profile().max_rank()];
    let mut routes = vec!["init"];
    for _ in 0..h.steps {
        let rank = u.rank_profile().max_rank();
        let quantum = encoded.as_ref().filter(|_| h.switch_rank.is_none_or(|s| rank >= s));
        if u.norm() == 0.0 {
            routes.push("tt");
        } else if let Some((circ, c, _)) = quantum {
            u = circuit_step(circ, *c, &u, tol)?;
            routes.push("circuit");
        } else {
            u = b.matvec(&u)?.round(tol, None)?;
            routes.push("tt");
        }
        norms.push(u.norm());
        ranks.push(u.rank_profile().max_rank());
    }

    let art = Artifacts::create(&cfg.out_dir(), &cfg.hash())?;
    let mut t = Table::new(&["step", "norm", "rank", "route"]);
    for (i, ((nv, r), route)) in norms.iter().zip(&ranks).zip(&routes).enumerate() {
        t.push(vec![i.to_string(), fmt_f64(*nv), r.to_string(), route.to_string()]);
    }
    art.write_csv("heat.csv", &t)?;
    if n <= VECTOR_DENSE_LIMIT {
        let mut t = Table::new(&["index", "x", "u"]);
        for (j, z) in u.to_dense()?.iter().enumerate() {
            t.push(vec![j.to_string(), fmt_f64(grid.x(j)), fmt_f64(z.re)]);
        }
        art.write_csv("profile.csv", &t)?;
    }
    let fit_epsilon = encoded.as_ref().map(|e| e.2);
    art.write_json(
        "heat.json",
        json!({
            "command": "heat",
            "grid": grid,
            "cfl_warning": grid.unstable(),
            "initial": h.initial,
            "steps": h.steps,
            "final_norm": norms.last(),
            "max_rank": ranks.iter().max(),
            "circuit_steps": routes.iter().filter(|r| **r == "circuit").count(),
            "fit_epsilon": fit_epsilon,
        }),
    )?;
    Ok(HeatOutcome { grid, norms, ranks, routes, state: u, fit_epsilon })
}

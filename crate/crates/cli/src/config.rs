//! Run configuration: one TOML file per run, with command-line flags layered
//! on top. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use ttcirc_core::fit::{FitOptions, InitStrategy};
use ttcirc_core::tomo::TomographyOptions;

use crate::error::{config_err, CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Encode,
    Verify,
    Sweep,
    Evolution,
    Heat,
    Power,
    Tomo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Encode => "encode",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Evolution => "evolution",
            Command::Heat => "heat",
            Command::Power => "power",
            Command::Tomo => "tomo",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When set, must agree with the subcommand.
    pub command: Option<Command>,
    pub matrix: Option<String>,
    pub qubits: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub evolution: EvolutionSection,
    pub heat: HeatConfig,
    pub power: PowerSection,
    pub tomo: TomoSection,
    pub verify: VerifySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub rank: usize,
    pub iters: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub c_update_every: usize,
    pub convergence_tol: f64,
    pub init: InitStrategy,
    /// Hold `c` fixed (in units of the target) instead of refitting it.
    pub fixed_c: Option<f64>,
    /// Fits from seeds `seed, seed+1, ...`; the lowest error is kept.
    pub restarts: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitOptions::default();
        FitSection {
            rank: 16,
            iters: d.max_iters,
            learning_rate: d.learning_rate,
            final_learning_rate: d.final_learning_rate,
            c_update_every: d.c_update_every,
            convergence_tol: d.convergence_tol,
            init: d.init,
            fixed_c: None,
            restarts: 1,
        }
    }
}

impl FitSection {
    pub fn options(&self, rank: usize, seed: u64) -> FitOptions {
        FitOptions {
            rank,
            max_iters: self.iters,
            learning_rate: self.learning_rate,
            final_learning_rate: self.final_learning_rate,
            c_update_every: self.c_update_every,
            convergence_tol: self.convergence_tol,
            seed,
            init: self.init,
            fixed_c: self.fixed_c,
            ..FitOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub qubits: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Defaults to the top-level seed.
    pub seeds: Option<Vec<u64>>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { qubits: (4..=10).collect(), ranks: vec![2, 4, 8, 16], seeds: None, threads: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub dts: Vec<f64>,
    /// Unitary MPO ranks to fit; empty records the rank curve only.
    pub ranks: Vec<usize>,
    /// Trotter orders to benchmark (1 and/or 2).
    pub orders: Vec<u8>,
    pub j: f64,
    pub g: f64,
    pub h: f64,
    pub threads: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            dts: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0],
            ranks: vec![4, 8, 16],
            orders: vec![1, 2],
            j: 2.0,
            g: 1.0,
            h: 1.0,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatConfig {
    /// Diffusivity `k²`.
    pub k2: f64,
    /// Defaults to 0.4·dx²/k², inside the stability limit.
    pub dt: Option<f64>,
    /// Defaults to 1/(2^n + 1): 2^n interior points of the unit interval.
    pub dx: Option<f64>,
    pub steps: usize,
    /// `sin`, `gauss` or `zero`.
    pub initial: String,
    /// Route matvecs through the simulated encoded circuit (n ≤ 6).
    pub simulate: bool,
    /// With `simulate`, only states of at least this TT rank take the
    /// circuit route; unset sends every step.
    pub switch_rank: Option<usize>,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            k2: 1.0,
            dt: None,
            dx: None,
            steps: 100,
            initial: "sin".into(),
            simulate: false,
            switch_rank: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    /// `ramp`, `delta` or `smooth`.
    pub profile: String,
    /// Position of the spike for `delta`.
    pub index: usize,
    pub steps: usize,
    /// Stop once successive iterates differ by less than this in norm.
    pub conv_tol: f64,
    pub simulate: bool,
    pub switch_rank: Option<usize>,
    /// Z-basis shots used to read out the final state in simulator mode.
    pub shots: usize,
}

impl Default for PowerSection {
    fn default() -> Self {
        PowerSection {
            profile: "ramp".into(),
            index: 0,
            steps: 50,
            conv_tol: 1e-12,
            simulate: false,
            switch_rank: None,
            shots: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoSection {
    pub layers: usize,
    /// Record counts tried in increasing order; 0 reports the untrained
    /// initialization.
    pub record_counts: Vec<usize>,
    pub seeds: Option<Vec<u64>>,
    pub threshold: f64,
    /// Stop a seed at the first count whose fidelity reaches `threshold`.
    pub stop_at_threshold: bool,
    pub threads: usize,
    pub fit: TomographyOptions,
}

impl Default for TomoSection {
    fn default() -> Self {
        TomoSection {
            layers: 2,
            record_counts: (0..17).map(|k| (250.0 * 2f64.powf(k as f64 / 2.0)).round() as usize).collect(),
            seeds: None,
            threshold: 0.99,
            stop_at_threshold: true,
            threads: 0,
            fit: TomographyOptions { rank: 4, ..TomographyOptions::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub shots: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { shots: 10_000 }
    }
}

/// Command-line overrides. List-valued flags take comma-separated values;
/// where the target is a scalar exactly one value is allowed.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct Overrides {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// diag, laplace, mct, identity, ising, evolution, trotter1 or trotter2
    #[arg(long)]
    pub matrix: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub qubits: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub rank: Vec<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub dt: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub order: Vec<u8>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub shots: Vec<usize>,
}

fn single<T: Copy>(flag: &str, values: &[T]) -> Result<Option<T>> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(config_err(format!("--{flag} takes a single value for this command"))),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Reads `--config` (if any) and layers the flags on top.
    pub fn resolve(cmd: Command, flags: &Overrides) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(cmd, flags)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, cmd: Command, f: &Overrides) -> Result<()> {
        if let Some(c) = self.command {
            if c != cmd {
                return Err(config_err(format!("config is for `{}`, not `{}`", c.name(), cmd.name())));
            }
        }
        self.command = Some(cmd);
        if let Some(m) = &f.matrix {
            self.matrix = Some(m.clone());
        }
        if f.seed.is_some() {
            self.seed = f.seed;
        }
        if f.out.is_some() {
            self.out = f.out.clone();
        }
        if f.tol.is_some() {
            self.tol = f.tol;
        }
        if let Some(it) = f.iters {
            match cmd {
                Command::Tomo => self.tomo.fit.max_epochs = it,
                _ => self.fit.iters = it,
            }
        }
        if let Some(l) = f.layers {
            self.tomo.layers = l;
        }
        if !f.order.is_empty() {
            self.evolution.orders = f.order.clone();
        }
        match cmd {
            Command::Sweep => {
                if !f.qubits.is_empty() {
                    self.sweep.qubits = f.qubits.clone();
                }
                if !f.rank.is_empty() {
                    self.sweep.ranks = f.rank.clone();
                }
                if let Some(dt) = single("dt", &f.dt)? {
                    self.evolution.dts = vec![dt];
                }
            }
            Command::Evolution => {
                if let Some(q) = single("qubits", &f.qubits)? {
                    self.qubits = Some(q);
                }
                if !f.rank.is_empty() {
                    self.evolution.ranks = f.rank.clone();
                }
                if !f.dt.is_empty() {
                    self.evolution.dts = f.dt.clone();
                }
            }
            _ => {
                if let Some(q) = single("qubits", &f.qubits)? {
                    self.qubits = Some(q);
                }
                if let Some(r) = single("rank", &f.rank)? {
                    match cmd {
                        Command::Tomo => self.tomo.fit.rank = r,
                        _ => self.fit.rank = r,
                    }
                }
                if let Some(dt) = single("dt", &f.dt)? {
                    match cmd {
                        Command::Heat => self.heat.dt = Some(dt),
                        _ => self.evolution.dts = vec![dt],
                    }
                }
            }
        }
        if !f.shots.is_empty() {
            match cmd {
                Command::Tomo => self.tomo.record_counts = f.shots.clone(),
                Command::Power => self.power.shots = single("shots", &f.shots)?.unwrap_or(self.power.shots),
                _ => self.verify.shots = single("shots", &f.shots)?.map_or(self.verify.shots, |s| s as u64),
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// the output path left out.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("out");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            let cmd = self.command.map_or("this command", Command::name);
            config_err(format!("`{cmd}` is stochastic and needs a seed (--seed or `seed =`)"))
        })
    }

    pub fn require_matrix(&self) -> Result<&str> {
        self.matrix.as_deref().ok_or_else(|| config_err("a matrix name is required (--matrix)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_sections() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            command = "encode"
            matrix = "laplace"
            qubits = 5
            seed = 7
            [fit]
            rank = 8
            fixed_c = 2.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.matrix.as_deref(), Some("laplace"));
        assert_eq!(cfg.fit.rank, 8);
        assert_eq!(cfg.fit.fixed_c, Some(2.5));
        assert_eq!(cfg.fit.iters, 5000);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("qbits = 3").is_err());
        assert!(ExperimentConfig::from_toml("[fit]\nrnk = 3").is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = ExperimentConfig::from_toml("qubits = 5\nseed = 1\n[fit]\nrank = 8").unwrap();
        let flags = Overrides { qubits: vec![6], rank: vec![4], seed: Some(3), ..Default::default() };
        cfg.apply(Command::Encode, &flags).unwrap();
        assert_eq!((cfg.qubits, cfg.fit.rank, cfg.seed), (Some(6), 4, Some(3)));

        let mut sweep = ExperimentConfig::default();
        let flags = Overrides { qubits: vec![4, 10], rank: vec![8], ..Default::default() };
        sweep.apply(Command::Sweep, &flags).unwrap();
        assert_eq!(sweep.sweep.qubits, vec![4, 10]);

        let flags = Overrides { qubits: vec![4, 10], ..Default::default() };
        assert!(ExperimentConfig::default().apply(Command::Encode, &flags).is_err());
    }

    #[test]
    fn command_mismatch_rejected() {
        let mut cfg = ExperimentConfig::from_toml("command = \"heat\"").unwrap();
        assert!(cfg.apply(Command::Encode, &Overrides::default()).is_err());
    }

    #[test]
    fn hash_ignores_output_path() {
        let a = ExperimentConfig { seed: Some(1), out: Some("a".into()), ..Default::default() };
        let b = ExperimentConfig { out: Some("b".into()), ..a.clone() };
        let c = ExperimentConfig { seed: Some(2), ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 16);
    }
}

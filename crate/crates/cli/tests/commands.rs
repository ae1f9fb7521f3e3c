use std::fs;
use std::path::Path;
use std::process::Command as Process;

use serde_json::Value;
use ttcirc::commands::{encode, evolution, heat, power, sweep, tomo, verify};
use ttcirc::output::read_csv;
use ttcirc::ExperimentConfig;
use ttcirc_core::tomo::{fidelity, random_model, vqc_output_state, VQCSpec};

fn config(text: &str, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(text).unwrap();
    cfg.out = Some(out.to_path_buf());
    cfg
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_ttcirc"))
}

// ---------------------------------------------------------------------------
// encode / verify

#[test]
fn identity_verifies_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("command = 'encode'\nmatrix = 'identity'\nqubits = 3\nseed = 0\n[fit]\nrank = 1\niters = 10\n", dir.path());
    let enc = encode::run(&cfg).unwrap();
    assert!(enc.report.epsilon <= 1e-14);
    for name in ["mpo.json", "circuit.json", "report.json", "history.csv", "heatmap.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let vcfg = config("seed = 1\n[verify]\nshots = 2000\n", dir.path());
    let rep = verify::run(&vcfg, dir.path()).unwrap();
    assert_eq!(rep.circuit_vs_mpo, 0.0);
    assert!(rep.mpo_vs_target <= 1e-12);
    assert_eq!(rep.accepted, 2000);
    assert!((rep.exact_success_circuit - 1.0).abs() < 1e-12);
}

#[test]
fn fitted_mct_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("matrix = 'mct'\nqubits = 4\nseed = 0\n[fit]\nrank = 16\nconvergence_tol = 0.0\n", dir.path());
    let enc = encode::run(&cfg).unwrap();
    let rep = verify::run(&config("seed = 3\n", dir.path()), dir.path()).unwrap();
    assert!(rep.circuit_vs_mpo <= 1e-6, "{}", rep.circuit_vs_mpo);
    assert!(rep.mpo_vs_target <= 1e-6, "eps {} dev {}", enc.report.epsilon, rep.mpo_vs_target);
    assert!(rep.within_3_sigma, "z = {}", rep.sampled_z);
    assert!((rep.exact_success_mpo - rep.exact_success_circuit).abs() < 1e-10);

    let heat = read_csv(&dir.path().join("heatmap.csv")).unwrap();
    assert_eq!(heat.1.len(), 256);
    assert_eq!(&heat.0[..3], &["row", "col", "rel_error"]);
}

#[test]
fn verify_rejects_missing_and_large() {
    let dir = tempfile::tempdir().unwrap();
    assert!(verify::run(&config("seed = 0\n", dir.path()), dir.path()).is_err());
    let cfg = config("matrix = 'diag'\nqubits = 7\nseed = 0\n[fit]\nrank = 2\niters = 5\n", dir.path());
    encode::run(&cfg).unwrap();
    assert!(!dir.path().join("heatmap.csv").exists());
    let err = verify::run(&config("seed = 0\n", dir.path()), dir.path()).err().unwrap();
    assert_eq!(err.kind(), "guard");
}

// ---------------------------------------------------------------------------
// sweep

#[test]
fn sweep_is_deterministic_and_resumable() {
    let text = "matrix = 'diag'\nseed = 5\n[fit]\niters = 300\n[sweep]\nqubits = [3, 4]\nranks = [2, 4]\nthreads = 2\n";
    let a = tempfile::tempdir().unwrap();
    let rows = sweep::run(&config(text, a.path())).unwrap();
    assert_eq!(rows.len(), 4);
    let full = fs::read(a.path().join(sweep::FILE)).unwrap();

    let b = tempfile::tempdir().unwrap();
    sweep::run(&config(text, b.path())).unwrap();
    assert_eq!(fs::read(b.path().join(sweep::FILE)).unwrap(), full);

    // drop the last two rows and resume
    let text_full = String::from_utf8(full.clone()).unwrap();
    let kept: Vec<&str> = text_full.lines().take(3).collect();
    fs::write(b.path().join(sweep::FILE), kept.join("\n") + "\n").unwrap();
    sweep::run(&config(text, b.path())).unwrap();
    assert_eq!(fs::read(b.path().join(sweep::FILE)).unwrap(), full);

    let (header, data) = read_csv(&a.path().join(sweep::FILE)).unwrap();
    assert_eq!(header.len(), sweep::HEADER.len() + 2);
    assert!(data.iter().all(|r| r[0] == "diag"));
    // more bond dimension never hurts
    for n in [3usize, 4] {
        let eps: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.epsilon).collect();
        assert!(eps[1] <= eps[0] * 1.01, "n={n}: {eps:?}");
    }
}

// ---------------------------------------------------------------------------
// evolution

#[test]
fn evolution_small_dt_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubits = 4\nseed = 0\n[fit]\niters = 200\n[evolution]\ndts = [0.0, 1e-4, 10.0]\nranks = [2]\n", dir.path());
    let out = evolution::run(&cfg).unwrap();
    assert_eq!(out.ranks[0].max_rank, 1);
    assert!(out.ranks[0].trotter1.unwrap() < 1e-14);
    assert!(out.ranks[1].trotter2.unwrap() < 1e-10);
    assert_eq!(out.ranks[2].max_rank, 16);
    assert!(out.errors[0].epsilon < 1e-12, "{}", out.errors[0].epsilon);
    assert!(dir.path().join("ranks.csv").exists() && dir.path().join("errors.csv").exists());
}

#[test]
fn evolution_dense_guard() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubits = 9\n[evolution]\nranks = []\n", dir.path());
    assert_eq!(evolution::run(&cfg).err().unwrap().kind(), "guard");
}

// ---------------------------------------------------------------------------
// heat

fn dense_heat(n: usize, ratio: f64, dx: f64, steps: usize) -> Vec<Vec<f64>> {
    let dim = 1usize << n;
    let mut u: Vec<f64> = (0..dim).map(|j| (std::f64::consts::PI * (j + 1) as f64 * dx).sin()).collect();
    let mut out = vec![u.clone()];
    for _ in 0..steps {
        u = (0..dim)
            .map(|j| {
                let left = if j > 0 { u[j - 1] } else { 0.0 };
                let right = if j + 1 < dim { u[j + 1] } else { 0.0 };
                u[j] - ratio * (2.0 * u[j] - left - right)
            })
            .collect();
        out.push(u.clone());
    }
    out
}

#[test]
fn heat_zero_stays_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = heat::run(&config("qubits = 5\n[heat]\ninitial = 'zero'\nsteps = 10\n", dir.path())).unwrap();
    assert!(out.norms.iter().all(|&x| x == 0.0));
}

#[test]
fn heat_sin_decays_and_matches_dense() {
    let dir = tempfile::tempdir().unwrap();
    let out = heat::run(&config("qubits = 6\ntol = 1e-10\n[heat]\nsteps = 100\n", dir.path())).unwrap();
    assert!(!out.grid.unstable());
    assert_eq!(out.norms.len(), 101);
    assert!(out.norms.windows(2).all(|w| w[1] < w[0]));

    let dense = dense_heat(6, out.grid.ratio, out.grid.dx, 100);
    for (k, u) in dense.iter().enumerate() {
        let nrm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((nrm - out.norms[k]).abs() <= 1e-6, "step {k}");
    }
    let last = out.state.to_dense().unwrap();
    let diff = last.iter().zip(&dense[100]).map(|(a, b)| (a.re - b).abs() + a.im.abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-6, "{diff}");
    assert!(out.ranks.iter().all(|&r| r <= 2));

    let (header, rows) = read_csv(&dir.path().join("heat.csv")).unwrap();
    assert_eq!(&header[..4], &["step", "norm", "rank", "route"]);
    assert_eq!(rows.len(), 101);
}

#[test]
fn heat_simulated_route_tracks_tt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubits = 4\nseed = 0\n[fit]\nrank = 4\niters = 2000\n[heat]\nsteps = 20\nsimulate = true\n", dir.path());
    let out = heat::run(&cfg).unwrap();
    assert!(out.routes[1..].iter().all(|&r| r == "circuit"));
    let dense = dense_heat(4, out.grid.ratio, out.grid.dx, 20);
    let want = dense[20].iter().map(|x| x * x).sum::<f64>().sqrt();
    let eps = out.fit_epsilon.unwrap();
    assert!((out.norms[20] - want).abs() <= want * (20.0 * eps.sqrt() + 1e-8), "{} vs {want}", out.norms[20]);

    let dir2 = tempfile::tempdir().unwrap();
    let cfg = config("qubits = 4\nseed = 0\n[fit]\nrank = 4\niters = 50\n[heat]\nsteps = 5\nsimulate = true\nswitch_rank = 3\n", dir2.path());
    let out = heat::run(&cfg).unwrap();
    assert!(out.routes[1..].iter().all(|&r| r == "tt"));
}

#[test]
fn heat_warns_when_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["heat", "--qubits", "3", "--dt", "0.02", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let warn: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).lines().next().unwrap()).unwrap();
    assert_eq!(warn["warning"]["kind"], "cfl");
}

// ---------------------------------------------------------------------------
// power

#[test]
fn power_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ramp = power::run(&config("qubits = 6\n[power]\nprofile = 'ramp'\n", dir.path())).unwrap();
    assert_eq!(ramp.argmax, 63);

    let delta = power::run(&config("qubits = 6\n[power]\nprofile = 'delta'\nindex = 41\nsteps = 1\n", dir.path())).unwrap();
    assert_eq!(delta.argmax, 41);
    assert_eq!(delta.iterations, 1);

    let smooth = power::run(&config("qubits = 8\nseed = 7\n[power]\nprofile = 'smooth'\nsteps = 400\n", dir.path())).unwrap();
    let y = power::profile("smooth", 8, 0, Some(7)).unwrap();
    let brute = (0..y.len()).fold(0, |best, i| if y[i] > y[best] { i } else { best });
    assert_eq!(smooth.argmax, brute);
    assert_eq!(smooth.dense_argmax, brute);
}

#[test]
fn power_rejects_bad_profiles() {
    let dir = tempfile::tempdir().unwrap();
    assert!(power::run(&config("qubits = 4\n[power]\nprofile = 'delta'\nindex = 99\n", dir.path())).is_err());
    assert!(power::run(&config("qubits = 4\n[power]\nprofile = 'nope'\n", dir.path())).is_err());
}

#[test]
fn power_simulated_readout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("qubits = 4\nseed = 2\n[fit]\nrank = 2\niters = 500\n[power]\nprofile = 'delta'\nindex = 9\nsimulate = true\nsteps = 3\nshots = 200\n", dir.path());
    let out = power::run(&cfg).unwrap();
    assert_eq!(out.argmax, 9);
    assert_eq!(out.measured_argmax, Some(9));
}

// ---------------------------------------------------------------------------
// tomo

#[test]
fn tomo_zero_records_returns_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let curves = tomo::run(&config("qubits = 4\nseed = 3\n[tomo]\nrecord_counts = [0]\n", dir.path())).unwrap();
    let truth = vqc_output_state(&VQCSpec::random(4, 2, 3)).unwrap();
    let want = fidelity(&random_model(4, 4, 3).unwrap(), &truth).unwrap();
    assert_eq!(curves[0].points[0].fidelity, want);
    assert_eq!(curves[0].n_min, None);
}

#[test]
fn tomo_fidelity_rises_with_records() {
    let dir = tempfile::tempdir().unwrap();
    let text = "qubits = 4\n[tomo]\nrecord_counts = [100, 800, 4000]\nseeds = [0, 1, 2]\nstop_at_threshold = false\n";
    let curves = tomo::run(&config(text, dir.path())).unwrap();
    let mean = |i: usize| curves.iter().map(|c| c.points[i].fidelity).sum::<f64>() / curves.len() as f64;
    assert!(mean(0) <= mean(1) && mean(1) <= mean(2), "{} {} {}", mean(0), mean(1), mean(2));
    assert!(curves.iter().any(|c| c.n_min.is_some()));
    let (_, rows) = read_csv(&dir.path().join("tomo.csv")).unwrap();
    assert_eq!(rows.len(), 9);
}

// ---------------------------------------------------------------------------
// binary: determinism, stamps, errors

#[test]
fn reruns_produce_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let st = bin()
            .args(["encode", "--matrix", "laplace", "--qubits", "3", "--rank", "2", "--iters", "100", "--seed", "4", "--out"])
            .arg(d.path())
            .status()
            .unwrap();
        assert!(st.success());
    }
    for name in ["history.csv", "heatmap.csv", "report.json", "mpo.json", "circuit.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 16);
    let history = fs::read_to_string(a.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().next().unwrap(), "iteration,epsilon,c,config_hash,version");
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "command = 'power'\nqubits = 5\n[power]\nprofile = 'ramp'\n").unwrap();
    let out = bin().args(["power", "--qubits", "4", "--out"]).arg(dir.path()).arg("--config").arg(&path).output().unwrap();
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["argmax"], 15);
}

#[test]
fn errors_are_json_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["encode", "--matrix", "nope", "--qubits", "3", "--seed", "0", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("nope"));

    let out = bin().args(["encode", "--matrix", "diag", "--qubits", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "missing seed");

    let out = bin().arg("verify").arg(dir.path().join("missing")).args(["--seed", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let path = dir.path().join("bad.toml");
    fs::write(&path, "command = 'heat'\nbogus = 1\n").unwrap();
    let out = bin().arg("heat").arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

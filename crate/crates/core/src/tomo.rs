//! Maximum-likelihood MPS tomography from random-basis single-shot records,
//! and random brick-wall circuits used as test states.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::{Error, Result};
use crate::fit::sandwich;
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::sim::{basis_string, bits_string, parse_basis, parse_bits, Pauli};
use crate::tt::{transfer, transfer_right, Core, TTVector};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub basis: Vec<Pauli>,
    pub outcome: Vec<u8>,
}

impl MeasurementRecord {
    pub fn new(basis: Vec<Pauli>, outcome: Vec<u8>) -> Result<Self> {
        if basis.len() != outcome.len() {
            return Err(Error::Malformed(format!(
                "basis has {} qubits, outcome has {}",
                basis.len(),
                outcome.len()
            )));
        }
        if outcome.iter().any(|&b| b > 1) {
            return Err(Error::Malformed("outcome bits must be 0 or 1".into()));
        }
        Ok(MeasurementRecord { basis, outcome })
    }

    pub fn parse(basis: &str, outcome: &str) -> Result<Self> {
        Self::new(parse_basis(basis)?, parse_bits(outcome)?)
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }
}

pub fn records_to_csv(records: &[MeasurementRecord]) -> String {
    let mut out = String::from("basis,outcome\n");
    for r in records {
        out.push_str(&basis_string(&r.basis));
        out.push(',');
        out.push_str(&bits_string(&r.outcome));
        out.push('\n');
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<MeasurementRecord>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "basis,outcome" => {}
        _ => return Err(Error::Malformed("missing \"basis,outcome\" header".into())),
    }
    lines
        .map(|l| {
            let (b, o) = l.split_once(',').ok_or_else(|| Error::Malformed(format!("bad record line {l:?}")))?;
            MeasurementRecord::parse(b.trim(), o.trim())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TomographyOptions {
    pub rank: usize,
    pub n_records: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a held-out improvement before the learning rate is
    /// halved (restarting from the best model).
    pub patience: usize,
    /// Number of halvings before the run stops.
    pub lr_halvings: usize,
    /// Independent random initializations; the one with the lowest held-out
    /// loss is returned.
    pub restarts: usize,
    pub prob_floor: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        TomographyOptions {
            rank: 2,
            n_records: 1000,
            batch_size: 256,
            learning_rate: 0.01,
            max_epochs: 500,
            patience: 20,
            lr_halvings: 4,
            restarts: 3,
            prob_floor: 1e-12,
            holdout_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TomographyOptions {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be >= 1".into()));
        }
        if !(self.prob_floor > 0.0) {
            return Err(Error::InvalidArgument("prob_floor must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidArgument("holdout_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// random circuits

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VQCSpec {
    pub n: usize,
    pub layers: usize,
    pub seed: u64,
    /// `(θ, φ, λ)` of every single-qubit gate, layer by layer.
    pub angles: Vec<[f64; 3]>,
}

impl VQCSpec {
    /// Angles drawn uniformly from `[0, 2π)`.
    pub fn random(n: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = if layers == 0 { 0 } else { n * (layers + 1) };
        let tau = std::f64::consts::TAU;
        let angles = (0..count)
            .map(|_| [rng.random::<f64>() * tau, rng.random::<f64>() * tau, rng.random::<f64>() * tau])
            .collect();
        VQCSpec { n, layers, seed, angles }
    }
}

pub fn u3(theta: f64, phi: f64, lambda: f64) -> CMat {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let e = |x: f64| C64::from_polar(1.0, x);
    CMat::from_row_slice(2, 2, &[C64::new(c, 0.0), -e(lambda) * s, e(phi) * s, e(phi + lambda) * c])
}

pub fn cnot() -> CMat {
    let mut m = CMat::zeros(4, 4);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(r, c)] = ONE;
    }
    m
}

/// Gate sequence: each layer is a column of random single-qubit gates, then
/// CNOTs on pairs `(0,1), (2,3), …` and `(1,2), (3,4), …`; a final column of
/// single-qubit gates closes the circuit.
pub fn vqc_gates(spec: &VQCSpec) -> Result<Vec<Gate>> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::Empty);
    }
    let expected = if spec.layers == 0 { 0 } else { n * (spec.layers + 1) };
    if spec.angles.len() != expected {
        return Err(Error::Malformed(format!("expected {expected} angle triples, got {}", spec.angles.len())));
    }
    let mut gates = Vec::new();
    let mut angles = spec.angles.iter();
    let mut column = |gates: &mut Vec<Gate>| -> Result<()> {
        for q in 0..n {
            let [t, p, l] = *angles.next().expect("angle count checked");
            gates.push(Gate::new(u3(t, p, l), vec![q])?);
        }
        Ok(())
    };
    for _ in 0..spec.layers {
        column(&mut gates)?;
        for start in [0, 1] {
            for q in (start..n.saturating_sub(1)).step_by(2) {
                gates.push(Gate::new(cnot(), vec![q, q + 1])?);
            }
        }
    }
    if spec.layers > 0 {
        column(&mut gates)?;
    }
    Ok(gates)
}

fn apply_one_site(core: &Core, u: &CMat) -> Core {
    let mut out = Core::zeros(core.left, 2, core.right);
    for a in 0..core.left {
        for b in 0..core.right {
            for s in 0..2 {
                let v = u[(s, 0)] * core.get(a, 0, b) + u[(s, 1)] * core.get(a, 1, b);
                out.set(a, s, b, v);
            }
        }
    }
    out
}

/// Two-site gate on neighbouring cores, split back by an SVD that drops only
/// numerically zero singular values.
fn apply_two_site(x: &Core, y: &Core, u: &CMat) -> (Core, Core) {
    let (l, r, m) = (x.left, y.right, x.right);
    let mut theta = CMat::zeros(l * 2, 2 * r);
    for a in 0..l {
        for b in 0..r {
            let mut pair = [ZERO; 4];
            for (idx, p) in pair.iter_mut().enumerate() {
                let (s, t) = (idx / 2, idx % 2);
                *p = (0..m).map(|g| x.get(a, s, g) * y.get(g, t, b)).sum();
            }
            for i in 0..4 {
                let v: C64 = (0..4).map(|j| u[(i, j)] * pair[j]).sum();
                theta[(a * 2 + i / 2, (i % 2) * r + b)] = v;
            }
        }
    }
    let (uu, s, vt) = linalg::svd(&theta);
    let smax = s.first().copied().unwrap_or(0.0);
    let keep = s.iter().filter(|&&v| v > 1e-14 * smax).count().max(1);
    let left = uu.columns(0, keep).clone_owned();
    let mut right = vt.rows(0, keep).clone_owned();
    for i in 0..keep {
        let si = C64::new(s[i], 0.0);
        right.row_mut(i).iter_mut().for_each(|z| *z *= si);
    }
    (Core::from_left_matrix(&left, l, 2), Core::from_right_matrix(&right, 2, r))
}

/// Output MPS of the random circuit applied to `|0…0⟩`.
pub fn vqc_output_state(spec: &VQCSpec) -> Result<TTVector> {
    let gates = vqc_gates(spec)?;
    let mut cores = TTVector::basis_state(&vec![0u8; spec.n])?.into_cores();
    for g in &gates {
        match g.wires[..] {
            [q] => cores[q] = apply_one_site(&cores[q], &g.unitary),
            [q, p] if p == q + 1 => {
                let (a, b) = apply_two_site(&cores[q], &cores[p], &g.unitary);
                cores[q] = a;
                cores[p] = b;
            }
            _ => return Err(Error::InvalidArgument("only nearest-neighbour gates are supported".into())),
        }
    }
    TTVector::new(cores)
}

// ---------------------------------------------------------------------------
// likelihood

/// `Σ_s R[o, s] B[:, s, :]`, the core projected on the basis eigenvector of
/// outcome `o`.
fn projected(core: &Core, rot: &CMat, o: usize) -> CMat {
    CMat::from_fn(core.left, core.right, |a, b| rot[(o, 0)] * core.get(a, 0, b) + rot[(o, 1)] * core.get(a, 1, b))
}

fn check_record(model: &TTVector, rec: &MeasurementRecord) -> Result<()> {
    if rec.basis.len() != model.n() || rec.outcome.len() != model.n() {
        return Err(Error::Malformed(format!("record for {} qubits, model has {}", rec.n(), model.n())));
    }
    if model.phys_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidArgument("tomography needs qubit sites".into()));
    }
    Ok(())
}

/// Every core projected on all six single-qubit basis eigenvectors, stored
/// row-major `(left, right)` per site and `(basis, outcome)` pair.
struct Projections {
    left: Vec<usize>,
    right: Vec<usize>,
    mats: Vec<[Vec<C64>; 6]>,
    rots: [CMat; 3],
}

fn pauli_index(p: Pauli) -> usize {
    match p {
        Pauli::X => 0,
        Pauli::Y => 1,
        Pauli::Z => 2,
    }
}

impl Projections {
    fn new(model: &TTVector) -> Self {
        let rots = [Pauli::X.rotation(), Pauli::Y.rotation(), Pauli::Z.rotation()];
        let mats = model
            .cores()
            .iter()
            .map(|c| {
                std::array::from_fn(|j| {
                    let m = projected(c, &rots[j / 2], j % 2);
                    linalg::to_row_major(&m)
                })
            })
            .collect();
        Projections {
            left: model.cores().iter().map(|c| c.left).collect(),
            right: model.cores().iter().map(|c| c.right).collect(),
            mats,
            rots,
        }
    }

    fn mat(&self, k: usize, rec: &MeasurementRecord) -> &[C64] {
        &self.mats[k][pauli_index(rec.basis[k]) * 2 + rec.outcome[k] as usize]
    }

    /// Fills `prefix[k]` with the row vector of sites `0..k` and returns the
    /// amplitude.
    fn prefixes(&self, rec: &MeasurementRecord, prefix: &mut [Vec<C64>]) -> C64 {
        prefix[0].clear();
        prefix[0].push(ONE);
        for k in 0..self.left.len() {
            let (l, r) = (self.left[k], self.right[k]);
            let m = self.mat(k, rec);
            let (head, tail) = prefix.split_at_mut(k + 1);
            let (row, next) = (&head[k], &mut tail[0]);
            next.clear();
            next.resize(r, ZERO);
            for a in 0..l {
                let x = row[a];
                for b in 0..r {
                    next[b] += x * m[a * r + b];
                }
            }
        }
        prefix[self.left.len()][0]
    }

    fn amplitude(&self, rec: &MeasurementRecord, buf: &mut Vec<C64>, next: &mut Vec<C64>) -> C64 {
        buf.clear();
        buf.push(ONE);
        for k in 0..self.left.len() {
            let (l, r) = (self.left[k], self.right[k]);
            let m = self.mat(k, rec);
            next.clear();
            next.resize(r, ZERO);
            for a in 0..l {
                let x = buf[a];
                for b in 0..r {
                    next[b] += x * m[a * r + b];
                }
            }
            std::mem::swap(buf, next);
        }
        buf[0]
    }
}

/// Born probability of a record under the normalized model.
pub fn model_probability(model: &TTVector, rec: &MeasurementRecord) -> Result<f64> {
    check_record(model, rec)?;
    let nrm = model.norm();
    if nrm == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    let proj = Projections::new(model);
    let amp = proj.amplitude(rec, &mut Vec::new(), &mut Vec::new());
    Ok(amp.norm_sqr() / (nrm * nrm))
}

/// `−(1/N) Σ log max(P, floor)`.
pub fn nll_loss(model: &TTVector, records: &[MeasurementRecord], prob_floor: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let nrm = model.norm();
    if nrm == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    let proj = Projections::new(model);
    let (mut buf, mut next) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for r in records {
        check_record(model, r)?;
        let p = proj.amplitude(r, &mut buf, &mut next).norm_sqr() / (nrm * nrm);
        total -= p.max(prob_floor).ln();
    }
    Ok(total / records.len() as f64)
}

/// Loss and its Wirtinger gradients `∂L/∂conj(B[k])`.
pub fn nll_gradient(model: &TTVector, records: &[MeasurementRecord], prob_floor: f64) -> Result<(f64, Vec<Core>)> {
    if records.is_empty() {
        return Err(Error::Empty);
    }
    let cores = model.cores();
    let n = cores.len();
    let unit = CMat::from_element(1, 1, ONE);
    let mut lenv = vec![unit.clone()];
    for k in 0..n {
        lenv.push(transfer(&lenv[k], &cores[k], &cores[k]));
    }
    let norm2 = lenv[n][(0, 0)].re;
    if norm2 == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    let proj = Projections::new(model);
    let mut grads: Vec<Core> = cores.iter().map(|c| Core::zeros(c.left, c.phys, c.right)).collect();
    let inv_n = 1.0 / records.len() as f64;
    let mut loss = 0.0;
    let mut prefix = vec![Vec::new(); n + 1];
    let (mut suffix, mut next) = (Vec::new(), Vec::new());
    for rec in records {
        check_record(model, rec)?;
        let amp = proj.prefixes(rec, &mut prefix);
        let p = amp.norm_sqr() / norm2;
        loss -= p.max(prob_floor).ln() * inv_n;
        if p < prob_floor {
            continue;
        }
        // ∂(−log|a|²)/∂conj(B) = −conj(∂a/∂B) / conj(a)
        let coef = -inv_n / amp.conj();
        suffix.clear();
        suffix.push(ONE);
        for k in (0..n).rev() {
            let (l, r) = (proj.left[k], proj.right[k]);
            let o = rec.outcome[k] as usize;
            let rot = &proj.rots[pauli_index(rec.basis[k])];
            let w = [coef * rot[(o, 0)].conj(), coef * rot[(o, 1)].conj()];
            let g = &mut grads[k];
            let row = &prefix[k];
            for a in 0..l {
                let la = row[a].conj();
                for b in 0..r {
                    let lr = la * suffix[b].conj();
                    g.data[(a * 2) * r + b] += w[0] * lr;
                    g.data[(a * 2 + 1) * r + b] += w[1] * lr;
                }
            }
            let m = proj.mat(k, rec);
            next.clear();
            next.resize(l, ZERO);
            for a in 0..l {
                let mut acc = ZERO;
                for b in 0..r {
                    acc += m[a * r + b] * suffix[b];
                }
                next[a] = acc;
            }
            std::mem::swap(&mut suffix, &mut next);
        }
    }
    // + ∂log‖ψ‖²/∂conj(B) = (L B R)/‖ψ‖²
    let mut renv = unit;
    for k in (0..n).rev() {
        let s = sandwich(&lenv[k], &cores[k], &renv);
        for (g, v) in grads[k].data.iter_mut().zip(&s.data) {
            *g += v / norm2;
        }
        renv = transfer_right(&renv, &cores[k], &cores[k]);
    }
    Ok((loss, grads))
}

/// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`.
pub fn fidelity(a: &TTVector, b: &TTVector) -> Result<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    Ok(a.dot(b)?.norm_sqr() / (na * na * nb * nb))
}

// ---------------------------------------------------------------------------
// sampling

/// One single-shot record per entry of `bases`, drawn by sequential
/// conditional sampling on the right-canonical form of `state`.
pub fn sample_records_in_bases(state: &TTVector, bases: &[Vec<Pauli>], seed: u64) -> Result<Vec<MeasurementRecord>> {
    if state.phys_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidArgument("sampling needs qubit sites".into()));
    }
    let nrm = state.norm();
    if nrm == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    let canon = state.scale(C64::new(1.0 / nrm, 0.0)).orthogonalize(0)?;
    let cores = canon.cores();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(bases.len());
    for basis in bases {
        if basis.len() != cores.len() {
            return Err(Error::Malformed(format!("basis for {} qubits, state has {}", basis.len(), cores.len())));
        }
        let mut row = CMat::from_element(1, 1, ONE);
        let mut bits = Vec::with_capacity(cores.len());
        for (core, p) in cores.iter().zip(basis) {
            let rot = p.rotation();
            let c0 = &row * projected(core, &rot, 0);
            let c1 = &row * projected(core, &rot, 1);
            let (p0, p1) = (c0.norm_squared(), c1.norm_squared());
            let bit = if rng.random::<f64>() * (p0 + p1) < p0 { 0 } else { 1 };
            let (chosen, pc) = if bit == 0 { (c0, p0) } else { (c1, p1) };
            row = chosen / C64::new(pc.sqrt(), 0.0);
            bits.push(bit);
        }
        out.push(MeasurementRecord { basis: basis.clone(), outcome: bits });
    }
    Ok(out)
}

/// Bases drawn uniformly and independently per qubit per record.
pub fn random_bases(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Pauli>> {
    const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];
    (0..count).map(|_| (0..n).map(|_| ALL[rng.random_range(0..3)]).collect()).collect()
}

pub fn sample_records(state: &TTVector, count: usize, seed: u64) -> Result<Vec<MeasurementRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases = random_bases(state.n(), count, &mut rng);
    sample_records_in_bases(state, &bases, rng.random())
}

// ---------------------------------------------------------------------------
// fitting

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult {
    pub model: TTVector,
    pub train_loss: Vec<f64>,
    pub holdout_loss: Vec<f64>,
    /// Fidelity with the reference after each epoch, when one was given.
    pub fidelity_history: Vec<f64>,
    pub best_epoch: usize,
}

/// Normalized random rank-`rank` MPS (bonds capped by the qubit count).
pub fn random_model(n: usize, rank: usize, seed: u64) -> Result<TTVector> {
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bond = |k: usize| -> usize {
        if k == 0 || k == n {
            1
        } else {
            let cap = 1usize.checked_shl(k.min(n - k) as u32).unwrap_or(usize::MAX);
            rank.min(cap)
        }
    };
    let cores = (0..n)
        .map(|k| {
            let (l, r) = (bond(k), bond(k + 1));
            let g = linalg::gaussian(l * 2 * r, 1, &mut rng);
            Core::new(l, 2, r, g.iter().copied().collect())
        })
        .collect::<Result<Vec<_>>>()?;
    normalize(TTVector::new(cores)?)
}

fn normalize(x: TTVector) -> Result<TTVector> {
    let nrm = x.norm();
    if !(nrm > 0.0) || !nrm.is_finite() {
        return Err(Error::NotNormalized(nrm));
    }
    let n = x.n() as i32;
    let f = C64::new(nrm.powf(-1.0 / n as f64), 0.0);
    TTVector::new(x.into_cores().into_iter().map(|c| c.scaled(f)).collect())
}

/// Minibatch ADAM on the unconstrained cores of a rank-`rank` MPS, with the
/// state renormalized after every step. Each of `restarts` runs keeps the
/// model with the lowest held-out loss, halving the learning rate whenever
/// that loss stalls for `patience` epochs; the best run is returned.
pub fn fit_mps(
    records: &[MeasurementRecord],
    options: &TomographyOptions,
    reference: Option<&TTVector>,
) -> Result<TomographyResult> {
    let n = check_fit_inputs(records, options, reference)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (train, holdout) = split_records(records, options.holdout_fraction, &mut rng);
    let mut best: Option<(f64, TomographyResult)> = None;
    for _ in 0..options.restarts {
        let init = random_model(n, options.rank, rng.random())?;
        let run_seed = rng.random();
        let (loss, res) = fit_run(init, train.clone(), &holdout, options, reference, run_seed)?;
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, res));
        }
    }
    Ok(best.expect("restarts >= 1").1)
}

/// Single run of [`fit_mps`] starting from `init`; `restarts` is ignored.
pub fn fit_mps_from(
    records: &[MeasurementRecord],
    init: TTVector,
    options: &TomographyOptions,
    reference: Option<&TTVector>,
) -> Result<TomographyResult> {
    let n = check_fit_inputs(records, options, reference)?;
    if init.n() != n || init.phys_dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch(format!("initial model does not match {n}-qubit records")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (train, holdout) = split_records(records, options.holdout_fraction, &mut rng);
    Ok(fit_run(init, train, &holdout, options, reference, rng.random())?.1)
}

fn check_fit_inputs(
    records: &[MeasurementRecord],
    options: &TomographyOptions,
    reference: Option<&TTVector>,
) -> Result<usize> {
    options.validate()?;
    let first = records.first().ok_or(Error::Empty)?;
    let n = first.n();
    if let Some(r) = records.iter().find(|r| r.n() != n) {
        return Err(Error::Malformed(format!("records mix {} and {} qubits", n, r.n())));
    }
    if let Some(r) = reference {
        if r.n() != n {
            return Err(Error::DimensionMismatch(format!("reference has {} qubits, records {}", r.n(), n)));
        }
    }
    Ok(n)
}

/// Shuffled `(train, holdout)` split; both halves are the full set when
/// the holdout share rounds to nothing.
fn split_records(
    records: &[MeasurementRecord],
    holdout_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<MeasurementRecord>, Vec<MeasurementRecord>) {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(rng);
    let n_hold = (records.len() as f64 * holdout_fraction).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    if n_hold == 0 || n_hold == records.len() {
        (pick(&order), pick(&order))
    } else {
        let (h, t) = order.split_at(n_hold);
        (pick(t), pick(h))
    }
}

fn fit_run(
    mut model: TTVector,
    mut train: Vec<MeasurementRecord>,
    holdout: &[MeasurementRecord],
    options: &TomographyOptions,
    reference: Option<&TTVector>,
    seed: u64,
) -> Result<(f64, TomographyResult)> {
    let floor = options.prob_floor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = model.clone();
    let mut best_loss = nll_loss(&model, holdout, floor)?;
    let mut best_epoch = 0;
    let mut result = TomographyResult {
        model: model.clone(),
        train_loss: vec![nll_loss(&model, &train, floor)?],
        holdout_loss: vec![best_loss],
        fidelity_history: Vec::new(),
        best_epoch: 0,
    };
    if let Some(r) = reference {
        result.fidelity_history.push(fidelity(&model, r)?);
    }
    if options.learning_rate == 0.0 {
        return Ok((best_loss, result));
    }

    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m1: Vec<Vec<C64>> = model.cores().iter().map(|c| vec![ZERO; c.data.len()]).collect();
    let mut m2: Vec<Vec<f64>> = model.cores().iter().map(|c| vec![0.0; c.data.len()]).collect();
    let mut t = 0i32;
    let mut lr = options.learning_rate;
    let mut halvings = 0;
    let mut stalled = 0;
    for epoch in 1..=options.max_epochs {
        train.shuffle(&mut rng);
        for batch in train.chunks(options.batch_size) {
            let (_, grads) = nll_gradient(&model, batch, floor)?;
            t += 1;
            let (bc1, bc2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
            let mut cores = model.into_cores();
            for (k, (core, g)) in cores.iter_mut().zip(&grads).enumerate() {
                for (i, gv) in g.data.iter().enumerate() {
                    let gv = gv * 2.0;
                    m1[k][i] = m1[k][i] * beta1 + gv * (1.0 - beta1);
                    m2[k][i] = m2[k][i] * beta2 + gv.norm_sqr() * (1.0 - beta2);
                    let step = m1[k][i] / bc1 / ((m2[k][i] / bc2).sqrt() + eps);
                    core.data[i] -= step * lr;
                }
            }
            model = normalize(TTVector::new(cores)?)?;
        }
        let hl = nll_loss(&model, holdout, floor)?;
        result.train_loss.push(nll_loss(&model, &train, floor)?);
        result.holdout_loss.push(hl);
        if let Some(r) = reference {
            result.fidelity_history.push(fidelity(&model, r)?);
        }
        if hl < best_loss {
            best_loss = hl;
            best = model.clone();
            best_epoch = epoch;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= options.patience {
                if halvings == options.lr_halvings {
                    break;
                }
                halvings += 1;
                lr *= 0.5;
                stalled = 0;
                model = best.clone();
            }
        }
    }
    result.model = best;
    result.best_epoch = best_epoch;
    Ok((best_loss, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_validation() {
        assert!(MeasurementRecord::parse("XZ", "01").is_ok());
        assert!(matches!(MeasurementRecord::parse("XZ", "011"), Err(Error::Malformed(_))));
        assert!(MeasurementRecord::parse("XQ", "01").is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let recs = vec![MeasurementRecord::parse("XYZ", "010").unwrap(), MeasurementRecord::parse("ZZZ", "111").unwrap()];
        let text = records_to_csv(&recs);
        assert_eq!(text, "basis,outcome\nXYZ,010\nZZZ,111\n");
        assert_eq!(records_from_csv(&text).unwrap(), recs);
        assert!(records_from_csv("XYZ,010\n").is_err());
    }

    #[test]
    fn zero_layers_is_vacuum() {
        let s = vqc_output_state(&VQCSpec::random(4, 0, 1)).unwrap();
        assert_eq!(s.rank_profile().max_rank(), 1);
        assert_eq!(s, TTVector::basis_state(&[0; 4]).unwrap());
    }

    #[test]
    fn options_validation() {
        assert!(TomographyOptions { rank: 0, ..Default::default() }.validate().is_err());
        assert!(TomographyOptions { prob_floor: 0.0, ..Default::default() }.validate().is_err());
        assert!(nll_loss(&TTVector::basis_state(&[0]).unwrap(), &[], 1e-12).is_err());
    }
}

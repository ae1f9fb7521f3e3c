//! Dense statevector simulation of post-selected circuits and
//! success-probability calculations.
//!
//! Qubit `k` (wire `k`) is the most significant bit of every dense index.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, QuantumCircuit};
use crate::error::{Error, Result};
use crate::fit::avg_success_of;
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::tt::{TTMatrix, TTVector};

/// Default cap on `n_system + n_ancilla` for dense simulation.
pub const WIRE_LIMIT: usize = 16;
/// Default cap on `n_system` for [`circuit_to_matrix`].
pub const MATRIX_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    pub n: usize,
    pub amplitudes: Vec<C64>,
}

impl Statevector {
    pub fn zero_state(n: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[0] = ONE;
        Statevector { n, amplitudes }
    }

    pub fn basis_state(bits: &[u8]) -> Self {
        let n = bits.len();
        let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[index] = ONE;
        Statevector { n, amplitudes }
    }

    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len == 0 {
            return Err(Error::Empty);
        }
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        Ok(Statevector { n: len.trailing_zeros() as usize, amplitudes })
    }

    pub fn from_tt(x: &TTVector) -> Result<Self> {
        if x.phys_dims().iter().any(|&d| d != 2) {
            return Err(Error::InvalidArgument("statevectors need qubit sites".into()));
        }
        Ok(Statevector { n: x.n(), amplitudes: x.to_dense_with_limit(WIRE_LIMIT)? })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-10
    }

    pub fn normalized(&self) -> Result<Self> {
        let nrm = self.norm();
        if nrm == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        let inv = C64::new(1.0 / nrm, 0.0);
        Ok(Statevector { n: self.n, amplitudes: self.amplitudes.iter().map(|z| z * inv).collect() })
    }

    pub fn dot(&self, other: &Statevector) -> Result<C64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("{} vs {} qubits", self.n, other.n)));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Statevector) -> Result<f64> {
        Ok(self.dot(other)?.norm_sqr())
    }

    pub fn apply_gate(&self, g: &Gate) -> Result<Statevector> {
        let mut out = self.clone();
        out.apply_gate_mut(g)?;
        Ok(out)
    }

    pub fn apply_gate_mut(&mut self, g: &Gate) -> Result<()> {
        apply_unitary(&mut self.amplitudes, self.n, &g.unitary, &g.wires)
    }
}

fn bit_of(n: usize, wire: usize) -> usize {
    1 << (n - 1 - wire)
}

/// Contracts `u` onto `wires` of an `n`-qubit amplitude array in place.
fn apply_unitary(amps: &mut [C64], n: usize, u: &CMat, wires: &[usize]) -> Result<()> {
    if let Some(&bad) = wires.iter().find(|&&w| w >= n) {
        return Err(Error::OutOfRange { index: bad, len: n });
    }
    let k = wires.len();
    let dim = 1usize << k;
    if u.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!("{k}-wire gate with {:?} matrix", u.shape())));
    }
    let offsets: Vec<usize> = (0..dim)
        .map(|j| (0..k).filter(|&i| j >> (k - 1 - i) & 1 == 1).map(|i| bit_of(n, wires[i])).sum())
        .collect();
    let mask: usize = wires.iter().map(|&w| bit_of(n, w)).sum();
    let mut local = vec![ZERO; dim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (j, &off) in offsets.iter().enumerate() {
            local[j] = amps[base + off];
        }
        for (i, &off) in offsets.iter().enumerate() {
            let mut acc = ZERO;
            for (j, &x) in local.iter().enumerate() {
                acc += u[(i, j)] * x;
            }
            amps[base + off] = acc;
        }
    }
    Ok(())
}

pub fn apply_gate(state: &Statevector, g: &Gate) -> Result<Statevector> {
    state.apply_gate(g)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Post-selected and renormalized output; all zeros when the success
    /// probability vanishes.
    #[serde(with = "amps_json")]
    pub output: Statevector,
    pub success_prob: f64,
    pub shots_attempted: u64,
    pub shots_accepted: u64,
}

impl RunResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

mod amps_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Amps {
        n: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(s: &Statevector, ser: S) -> std::result::Result<S::Ok, S::Error> {
        Amps {
            n: s.n,
            re: s.amplitudes.iter().map(|z| z.re).collect(),
            im: s.amplitudes.iter().map(|z| z.im).collect(),
        }
        .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Statevector, D::Error> {
        let a = Amps::deserialize(de)?;
        if a.re.len() != 1 << a.n || a.im.len() != a.re.len() {
            return Err(serde::de::Error::custom("amplitude arrays do not match n"));
        }
        let amplitudes = a.re.iter().zip(&a.im).map(|(&r, &i)| C64::new(r, i)).collect();
        Ok(Statevector { n: a.n, amplitudes })
    }
}

/// Full-register state after the gates, with the input loaded on the input
/// wires and the prepared ancillas in `|0⟩`.
fn evolve(circ: &QuantumCircuit, input: &Statevector) -> Result<Vec<C64>> {
    circ.validate()?;
    if input.n != circ.n_system {
        return Err(Error::DimensionMismatch(format!(
            "circuit has {} system qubits, input has {}",
            circ.n_system, input.n
        )));
    }
    let w = circ.n_wires();
    if w > WIRE_LIMIT {
        return Err(Error::SizeGuard { what: "circuit wires", n: w, limit: WIRE_LIMIT });
    }
    let mut amps = vec![ZERO; 1 << w];
    let n = circ.n_system;
    for (i, &z) in input.amplitudes.iter().enumerate() {
        let global: usize =
            (0..n).filter(|&q| i >> (n - 1 - q) & 1 == 1).map(|q| bit_of(w, circ.input_wires[q])).sum();
        amps[global] = z;
    }
    for g in &circ.gates {
        apply_unitary(&mut amps, w, &g.unitary, &g.wires)?;
    }
    Ok(amps)
}

/// Unnormalized `⟨0|_{post} U (input ⊗ |0⟩_{prep})` on the output wires.
fn project(circ: &QuantumCircuit, amps: &[C64]) -> Vec<C64> {
    let w = circ.n_wires();
    let n = circ.n_system;
    (0..1usize << n)
        .map(|o| {
            let global: usize =
                (0..n).filter(|&q| o >> (n - 1 - q) & 1 == 1).map(|q| bit_of(w, circ.output_wires[q])).sum();
            amps[global]
        })
        .collect()
}

fn postselect(circ: &QuantumCircuit, input: &Statevector) -> Result<(Vec<C64>, Vec<C64>)> {
    let amps = evolve(circ, input)?;
    let proj = project(circ, &amps);
    Ok((amps, proj))
}

fn result_from(n: usize, proj: Vec<C64>) -> RunResult {
    let p: f64 = proj.iter().map(|z| z.norm_sqr()).sum();
    let amplitudes = if p > 0.0 {
        let inv = C64::new(1.0 / p.sqrt(), 0.0);
        proj.into_iter().map(|z| z * inv).collect()
    } else {
        proj
    };
    RunResult { output: Statevector { n, amplitudes }, success_prob: p, shots_attempted: 0, shots_accepted: 0 }
}

/// Exact post-selection: projects onto the all-zero outcome of the
/// post-selected register without sampling.
pub fn run_postselected(circ: &QuantumCircuit, input: &Statevector) -> Result<RunResult> {
    let (_, proj) = postselect(circ, input)?;
    Ok(result_from(circ.n_system, proj))
}

/// Runs `shots` independent attempts, each measuring the post-selected
/// register and accepting on all zeros. The reported output is the exact
/// post-selected state.
pub fn run_sampled(circ: &QuantumCircuit, input: &Statevector, shots: u64, seed: u64) -> Result<RunResult> {
    let (_, proj) = postselect(circ, input)?;
    let mut res = result_from(circ.n_system, proj);
    let p = res.success_prob.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    res.shots_attempted = shots;
    res.shots_accepted = (0..shots).filter(|_| rng.random::<f64>() < p).count() as u64;
    Ok(res)
}

/// Retry loop: repeats until the post-selected register reads all zeros or
/// the budget is exhausted. Returns `None` when no attempt succeeded.
pub fn run_until_accepted(
    circ: &QuantumCircuit,
    input: &Statevector,
    budget: u64,
    seed: u64,
) -> Result<Option<RunResult>> {
    let (_, proj) = postselect(circ, input)?;
    let mut res = result_from(circ.n_system, proj);
    let p = res.success_prob.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=budget {
        if rng.random::<f64>() < p {
            res.shots_attempted = attempt;
            res.shots_accepted = 1;
            return Ok(Some(res));
        }
    }
    Ok(None)
}

/// `⟨0|_{post} U |0⟩_{prep}` as a matrix on the system qubits.
pub fn circuit_to_matrix(circ: &QuantumCircuit) -> Result<CMat> {
    circuit_to_matrix_with_limit(circ, MATRIX_LIMIT)
}

pub fn circuit_to_matrix_with_limit(circ: &QuantumCircuit, limit: usize) -> Result<CMat> {
    let n = circ.n_system;
    if n > limit {
        return Err(Error::SizeGuard { what: "system qubits", n, limit });
    }
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[col] = ONE;
        let (_, proj) = postselect(circ, &Statevector { n, amplitudes })?;
        for (row, z) in proj.into_iter().enumerate() {
            out[(row, col)] = z;
        }
    }
    Ok(out)
}

/// `‖Aψ‖² / ‖ψ‖²` in TT form.
pub fn exact_success_prob(a: &TTMatrix, psi: &TTVector) -> Result<f64> {
    let nrm = psi.norm();
    if nrm == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    let out = a.matvec(psi)?;
    Ok((out.norm() / nrm).powi(2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// `Σ_k λ_k² |⟨λ_k|ψ⟩|²`.
    pub success_prob: f64,
    pub lambda_max_sq: f64,
    pub singular_values: Vec<f64>,
}

/// Success probability from the singular value decomposition of a dense `A`.
pub fn spectral_success_prob(a: &CMat, psi: &[C64]) -> Result<SpectralReport> {
    spectral_success_prob_with_limit(a, psi, linalg_limit())
}

fn linalg_limit() -> usize {
    crate::tt::MATRIX_DENSE_LIMIT
}

pub fn spectral_success_prob_with_limit(a: &CMat, psi: &[C64], limit: usize) -> Result<SpectralReport> {
    let dim = a.nrows();
    if a.ncols() != dim || psi.len() != dim {
        return Err(Error::DimensionMismatch(format!("matrix {:?} and vector of length {}", a.shape(), psi.len())));
    }
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    let n = dim.trailing_zeros() as usize;
    if n > limit {
        return Err(Error::SizeGuard { what: "qubits", n, limit });
    }
    let nrm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if nrm2 == 0.0 {
        return Err(Error::NotNormalized(0.0));
    }
    let (_, s, vt) = linalg::svd(a);
    let x = CMat::from_column_slice(dim, 1, psi);
    let coeffs = &vt * x;
    let success_prob = s.iter().zip(coeffs.iter()).map(|(l, c)| l * l * c.norm_sqr()).sum::<f64>() / nrm2;
    let lambda_max_sq = s.first().map_or(0.0, |l| l * l);
    Ok(SpectralReport { success_prob, lambda_max_sq, singular_values: s })
}

/// Haar-averaged success probability `‖A‖²_F / 2^n`.
pub fn avg_success_prob(a: &TTMatrix) -> f64 {
    avg_success_of(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Rotation taking the basis eigenvectors to the computational basis:
    /// `H` for X, `H S†` for Y, identity for Z.
    pub fn rotation(self) -> CMat {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = (C64::new(h, 0.0), C64::new(0.0, h));
        match self {
            Pauli::Z => linalg::identity(2),
            Pauli::X => CMat::from_row_slice(2, 2, &[a, a, a, -a]),
            Pauli::Y => CMat::from_row_slice(2, 2, &[a, -b, a, b]),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'X' | 'x' => Ok(Pauli::X),
            'Y' | 'y' => Ok(Pauli::Y),
            'Z' | 'z' => Ok(Pauli::Z),
            other => Err(Error::InvalidArgument(format!("invalid basis character {other:?}"))),
        }
    }
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Pauli::try_from(c),
            _ => Err(Error::InvalidArgument(format!("invalid basis {s:?}"))),
        }
    }
}

pub fn parse_basis(s: &str) -> Result<Vec<Pauli>> {
    s.chars().map(Pauli::try_from).collect()
}

pub fn basis_string(basis: &[Pauli]) -> String {
    basis.iter().map(|p| p.to_string()).collect()
}

pub fn bits_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::InvalidArgument(format!("invalid outcome character {other:?}"))),
        })
        .collect()
}

/// Born probabilities after rotating every qubit into its measurement basis.
pub fn basis_probabilities(state: &Statevector, basis: &[Pauli]) -> Result<Vec<f64>> {
    if basis.len() != state.n {
        return Err(Error::DimensionMismatch(format!("basis of length {} for {} qubits", basis.len(), state.n)));
    }
    let mut amps = state.amplitudes.clone();
    for (q, p) in basis.iter().enumerate() {
        if *p != Pauli::Z {
            apply_unitary(&mut amps, state.n, &p.rotation(), &[q])?;
        }
    }
    Ok(amps.iter().map(|z| z.norm_sqr()).collect())
}

/// Draws `shots` outcome bitstrings (qubit 1 first) in the given basis.
pub fn sample_measurements(state: &Statevector, basis: &str, shots: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    let basis = parse_basis(basis)?;
    let probs = basis_probabilities(state, &basis)?;
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = state.n;
    Ok((0..shots)
        .map(|_| {
            let idx = dist.sample(&mut rng);
            (0..n).map(|q| (idx >> (n - 1 - q) & 1) as u8).collect()
        })
        .collect())
}

/// Normalized complex Gaussian vector.
pub fn haar_random_state(n: usize, seed: u64) -> Statevector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_state_with(n, &mut rng)
}

pub fn haar_random_state_with(n: usize, rng: &mut ChaCha8Rng) -> Statevector {
    let amps: Vec<C64> = (0..1usize << n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let nrm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let inv = C64::new(1.0 / nrm, 0.0);
    Statevector { n, amplitudes: amps.into_iter().map(|z| z * inv).collect() }
}

/// CSV lines `basis,outcome` with a header.
pub fn samples_to_csv(basis: &str, outcomes: &[Vec<u8>]) -> String {
    let mut out = String::from("basis,outcome\n");
    for o in outcomes {
        out.push_str(basis);
        out.push(',');
        out.push_str(&bits_string(o));
        out.push('\n');
    }
    out
}

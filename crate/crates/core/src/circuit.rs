//! Compilation of unitary MPOs and normalized MPSs into staircase circuits of
//! dense multi-qubit gates.
//!
//! Wire layout for `n` system qubits and `m = ⌈log₂R⌉` ancillas (wire 0 is
//! the most significant bit of every dense index):
//!
//! ```text
//! wires 0..m        ancillas prepared in |0⟩
//! wires m..m+n      system input, qubit k on wire m+k
//! gate k            acts on wires k..=k+m
//! wires 0..n        system output, qubit k on wire k
//! wires n..n+m      ancillas measured and post-selected on 0
//! ```
//!
//! Gate `k` maps (bond `α_{k-1}` on wires `k..k+m`, input qubit on wire
//! `k+m`) to (output qubit on wire `k`, bond `α_k` on wires `k+1..=k+m`),
//! so the bond slides down one wire per gate and the post-selected register
//! sits at the end opposite to the prepared one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{ceil_log2, UnitaryMPO};
use crate::linalg::{self, CMat, C64};
use crate::tt::{Core, TTVector};

const COMPLETION_SEED: u64 = 0x7e57_c12c;

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub unitary: CMat,
    /// Wire of each local qubit, most significant first.
    pub wires: Vec<usize>,
}

impl Gate {
    pub fn new(unitary: CMat, wires: Vec<usize>) -> Result<Self> {
        let dim = 1usize << wires.len();
        if unitary.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} wires need a {dim}x{dim} unitary, got {:?}",
                wires.len(),
                unitary.shape()
            )));
        }
        let mut sorted = wires.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != wires.len() {
            return Err(Error::InvalidArgument("gate wires must be distinct".into()));
        }
        let dev = linalg::gram_deviation(&unitary);
        if dev > 1e-10 {
            return Err(Error::NotIsometric(dev));
        }
        Ok(Gate { unitary, wires })
    }

    pub fn arity(&self) -> usize {
        self.wires.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumCircuit {
    pub n_system: usize,
    pub n_ancilla: usize,
    pub gates: Vec<Gate>,
    pub prep_wires: Vec<usize>,
    pub postselect_wires: Vec<usize>,
    pub input_wires: Vec<usize>,
    pub output_wires: Vec<usize>,
}

impl QuantumCircuit {
    /// Staircase layout with no gates yet.
    pub fn staircase(n_system: usize, n_ancilla: usize) -> Self {
        let (n, m) = (n_system, n_ancilla);
        QuantumCircuit {
            n_system,
            n_ancilla,
            gates: Vec::with_capacity(n),
            prep_wires: (0..m).collect(),
            postselect_wires: (n..n + m).collect(),
            input_wires: (m..m + n).collect(),
            output_wires: (0..n).collect(),
        }
    }

    pub fn n_wires(&self) -> usize {
        self.n_system + self.n_ancilla
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.n_wires();
        if self.prep_wires.len() != self.n_ancilla || self.postselect_wires.len() != self.n_ancilla {
            return Err(Error::Malformed("ancilla registers must have n_ancilla wires".into()));
        }
        if self.input_wires.len() != self.n_system || self.output_wires.len() != self.n_system {
            return Err(Error::Malformed("system registers must have n_system wires".into()));
        }
        let all = [&self.prep_wires, &self.postselect_wires, &self.input_wires, &self.output_wires];
        if all.iter().any(|r| r.iter().any(|&x| x >= w)) {
            return Err(Error::Malformed("register wire out of range".into()));
        }
        let mut cover: Vec<usize> = self.output_wires.iter().chain(&self.postselect_wires).copied().collect();
        cover.sort_unstable();
        cover.dedup();
        if cover.len() != w {
            return Err(Error::Malformed("output and post-selected wires must partition the register".into()));
        }
        let mut cover: Vec<usize> = self.input_wires.iter().chain(&self.prep_wires).copied().collect();
        cover.sort_unstable();
        cover.dedup();
        if cover.len() != w {
            return Err(Error::Malformed("input and prepared wires must partition the register".into()));
        }
        for g in &self.gates {
            if let Some(&bad) = g.wires.iter().find(|&&x| x >= w) {
                return Err(Error::OutOfRange { index: bad, len: w });
            }
        }
        Ok(())
    }
}

/// Extends an `m×p` isometry to an `m×m` unitary whose first `p` columns are
/// `v`, with a deterministic complement.
pub fn complete_isometry(v: &CMat) -> Result<CMat> {
    linalg::complete_isometry(v, COMPLETION_SEED)
}

/// Unitary `U` of size `dim` with `U[rows[i], cols[j]] = w[i, j]` for an
/// isometry `w`, completed on the remaining rows and columns.
fn embed_isometry(w: &CMat, rows: &[usize], cols: &[usize], dim: usize, seed: u64) -> Result<CMat> {
    let p = w.ncols();
    let mut tall = CMat::zeros(dim, p);
    for (i, &r) in rows.iter().enumerate() {
        for j in 0..p {
            tall[(r, j)] = w[(i, j)];
        }
    }
    let q = linalg::complete_isometry(&tall, seed)?;
    let mut taken = vec![false; dim];
    for &c in cols {
        taken[c] = true;
    }
    let free = (0..dim).filter(|&c| !taken[c]);
    let mut u = CMat::zeros(dim, dim);
    for (j, &c) in cols.iter().enumerate() {
        u.set_column(c, &q.column(j));
    }
    for (j, c) in (p..dim).zip(free) {
        u.set_column(c, &q.column(j));
    }
    Ok(u)
}

/// Same as [`embed_isometry`] for a matrix with orthonormal rows or columns.
fn embed(w: &CMat, rows: &[usize], cols: &[usize], dim: usize, seed: u64) -> Result<CMat> {
    if w.nrows() >= w.ncols() {
        embed_isometry(w, rows, cols, dim, seed)
    } else {
        Ok(embed_isometry(&w.adjoint(), cols, rows, dim, seed)?.adjoint())
    }
}

/// Gate for a core in the (`α_{k-1}`, input) → (output, `α_k`) form: rows of
/// `w` are `(s, β)`, columns `(α, l)`.
fn staircase_gate(w: &CMat, left: usize, right: usize, d_in: usize, m: usize, k: usize) -> Result<Gate> {
    let width = 1usize << m;
    let dim = 2 * width;
    let rows: Vec<usize> = (0..2 * right).map(|i| (i / right) * width + i % right).collect();
    let cols: Vec<usize> = (0..left * d_in).map(|j| (j / d_in) * 2 + j % d_in).collect();
    let u = embed(w, &rows, &cols, dim, COMPLETION_SEED.wrapping_add(k as u64))?;
    Gate::new(u, (k..=k + m).collect())
}

/// Post-selected circuit whose block `⟨0|_{post} U |0⟩_{prep}` equals `A`.
pub fn circuit_from_unitary_mpo(a: &UnitaryMPO) -> Result<QuantumCircuit> {
    let dev = a.isometry_deviation();
    if dev > 1e-8 {
        return Err(Error::NotIsometric(dev));
    }
    if a.mpo.phys_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidArgument("circuits need qubit sites".into()));
    }
    let n = a.mpo.n();
    let m = ceil_log2(a.mpo.rank_profile().max_rank());
    let mut circ = QuantumCircuit::staircase(n, m);
    for (k, (core, w)) in a.mpo.cores().iter().zip(a.core_matrices()).enumerate() {
        circ.gates.push(staircase_gate(&w, core.left, core.right, 2, m, k)?);
    }
    circ.validate()?;
    Ok(circ)
}

/// Staircase preparation circuit for a normalized MPS: gate `k` is the
/// right-canonical core `k` completed to a unitary.
pub fn mps_prep_circuit(x: &TTVector) -> Result<QuantumCircuit> {
    let norm = x.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    if x.phys_dims().iter().any(|&d| d != 2) {
        return Err(Error::InvalidArgument("circuits need qubit sites".into()));
    }
    let canon = x.orthogonalize(0)?;
    let n = canon.n();
    let m = ceil_log2(canon.rank_profile().max_rank());
    let mut circ = QuantumCircuit::staircase(n, m);
    for (k, core) in canon.cores().iter().enumerate() {
        let w = prep_matrix(core);
        circ.gates.push(staircase_gate(&w, core.left, core.right, 1, m, k)?);
    }
    circ.validate()?;
    Ok(circ)
}

/// `W_{(s β), α} = B[α, s, β]`.
fn prep_matrix(core: &Core) -> CMat {
    CMat::from_fn(core.phys * core.right, core.left, |row, a| {
        core.get(a, row / core.right, row % core.right)
    })
}

// ---------------------------------------------------------------------------
// serialization

#[derive(Serialize, Deserialize)]
struct GateJson {
    wires: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    n_system: usize,
    n_ancilla: usize,
    gates: Vec<GateJson>,
    postselect_wires: Vec<usize>,
    #[serde(default)]
    prep_wires: Option<Vec<usize>>,
    #[serde(default)]
    input_wires: Option<Vec<usize>>,
    #[serde(default)]
    output_wires: Option<Vec<usize>>,
}

impl QuantumCircuit {
    pub fn to_json(&self) -> Result<String> {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let flat = linalg::to_row_major(&g.unitary);
                GateJson {
                    wires: g.wires.clone(),
                    re: flat.iter().map(|z| z.re).collect(),
                    im: flat.iter().map(|z| z.im).collect(),
                }
            })
            .collect();
        let doc = CircuitJson {
            n_system: self.n_system,
            n_ancilla: self.n_ancilla,
            gates,
            postselect_wires: self.postselect_wires.clone(),
            prep_wires: Some(self.prep_wires.clone()),
            input_wires: Some(self.input_wires.clone()),
            output_wires: Some(self.output_wires.clone()),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    /// Parses the JSON form; missing register lists default to the staircase
    /// layout.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CircuitJson = serde_json::from_str(text)?;
        let mut circ = QuantumCircuit::staircase(doc.n_system, doc.n_ancilla);
        circ.postselect_wires = doc.postselect_wires;
        if let Some(w) = doc.prep_wires {
            circ.prep_wires = w;
        }
        if let Some(w) = doc.input_wires {
            circ.input_wires = w;
        }
        if let Some(w) = doc.output_wires {
            circ.output_wires = w;
        }
        for g in doc.gates {
            let dim = 1usize << g.wires.len();
            if g.re.len() != dim * dim || g.im.len() != dim * dim {
                return Err(Error::Malformed("gate matrix has wrong length".into()));
            }
            let flat: Vec<C64> = g.re.iter().zip(&g.im).map(|(&r, &i)| C64::new(r, i)).collect();
            circ.gates.push(Gate::new(linalg::from_row_major(dim, dim, &flat), g.wires)?);
        }
        circ.validate()?;
        Ok(circ)
    }
}

//! Closed-form MPO constructors for the operators used throughout the toolkit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::tt::{Core, TTMatrix, TTVector, MATRIX_DENSE_LIMIT};

/// Open Ising chain `J Σ Z_k Z_{k+1} + g Σ X_k + h Σ Z_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub n: usize,
    pub j: f64,
    pub g: f64,
    pub h: f64,
}

impl IsingParams {
    pub fn new(n: usize) -> Self {
        IsingParams { n, j: 2.0, g: 1.0, h: 1.0 }
    }

    fn check(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("Ising chain needs n >= 2, got {}", self.n)));
        }
        Ok(())
    }
}

type Local = [[C64; 2]; 2];

const I2: Local = [[ONE, ZERO], [ZERO, ONE]];
const X2: Local = [[ZERO, ONE], [ONE, ZERO]];
const Z2: Local = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];
const P1: Local = [[ZERO, ZERO], [ZERO, ONE]];
const O2: Local = [[ZERO, ZERO], [ZERO, ZERO]];

fn lin(terms: &[(f64, Local)]) -> Local {
    let mut out = O2;
    for (w, m) in terms {
        for s in 0..2 {
            for l in 0..2 {
                out[s][l] += m[s][l] * *w;
            }
        }
    }
    out
}

fn single(s: usize, l: usize) -> Local {
    let mut m = O2;
    m[s][l] = ONE;
    m
}

/// Builds an MPO from a grid of 2×2 blocks per site: `blocks[k][a][b]`.
fn from_blocks(blocks: Vec<Vec<Vec<Local>>>) -> Result<TTMatrix> {
    let cores = blocks
        .into_iter()
        .map(|grid| {
            let left = grid.len();
            let right = grid[0].len();
            let mut c = Core::zeros(left, 4, right);
            for (a, row) in grid.iter().enumerate() {
                for (b, m) in row.iter().enumerate() {
                    for s in 0..2 {
                        for l in 0..2 {
                            c.set(a, s * 2 + l, b, m[s][l]);
                        }
                    }
                }
            }
            c
        })
        .collect();
    TTMatrix::new(cores)
}

/// MPO of `Σ_k h_k` for single-site terms (rank 2 for `n > 1`).
fn local_sum(terms: Vec<Local>) -> Result<TTMatrix> {
    let n = terms.len();
    if n == 1 {
        return from_blocks(vec![vec![vec![terms[0]]]]);
    }
    // bond 0: term already placed, bond 1: identity so far
    let mut blocks = Vec::with_capacity(n);
    for (k, h) in terms.into_iter().enumerate() {
        let grid = if k == 0 {
            vec![vec![h, I2]]
        } else if k == n - 1 {
            vec![vec![I2], vec![h]]
        } else {
            vec![vec![I2, O2], vec![h, I2]]
        };
        blocks.push(grid);
    }
    from_blocks(blocks)
}

fn check_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(Error::InvalidArgument(format!("need n >= {min}, got {n}")))
    } else {
        Ok(())
    }
}

/// `diag(0, 1, …, 2^n − 1)`.
pub fn diag_linear_mpo(n: usize) -> Result<TTMatrix> {
    check_n(n, 1)?;
    let terms = (0..n).map(|k| lin(&[((1u64 << (n - 1 - k)) as f64, P1)])).collect();
    local_sum(terms)
}

/// Finite-difference Laplacian `tridiag(−1, 2, −1)` with Dirichlet ends.
///
/// Bond states: 0 = identity on the left block, 1 = pending increment carry,
/// 2 = pending decrement borrow.
pub fn laplace_mpo(n: usize) -> Result<TTMatrix> {
    check_n(n, 1)?;
    let up = single(1, 0); // s=1, l=0
    let down = single(0, 1); // s=0, l=1
    if n == 1 {
        return from_blocks(vec![vec![vec![lin(&[(2.0, I2), (-1.0, X2)])]]]);
    }
    let mut blocks = Vec::with_capacity(n);
    blocks.push(vec![vec![I2, up, down]]);
    for _ in 1..n - 1 {
        blocks.push(vec![vec![I2, up, down], vec![O2, down, O2], vec![O2, O2, up]]);
    }
    blocks.push(vec![
        vec![lin(&[(2.0, I2), (-1.0, X2)])],
        vec![lin(&[(-1.0, down)])],
        vec![lin(&[(-1.0, up)])],
    ]);
    from_blocks(blocks)
}

/// Multi-controlled X: identity except the trailing 2×2 block is X.
pub fn mct_mpo(n: usize) -> Result<TTMatrix> {
    check_n(n, 2)?;
    let mut blocks = Vec::with_capacity(n);
    blocks.push(vec![vec![I2, P1]]);
    for _ in 1..n - 1 {
        blocks.push(vec![vec![I2, O2], vec![O2, P1]]);
    }
    blocks.push(vec![vec![I2], vec![lin(&[(1.0, X2), (-1.0, I2)])]]);
    from_blocks(blocks)
}

/// Nearest-neighbour Ising Hamiltonian, rank 3.
pub fn ising_mpo(p: &IsingParams) -> Result<TTMatrix> {
    p.check()?;
    let n = p.n;
    let onsite = lin(&[(p.g, X2), (p.h, Z2)]);
    let jz = lin(&[(p.j, Z2)]);
    // bond 0: nothing yet, 1: Z waiting for its partner, 2: done
    let mut blocks = Vec::with_capacity(n);
    blocks.push(vec![vec![I2, jz, onsite]]);
    for _ in 1..n - 1 {
        blocks.push(vec![vec![I2, jz, onsite], vec![O2, O2, Z2], vec![O2, O2, I2]]);
    }
    blocks.push(vec![vec![onsite], vec![Z2], vec![I2]]);
    from_blocks(blocks)
}

pub fn identity_mpo(n: usize) -> Result<TTMatrix> {
    check_n(n, 1)?;
    from_blocks(vec![vec![vec![I2]]; n])
}

/// Diagonal operator with `dense(y)` on the diagonal; ranks are those of `y`.
pub fn diag_mpo_from_mps(y: &TTVector) -> Result<TTMatrix> {
    let cores = y
        .cores()
        .iter()
        .map(|c| {
            let d = c.phys;
            let mut out = Core::zeros(c.left, d * d, c.right);
            for a in 0..c.left {
                for s in 0..d {
                    for b in 0..c.right {
                        out.set(a, s * d + s, b, c.get(a, s, b));
                    }
                }
            }
            out
        })
        .collect();
    TTMatrix::new(cores)
}

/// Dense Ising Hamiltonian (real symmetric).
pub fn ising_dense(p: &IsingParams) -> Result<CMat> {
    ising_mpo(p)?.to_dense()
}

/// `exp(−i·H·dt)` by dense Padé scaling-and-squaring, then TT-SVD at `tol`.
pub fn evolution_mpo(p: &IsingParams, dt: f64, tol: f64) -> Result<TTMatrix> {
    evolution_mpo_with_limit(p, dt, tol, MATRIX_DENSE_LIMIT)
}

pub fn evolution_mpo_with_limit(p: &IsingParams, dt: f64, tol: f64, limit: usize) -> Result<TTMatrix> {
    p.check()?;
    if p.n > limit {
        return Err(Error::SizeGuard { what: "evolution operator", n: p.n, limit });
    }
    TTMatrix::from_dense(&evolution_dense(p, dt)?, tol)
}

pub fn evolution_dense(p: &IsingParams, dt: f64) -> Result<CMat> {
    let h = ising_dense(p)?;
    let generator = h * C64::new(0.0, -dt);
    Ok(generator.exp())
}

/// Diagonal phase `exp(−i dt (J Σ z_k z_{k+1} + h Σ z_k))` as a rank-2 MPS.
fn diagonal_phase_mps(p: &IsingParams, dt: f64) -> Result<TTVector> {
    let n = p.n;
    let z = [1.0, -1.0];
    let phase = |x: f64| C64::from_polar(1.0, -dt * x);
    // bond carries the spin of the current site
    let cores = (0..n)
        .map(|k| {
            let left = if k == 0 { 1 } else { 2 };
            let right = if k == n - 1 { 1 } else { 2 };
            let mut c = Core::zeros(left, 2, right);
            for a in 0..left {
                for s in 0..2 {
                    let mut e = p.h * z[s];
                    if k > 0 {
                        e += p.j * z[a] * z[s];
                    }
                    for b in 0..right {
                        if right == 1 || b == s {
                            c.set(a, s, b, phase(e));
                        }
                    }
                }
            }
            c
        })
        .collect();
    TTVector::new(cores)
}

/// `⊗_k exp(−i θ X)`.
fn x_rotation_layer(n: usize, theta: f64) -> Result<TTMatrix> {
    let (cs, sn) = (theta.cos(), theta.sin());
    let r: Local = [[C64::new(cs, 0.0), C64::new(0.0, -sn)], [C64::new(0.0, -sn), C64::new(cs, 0.0)]];
    from_blocks(vec![vec![vec![r]]; n])
}

/// First- or second-order product formula for one step `dt`, grouping the
/// diagonal (ZZ and Z) terms against the transverse X terms.
pub fn trotter_mpo(p: &IsingParams, dt: f64, order: u8, tol: f64) -> Result<TTMatrix> {
    p.check()?;
    let diag = diag_mpo_from_mps(&diagonal_phase_mps(p, dt)?)?;
    let out = match order {
        1 => diag.matmat(&x_rotation_layer(p.n, p.g * dt)?)?,
        2 => {
            let half = x_rotation_layer(p.n, p.g * dt / 2.0)?;
            half.matmat(&diag)?.matmat(&half)?
        }
        _ => return Err(Error::InvalidArgument(format!("unsupported Trotter order {order}"))),
    };
    out.round(tol, None)
}

/// Dense defining matrices, used by the CLI heat maps and by tests.
pub fn diag_linear_dense(n: usize) -> CMat {
    let dim = 1usize << n;
    CMat::from_fn(dim, dim, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO })
}

pub fn laplace_dense(n: usize) -> CMat {
    let dim = 1usize << n;
    CMat::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(2.0, 0.0)
        } else if i.abs_diff(j) == 1 {
            C64::new(-1.0, 0.0)
        } else {
            ZERO
        }
    })
}

pub fn mct_dense(n: usize) -> CMat {
    let dim = 1usize << n;
    let mut m = linalg::identity(dim);
    m[(dim - 2, dim - 2)] = ZERO;
    m[(dim - 1, dim - 1)] = ZERO;
    m[(dim - 2, dim - 1)] = ONE;
    m[(dim - 1, dim - 2)] = ONE;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instances() {
        let d = diag_linear_mpo(2).unwrap().to_dense().unwrap();
        assert!(linalg::max_abs_diff(&d, &diag_linear_dense(2)) < 1e-15);
        let l = laplace_mpo(2).unwrap().to_dense().unwrap();
        assert!(linalg::max_abs_diff(&l, &laplace_dense(2)) < 1e-15);
        let cnot = mct_mpo(2).unwrap().to_dense().unwrap();
        assert!(linalg::max_abs_diff(&cnot, &mct_dense(2)) < 1e-15);
        assert!(linalg::max_abs_diff(&identity_mpo(3).unwrap().to_dense().unwrap(), &linalg::identity(8)) < 1e-15);
    }

    #[test]
    fn single_site_cases() {
        let d = diag_linear_mpo(1).unwrap().to_dense().unwrap();
        assert!(linalg::max_abs_diff(&d, &diag_linear_dense(1)) < 1e-15);
        let l = laplace_mpo(1).unwrap().to_dense().unwrap();
        assert!(linalg::max_abs_diff(&l, &laplace_dense(1)) < 1e-15);
    }

    #[test]
    fn argument_errors() {
        assert!(diag_linear_mpo(0).is_err());
        assert!(laplace_mpo(0).is_err());
        assert!(mct_mpo(1).is_err());
        assert!(identity_mpo(0).is_err());
        assert!(ising_mpo(&IsingParams::new(1)).is_err());
        assert!(trotter_mpo(&IsingParams::new(3), 0.1, 3, 1e-10).is_err());
        let mut p = IsingParams::new(11);
        assert!(matches!(evolution_mpo(&p, 0.1, 1e-6), Err(Error::SizeGuard { .. })));
        p.n = 3;
        assert!(evolution_mpo(&p, 0.1, 1e-6).is_ok());
    }

    #[test]
    fn ising_corner_entry() {
        // |00⟩: J·(+1)(+1) + h·(1+1) = 2 + 2
        let h = ising_dense(&IsingParams::new(2)).unwrap();
        assert!((h[(0, 0)] - C64::new(4.0, 0.0)).norm() < 1e-14);
    }
}

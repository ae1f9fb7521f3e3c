//! Fitting a target MPO `M` by `c·A`, where `A` is a unitary MPO and `c` a
//! real scale, by alternating the closed-form `c` update with Riemannian
//! ADAM sweeps over the isometric cores of `A`.
//!
//! Each core `A[k]^{s l}_{α β}` is viewed as the matrix
//! `W[k]_{(s β),(α l)}`, i.e. a map from (incoming bond, input qubit) to
//! (output qubit, outgoing bond). Inner cores are square unitaries, the first
//! core is a tall isometry and the last core has orthonormal rows; for the
//! last core the optimizer works on `W†`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE};
use crate::stiefel::{AdamConfig, RiemannianAdam};
use crate::tt::{transfer, transfer_right, Core, TTMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    PolarFromTarget,
    RandomHaar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Bond dimension `R` of the unitary MPO; a power of two.
    pub rank: usize,
    pub max_iters: usize,
    pub learning_rate: f64,
    /// Learning rate reached at the last iteration, decayed geometrically
    /// from `learning_rate`. Equal to `learning_rate` means constant.
    pub final_learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub c_update_every: usize,
    /// Stop when successive relative costs differ by less than this.
    pub convergence_tol: f64,
    pub seed: u64,
    pub init: InitStrategy,
    /// Holds `c` at this value instead of updating it in closed form.
    pub fixed_c: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            rank: 4,
            max_iters: 5000,
            learning_rate: 0.01,
            final_learning_rate: 1e-4,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            c_update_every: 1,
            convergence_tol: 1e-12,
            seed: 0,
            init: InitStrategy::PolarFromTarget,
            fixed_c: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 || !self.rank.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("rank {} must be a power of two", self.rank)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.fixed_c.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument("fixed_c must be positive".into()));
        }
        if self.c_update_every == 0 {
            return Err(Error::InvalidArgument("c_update_every must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.final_learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning rates must be >= 0".into()));
        }
        Ok(())
    }
}

/// A unitary MPO together with the scale `c` such that `c·A ≈ M`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMPO {
    pub mpo: TTMatrix,
    pub c: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `‖cA − M‖² / ‖M‖²` of the returned iterate.
    pub epsilon: f64,
    pub c: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Haar-averaged post-selection success probability `‖A‖²/2^n`.
    pub avg_success: f64,
    pub cost_history: Vec<f64>,
    pub c_history: Vec<f64>,
}

/// Shape of a core's matrix form and whether the optimizer holds its adjoint.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    left: usize,
    d: usize,
    right: usize,
    adjoint: bool,
}

impl Layout {
    fn of(left: usize, d: usize, right: usize) -> Self {
        Layout { left, d, right, adjoint: d * right < left * d }
    }

    fn point_shape(&self) -> (usize, usize) {
        let (r, c) = (self.d * self.right, self.left * self.d);
        if self.adjoint {
            (c, r)
        } else {
            (r, c)
        }
    }
}

/// Matrix form `W_{(s β),(α l)}` of an operator core.
pub fn core_matrix(core: &Core, d: usize) -> CMat {
    CMat::from_fn(d * core.right, core.left * d, |row, col| {
        let (s, b) = (row / core.right, row % core.right);
        let (a, l) = (col / d, col % d);
        core.get(a, s * d + l, b)
    })
}

fn matrix_core(w: &CMat, left: usize, d: usize, right: usize) -> Core {
    let mut core = Core::zeros(left, d * d, right);
    for s in 0..d {
        for b in 0..right {
            for a in 0..left {
                for l in 0..d {
                    core.set(a, s * d + l, b, w[(s * right + b, a * d + l)]);
                }
            }
        }
    }
    core
}

fn layouts(n: usize, rank: usize, d: usize) -> Vec<Layout> {
    (0..n)
        .map(|k| {
            let left = if k == 0 { 1 } else { rank };
            let right = if k == n - 1 { 1 } else { rank };
            Layout::of(left, d, right)
        })
        .collect()
}

fn point_of(core: &Core, lay: &Layout) -> CMat {
    let w = core_matrix(core, lay.d);
    if lay.adjoint {
        w.adjoint()
    } else {
        w
    }
}

fn core_of(point: &CMat, lay: &Layout) -> Core {
    if lay.adjoint {
        matrix_core(&point.adjoint(), lay.left, lay.d, lay.right)
    } else {
        matrix_core(point, lay.left, lay.d, lay.right)
    }
}

impl UnitaryMPO {
    fn layouts(&self) -> Vec<Layout> {
        self.mpo
            .cores()
            .iter()
            .zip(self.mpo.phys_dims())
            .map(|(c, &d)| Layout::of(c.left, d, c.right))
            .collect()
    }

    /// Wraps an operator whose cores already satisfy the isometry conditions.
    pub fn new(mpo: TTMatrix, c: f64) -> Result<Self> {
        let rank = mpo.rank_profile().max_rank();
        let u = UnitaryMPO { mpo, c, rank };
        let dev = u.isometry_deviation();
        if dev > 1e-10 {
            return Err(Error::NotIsometric(dev));
        }
        Ok(u)
    }

    /// Number of ancilla qubits carrying the bond, `⌈log₂ R⌉`.
    pub fn ancillas(&self) -> usize {
        ceil_log2(self.rank)
    }

    /// Worst `‖V†V − I‖_max` over all cores in their matrix form.
    pub fn isometry_deviation(&self) -> f64 {
        self.mpo
            .cores()
            .iter()
            .zip(self.layouts())
            .map(|(c, lay)| linalg::gram_deviation(&point_of(c, &lay)))
            .fold(0.0, f64::max)
    }

    /// Matrix forms `W[k]` (not adjointed) of all cores.
    pub fn core_matrices(&self) -> Vec<CMat> {
        self.mpo
            .cores()
            .iter()
            .zip(self.mpo.phys_dims())
            .map(|(c, &d)| core_matrix(c, d))
            .collect()
    }

    /// Haar-averaged success probability `‖A‖²/2^n`.
    pub fn avg_success(&self) -> f64 {
        avg_success_of(&self.mpo)
    }
}

pub(crate) fn ceil_log2(r: usize) -> usize {
    if r <= 1 {
        0
    } else {
        (usize::BITS - (r - 1).leading_zeros()) as usize
    }
}

pub(crate) fn avg_success_of(a: &TTMatrix) -> f64 {
    let nrm = a.frobenius_norm();
    let dim: f64 = a.phys_dims().iter().map(|&d| d as f64).product();
    nrm * nrm / dim
}

fn from_points(points: &[CMat], lays: &[Layout]) -> Result<TTMatrix> {
    TTMatrix::new(points.iter().zip(lays).map(|(p, l)| core_of(p, l)).collect())
}

/// `C = ‖cA − M‖² = c²‖A‖² − 2c·Re Tr[A†M] + ‖M‖²`, all in TT form.
pub fn cost(a: &TTMatrix, c: f64, m: &TTMatrix) -> Result<f64> {
    let na = a.frobenius_norm();
    let nm = m.frobenius_norm();
    let overlap = a.trace_adjoint_product(m)?;
    Ok(c * c * na * na - 2.0 * c * overlap.re + nm * nm)
}

/// Minimizer `c = Re Tr[A†M] / ‖A‖²` of [`cost`] over real `c`.
pub fn update_c(a: &TTMatrix, m: &TTMatrix) -> Result<f64> {
    let na = a.frobenius_norm();
    if na == 0.0 {
        return Err(Error::InvalidArgument("operator has zero norm".into()));
    }
    Ok(a.trace_adjoint_product(m)?.re / (na * na))
}

/// `Σ L[a',a] Y[a,p,b] R[b',b]` as a core `(a', p, b')`.
pub(crate) fn sandwich(l: &CMat, y: &Core, r: &CMat) -> Core {
    let t = l * y.right_matrix();
    let t = linalg::from_row_major(l.nrows() * y.phys, y.right, &linalg::to_row_major(&t));
    let g = t * r.transpose();
    Core::from_left_matrix(&g, l.nrows(), y.phys)
}

struct Sweep {
    norm2: f64,
    overlap: C64,
    grads: Vec<Core>,
}

/// Norm, overlap and the Wirtinger gradients `∂C/∂conj(A[k])` of all cores.
fn sweep(a: &TTMatrix, m: &TTMatrix, c: impl FnOnce(f64, C64) -> f64) -> Result<(Sweep, f64)> {
    let n = a.n();
    if m.n() != n || m.phys_dims() != a.phys_dims() {
        return Err(Error::DimensionMismatch("target and ansatz differ in shape".into()));
    }
    let (ac, mc) = (a.cores(), m.cores());
    let unit = CMat::from_element(1, 1, ONE);
    let mut laa = vec![unit.clone()];
    let mut lam = vec![unit.clone()];
    for k in 0..n {
        laa.push(transfer(&laa[k], &ac[k], &ac[k]));
        lam.push(transfer(&lam[k], &ac[k], &mc[k]));
    }
    let norm2 = laa[n][(0, 0)].re;
    let overlap = lam[n][(0, 0)];
    let c = c(norm2, overlap);
    let mut raa = unit.clone();
    let mut ram = unit;
    let mut grads = vec![Core::zeros(1, 1, 1); n];
    for k in (0..n).rev() {
        let mut g = sandwich(&laa[k], &ac[k], &raa).scaled(C64::new(c * c, 0.0));
        let cross = sandwich(&lam[k], &mc[k], &ram);
        for (x, y) in g.data.iter_mut().zip(&cross.data) {
            *x -= y * c;
        }
        grads[k] = g;
        raa = transfer_right(&raa, &ac[k], &ac[k]);
        ram = transfer_right(&ram, &ac[k], &mc[k]);
    }
    Ok((Sweep { norm2, overlap, grads }, c))
}

/// `∂C/∂conj(A[k])` for `C = ‖cA − M‖²`, by environment contraction.
pub fn euclidean_gradient(a: &TTMatrix, c: f64, m: &TTMatrix, k: usize) -> Result<Core> {
    if k >= a.n() {
        return Err(Error::OutOfRange { index: k, len: a.n() });
    }
    let (s, _) = sweep(a, m, |_, _| c)?;
    Ok(s.grads.into_iter().nth(k).expect("k checked"))
}

/// Bond gauge in which every core but the last is isometric in its matrix
/// form. The Gram matrices `K_k = H_k H_k†` satisfy the linear chain
/// `Σ_s A_{s,l} K_k A_{s,l'}† = δ_{ll'} K_{k−1}` with `K_{−1} = 1`, solved
/// jointly. `None` when the chain has no exact positive solution or is too
/// large to be worth solving.
fn isometric_gauge(t: &TTMatrix, d: usize) -> Option<TTMatrix> {
    const MAX_UNKNOWNS: usize = 600;
    let n = t.n();
    let cores = t.cores();
    if n < 2 {
        return None;
    }
    let bonds: Vec<usize> = cores[..n - 1].iter().map(|c| c.right).collect();
    let mut offsets = vec![0];
    for r in &bonds {
        offsets.push(offsets.last().unwrap() + r * r);
    }
    let unknowns = offsets[n - 1];
    if unknowns > MAX_UNKNOWNS {
        return None;
    }
    let rows: usize = cores[..n - 1].iter().map(|c| c.left * c.left * d * d).sum();
    let mut sys = CMat::zeros(rows, unknowns);
    let mut rhs = CMat::zeros(rows, 1);
    let mut row0 = 0;
    for (k, a) in cores[..n - 1].iter().enumerate() {
        let (r0, r1) = (a.left, a.right);
        for al in 0..r0 {
            for al2 in 0..r0 {
                for l in 0..d {
                    for l2 in 0..d {
                        let row = row0 + ((al * r0 + al2) * d + l) * d + l2;
                        if l == l2 {
                            if k == 0 {
                                rhs[(row, 0)] = ONE;
                            } else {
                                sys[(row, offsets[k - 1] + al * r0 + al2)] -= ONE;
                            }
                        }
                        for s in 0..d {
                            for b in 0..r1 {
                                let x = a.get(al, s * d + l, b);
                                for b2 in 0..r1 {
                                    sys[(row, offsets[k] + b * r1 + b2)] += x * a.get(al2, s * d + l2, b2).conj();
                                }
                            }
                        }
                    }
                }
            }
        }
        row0 += r0 * r0 * d * d;
    }
    let (u, sv, vt) = linalg::svd(&sys);
    let cut = sv.first().copied().unwrap_or(0.0) * 1e-12;
    let mut x = CMat::zeros(unknowns, 1);
    for (i, &si) in sv.iter().enumerate() {
        if si > cut {
            let coef = (u.column(i).adjoint() * &rhs)[(0, 0)] / si;
            x += vt.row(i).adjoint() * coef;
        }
    }
    if linalg::frob_norm(&(&sys * &x - &rhs)) > 1e-9 * linalg::frob_norm(&rhs) {
        return None;
    }

    let mut h_inv_prev = CMat::from_element(1, 1, ONE);
    let mut out = Vec::with_capacity(n);
    for (k, a) in cores[..n - 1].iter().enumerate() {
        let r1 = a.right;
        let kk = CMat::from_fn(r1, r1, |i, j| x[(offsets[k] + i * r1 + j, 0)]);
        let eig = ((&kk + kk.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if eig.eigenvalues.iter().any(|&e| e <= 1e-12 * top) {
            return None;
        }
        let v = &eig.eigenvectors;
        let root = |p: f64| {
            let diag = CMat::from_diagonal(&eig.eigenvalues.map(|e| C64::new(e.powf(p), 0.0)));
            v * diag * v.adjoint()
        };
        out.push(regauge(a, &h_inv_prev, &root(0.5)));
        h_inv_prev = root(-0.5);
    }
    out.push(regauge(&cores[n - 1], &h_inv_prev, &CMat::from_element(1, 1, ONE)));
    TTMatrix::new(out).ok()
}

/// `G[a,p,b] = Σ L[a,a'] A[a',p,b'] R[b',b]`.
fn regauge(a: &Core, l: &CMat, r: &CMat) -> Core {
    let mut g = Core::zeros(l.nrows(), a.phys, r.ncols());
    for i in 0..l.nrows() {
        for p in 0..a.phys {
            for j in 0..r.ncols() {
                let mut z = C64::new(0.0, 0.0);
                for a1 in 0..a.left {
                    for b1 in 0..a.right {
                        z += l[(i, a1)] * a.get(a1, p, b1) * r[(b1, j)];
                    }
                }
                g.set(i, p, j, z);
            }
        }
    }
    g
}

/// Starting point of the optimization.
pub fn init_unitary_mpo(m: &TTMatrix, rank: usize, strategy: InitStrategy, seed: u64) -> Result<UnitaryMPO> {
    if rank == 0 || !rank.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("rank {rank} must be a power of two")));
    }
    let n = m.n();
    let d = m.phys_dims()[0];
    if m.phys_dims().iter().any(|&x| x != d) {
        return Err(Error::InvalidArgument("mixed local dimensions are not supported".into()));
    }
    let lays = layouts(n, rank, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<CMat> = match strategy {
        InitStrategy::RandomHaar => lays
            .iter()
            .map(|l| {
                let (r, c) = l.point_shape();
                linalg::haar_isometry(r, c, &mut rng)
            })
            .collect(),
        InitStrategy::PolarFromTarget => {
            let rounded = m.round(1e-12, Some(rank))?;
            let rounded = isometric_gauge(&rounded, d).unwrap_or(rounded);
            rounded
                .cores()
                .iter()
                .zip(&lays)
                .map(|(core, lay)| {
                    let mut padded = Core::zeros(lay.left, d * d, lay.right);
                    for a in 0..core.left {
                        for p in 0..core.phys {
                            for b in 0..core.right {
                                padded.set(a, p, b, core.get(a, p, b));
                            }
                        }
                    }
                    let x = linalg::polar(&point_of(&padded, lay));
                    if linalg::gram_deviation(&x) < 1e-12 {
                        x
                    } else {
                        let (r, c) = lay.point_shape();
                        linalg::haar_isometry(r, c, &mut rng)
                    }
                })
                .collect()
        }
    };
    let mpo = from_points(&points, &lays)?;
    let c = update_c(&mpo, m).unwrap_or(0.0);
    Ok(UnitaryMPO { mpo, c, rank })
}

/// Alternating `c`-update / Riemannian ADAM fit of `M` by `c·A`.
///
/// Returns the best iterate seen (ADAM is not monotone). Non-convergence is
/// reported through the returned `epsilon`, not as an error.
pub fn fit_unitary_mpo(m: &TTMatrix, options: &FitOptions) -> Result<(UnitaryMPO, FitReport)> {
    options.validate()?;
    let m_norm = m.frobenius_norm();
    if m_norm == 0.0 {
        return Err(Error::InvalidArgument("target has zero norm".into()));
    }
    let target = m.scale(C64::new(1.0 / m_norm, 0.0));
    let init = init_unitary_mpo(&target, options.rank, options.init, options.seed)?;
    let lays = init.layouts();
    let mut points: Vec<CMat> = init.mpo.cores().iter().zip(&lays).map(|(c, l)| point_of(c, l)).collect();
    let shapes: Vec<(usize, usize)> = lays.iter().map(|l| l.point_shape()).collect();
    let config = AdamConfig {
        learning_rate: options.learning_rate,
        beta1: options.adam_betas.0,
        beta2: options.adam_betas.1,
        eps: options.adam_eps,
    };
    let mut adam = RiemannianAdam::new(config, &shapes);
    let decay = if options.learning_rate > 0.0 && options.max_iters > 1 {
        (options.final_learning_rate / options.learning_rate).powf(1.0 / (options.max_iters - 1) as f64)
    } else {
        1.0
    };

    let mut c = options.fixed_c.map_or(init.c, |v| v / m_norm);
    let mut best = (f64::INFINITY, points.clone(), c);
    let mut eps_history = Vec::new();
    let mut c_history = Vec::new();
    let mut prev_eps = f64::NAN;
    let mut iterations = 0;
    let mut lr = options.learning_rate;
    let mut a = init.mpo;
    loop {
        let refresh = options.fixed_c.is_none() && iterations % options.c_update_every == 0;
        let (sw, c_now) = sweep(&a, &target, |norm2, overlap| {
            if refresh && norm2 > 0.0 {
                overlap.re / norm2
            } else {
                c
            }
        })?;
        c = c_now;
        let eps = (c * c * sw.norm2 - 2.0 * c * sw.overlap.re + 1.0).max(0.0);
        eps_history.push(eps);
        c_history.push(c * m_norm);
        if eps < best.0 {
            best = (eps, points.clone(), c);
        }
        let converged = (eps - prev_eps).abs() < options.convergence_tol;
        if iterations >= options.max_iters || converged {
            break;
        }
        prev_eps = eps;
        let grads: Vec<CMat> = sw
            .grads
            .iter()
            .zip(&lays)
            .map(|(g, l)| point_of(g, l) * C64::new(2.0, 0.0))
            .collect();
        adam.step_with_lr(&mut points, &grads, lr)?;
        lr *= decay;
        a = from_points(&points, &lays)?;
        iterations += 1;
    }

    let (eps, pts, c_best) = best;
    let mpo = from_points(&pts, &lays)?;
    let unitary = UnitaryMPO { mpo, c: c_best * m_norm, rank: options.rank };
    let report = FitReport {
        epsilon: eps,
        c: unitary.c,
        iterations,
        seed: options.seed,
        avg_success: unitary.avg_success(),
        cost_history: eps_history.iter().map(|e| e * m_norm * m_norm).collect(),
        c_history,
    };
    Ok((unitary, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(16), 4);
    }

    #[test]
    fn cost_of_identical_operators() {
        let m = zoo::laplace_mpo(3).unwrap();
        assert!(cost(&m, 1.0, &m).unwrap().abs() < 1e-10);
        let i = zoo::identity_mpo(4).unwrap();
        assert!((cost(&i, 2.0, &i).unwrap() - 16.0).abs() < 1e-10);
    }

    #[test]
    fn c_update_cases() {
        let i = zoo::identity_mpo(3).unwrap();
        let two_i = i.scale(C64::new(2.0, 0.0));
        assert!((update_c(&i, &two_i).unwrap() - 2.0).abs() < 1e-12);
        let m = zoo::laplace_mpo(3).unwrap();
        let nm = m.frobenius_norm();
        let a = m.scale(C64::new(1.0 / nm, 0.0));
        assert!((update_c(&a, &m).unwrap() - nm).abs() < 1e-10);
        assert!(update_c(&i.scale(C64::new(0.0, 0.0)), &m).is_err());
    }

    #[test]
    fn options_validation() {
        let mut o = FitOptions { rank: 3, ..Default::default() };
        assert!(o.validate().is_err());
        o.rank = 4;
        o.max_iters = 0;
        assert!(o.validate().is_err());
        let m = zoo::identity_mpo(3).unwrap();
        assert!(init_unitary_mpo(&m, 6, InitStrategy::RandomHaar, 0).is_err());
    }

    #[test]
    fn gradient_site_out_of_range() {
        let m = zoo::identity_mpo(3).unwrap();
        assert!(matches!(euclidean_gradient(&m, 1.0, &m, 3), Err(Error::OutOfRange { .. })));
    }
}

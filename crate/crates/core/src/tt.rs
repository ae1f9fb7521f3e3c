//! Tensor-train containers (MPS / MPO) and their algebra.
//!
//! Cores are stored row-major with index order `(left bond, physical, right
//! bond)`. For operators the physical index is the pair `(row s, column l)`
//! flattened as `s * d + l`, so an MPO core is a row-major `(α, s, l, β)`
//! array. Site 0 is the most significant digit of every dense index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

/// Largest qubit count densified by default for vectors.
pub const VECTOR_DENSE_LIMIT: usize = 14;
/// Largest qubit count densified by default for operators.
pub const MATRIX_DENSE_LIMIT: usize = 10;

/// One 3-way core `(left, phys, right)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    pub left: usize,
    pub phys: usize,
    pub right: usize,
    pub data: Vec<C64>,
}

impl Core {
    pub fn new(left: usize, phys: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != left * phys * right {
            return Err(Error::Malformed(format!(
                "core of shape ({left},{phys},{right}) given {} entries",
                data.len()
            )));
        }
        Ok(Core { left, phys, right, data })
    }

    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Core { left, phys, right, data: vec![ZERO; left * phys * right] }
    }

    #[inline]
    pub fn idx(&self, a: usize, p: usize, b: usize) -> usize {
        (a * self.phys + p) * self.right + b
    }

    #[inline]
    pub fn get(&self, a: usize, p: usize, b: usize) -> C64 {
        self.data[self.idx(a, p, b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, p: usize, b: usize, v: C64) {
        let i = self.idx(a, p, b);
        self.data[i] = v;
    }

    /// `(left·phys) × right` unfolding.
    pub fn left_matrix(&self) -> CMat {
        linalg::from_row_major(self.left * self.phys, self.right, &self.data)
    }

    /// `left × (phys·right)` unfolding.
    pub fn right_matrix(&self) -> CMat {
        linalg::from_row_major(self.left, self.phys * self.right, &self.data)
    }

    pub fn from_left_matrix(m: &CMat, left: usize, phys: usize) -> Self {
        debug_assert_eq!(m.nrows(), left * phys);
        Core { left, phys, right: m.ncols(), data: linalg::to_row_major(m) }
    }

    pub fn from_right_matrix(m: &CMat, phys: usize, right: usize) -> Self {
        debug_assert_eq!(m.ncols(), phys * right);
        Core { left: m.nrows(), phys, right, data: linalg::to_row_major(m) }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Core { data: self.data.iter().map(|z| z * c).collect(), ..self.clone() }
    }
}

/// Bond dimensions `r_0 .. r_n` of a chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankProfile {
    pub bonds: Vec<usize>,
}

impl RankProfile {
    pub fn max_rank(&self) -> usize {
        self.bonds.iter().copied().max().unwrap_or(1)
    }
}

/// Chain of cores with the shared algebra. `TTVector` and `TTMatrix` wrap it.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TensorTrain {
    pub cores: Vec<Core>,
}

impl TensorTrain {
    fn validate(cores: &[Core]) -> Result<()> {
        if cores.is_empty() {
            return Err(Error::Empty);
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::Malformed("boundary bonds must be 1".into()));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::Malformed(format!(
                    "bond {k}: right {} != next left {}",
                    w[0].right, w[1].left
                )));
            }
        }
        if cores.iter().any(|c| c.phys == 0 || c.left == 0 || c.right == 0) {
            return Err(Error::Malformed("zero-sized core".into()));
        }
        Ok(())
    }

    fn n(&self) -> usize {
        self.cores.len()
    }

    fn ranks(&self) -> RankProfile {
        let mut bonds = vec![1];
        bonds.extend(self.cores.iter().map(|c| c.right));
        RankProfile { bonds }
    }

    /// Sequential SVD of the unfoldings with per-bond budget
    /// `tol·‖dense‖/√(n−1)`.
    fn from_dense(dense: &[C64], dims: &[usize], tol: f64) -> Result<Self> {
        if dense.is_empty() || dims.is_empty() {
            return Err(Error::Empty);
        }
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance {tol} must be finite and >= 0")));
        }
        let total: usize = dims.iter().product();
        if total != dense.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims product {total} != length {}",
                dense.len()
            )));
        }
        let n = dims.len();
        let norm = dense.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let delta = if n > 1 { tol * norm / ((n - 1) as f64).sqrt() } else { 0.0 };
        let mut cores = Vec::with_capacity(n);
        let mut rem = dense.to_vec();
        let mut r_prev = 1;
        let mut rest = total;
        for &d in &dims[..n - 1] {
            rest /= d;
            let m = linalg::from_row_major(r_prev * d, rest, &rem);
            let (u, s, vt) = linalg::svd(&m);
            let r = linalg::truncation_rank(&s, delta);
            let u = u.columns(0, r).into_owned();
            cores.push(Core::from_left_matrix(&u, r_prev, d));
            let mut sv = vt.rows(0, r).into_owned();
            for i in 0..r {
                for j in 0..sv.ncols() {
                    sv[(i, j)] *= s[i];
                }
            }
            rem = linalg::to_row_major(&sv);
            r_prev = r;
        }
        cores.push(Core::new(r_prev, dims[n - 1], 1, rem)?);
        Ok(TensorTrain { cores })
    }

    fn to_dense(&self) -> Vec<C64> {
        let mut acc = vec![ONE];
        let mut prefix = 1usize;
        let mut bond = 1usize;
        for core in &self.cores {
            let (d, r) = (core.phys, core.right);
            let mut next = vec![ZERO; prefix * d * r];
            for i in 0..prefix {
                for a in 0..bond {
                    let w = acc[i * bond + a];
                    if w == ZERO {
                        continue;
                    }
                    for p in 0..d {
                        let base = core.idx(a, p, 0);
                        let out = (i * d + p) * r;
                        for b in 0..r {
                            next[out + b] += w * core.data[base + b];
                        }
                    }
                }
            }
            acc = next;
            prefix *= d;
            bond = r;
        }
        acc
    }

    /// `Σ conj(self)·other` by left-to-right transfer matrices.
    fn dot(&self, other: &TensorTrain) -> Result<C64> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch(format!("{} vs {} sites", self.n(), other.n())));
        }
        let mut env = CMat::from_element(1, 1, ONE);
        for (x, y) in self.cores.iter().zip(&other.cores) {
            if x.phys != y.phys {
                return Err(Error::DimensionMismatch("physical dimensions differ".into()));
            }
            env = transfer(&env, x, y);
        }
        Ok(env[(0, 0)])
    }

    fn norm(&self) -> f64 {
        let v = self.dot(self).expect("same chain");
        v.re.max(0.0).sqrt()
    }

    fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.cores[0] = out.cores[0].scaled(c);
        out
    }

    fn add(&self, other: &TensorTrain) -> Result<Self> {
        let n = self.n();
        if n != other.n() {
            return Err(Error::DimensionMismatch(format!("{} vs {} sites", n, other.n())));
        }
        if n == 1 {
            let (x, y) = (&self.cores[0], &other.cores[0]);
            if x.phys != y.phys {
                return Err(Error::DimensionMismatch("physical dimensions differ".into()));
            }
            let data = x.data.iter().zip(&y.data).map(|(a, b)| a + b).collect();
            return Ok(TensorTrain { cores: vec![Core::new(1, x.phys, 1, data)?] });
        }
        let mut cores = Vec::with_capacity(n);
        for k in 0..n {
            let (x, y) = (&self.cores[k], &other.cores[k]);
            if x.phys != y.phys {
                return Err(Error::DimensionMismatch("physical dimensions differ".into()));
            }
            let left = if k == 0 { 1 } else { x.left + y.left };
            let right = if k == n - 1 { 1 } else { x.right + y.right };
            let (yl, yr) = (if k == 0 { 0 } else { x.left }, if k == n - 1 { 0 } else { x.right });
            let mut c = Core::zeros(left, x.phys, right);
            for a in 0..x.left {
                for p in 0..x.phys {
                    for b in 0..x.right {
                        c.set(a, p, b, x.get(a, p, b));
                    }
                }
            }
            for a in 0..y.left {
                for p in 0..y.phys {
                    for b in 0..y.right {
                        c.set(a + yl, p, b + yr, y.get(a, p, b));
                    }
                }
            }
            cores.push(c);
        }
        Ok(TensorTrain { cores })
    }

    /// Makes core `k` left-orthogonal and pushes the remainder into `k+1`.
    fn left_orth_step(&mut self, k: usize) {
        let core = &self.cores[k];
        let (q, r) = linalg::qr_positive(&core.left_matrix());
        let (left, phys) = (core.left, core.phys);
        self.cores[k] = Core::from_left_matrix(&q, left, phys);
        let next = &self.cores[k + 1];
        let m = r * next.right_matrix();
        self.cores[k + 1] = Core::from_right_matrix(&m, next.phys, next.right);
    }

    /// Makes core `k` right-orthogonal and pushes the remainder into `k−1`.
    fn right_orth_step(&mut self, k: usize) {
        let core = &self.cores[k];
        let (q, r) = linalg::qr_positive(&core.right_matrix().adjoint());
        let (phys, right) = (core.phys, core.right);
        self.cores[k] = Core::from_right_matrix(&q.adjoint(), phys, right);
        let prev = &self.cores[k - 1];
        let m = prev.left_matrix() * r.adjoint();
        self.cores[k - 1] = Core::from_left_matrix(&m, prev.left, prev.phys);
    }

    fn orthogonalize(&self, center: usize) -> Result<Self> {
        let n = self.n();
        if center >= n {
            return Err(Error::OutOfRange { index: center, len: n });
        }
        let mut out = self.clone();
        for k in 0..center {
            out.left_orth_step(k);
        }
        for k in (center + 1..n).rev() {
            out.right_orth_step(k);
        }
        Ok(out)
    }

    fn round(&self, tol: f64, max_rank: Option<usize>) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance {tol} must be finite and >= 0")));
        }
        if max_rank == Some(0) {
            return Err(Error::InvalidArgument("rank cap must be >= 1".into()));
        }
        let n = self.n();
        let mut out = self.clone();
        if n == 1 {
            return Ok(out);
        }
        for k in (1..n).rev() {
            out.right_orth_step(k);
        }
        let norm = linalg::frob_norm(&out.cores[0].left_matrix());
        let delta = tol * norm / ((n - 1) as f64).sqrt();
        for k in 0..n - 1 {
            let core = &out.cores[k];
            let (u, s, vt) = linalg::svd(&core.left_matrix());
            let mut r = linalg::truncation_rank(&s, delta);
            if let Some(cap) = max_rank {
                r = r.min(cap);
            }
            let (left, phys) = (core.left, core.phys);
            out.cores[k] = Core::from_left_matrix(&u.columns(0, r).into_owned(), left, phys);
            let mut sv = vt.rows(0, r).into_owned();
            for i in 0..r {
                for j in 0..sv.ncols() {
                    sv[(i, j)] *= s[i];
                }
            }
            let next = &out.cores[k + 1];
            let m = sv * next.right_matrix();
            out.cores[k + 1] = Core::from_right_matrix(&m, next.phys, next.right);
        }
        Ok(out)
    }
}

/// One step of the `⟨x|y⟩` transfer: `E' = Σ_{a',a,p} E[a',a] conj(x[a',p,·]) y[a,p,·]`.
pub(crate) fn transfer(env: &CMat, x: &Core, y: &Core) -> CMat {
    // T[a',(p,b)] = Σ_a E[a',a] y[a,(p,b)]
    let t = env * y.right_matrix();
    let t = linalg::from_row_major(x.left * x.phys, y.right, &linalg::to_row_major(&t));
    x.left_matrix().adjoint() * t
}

/// Right-to-left counterpart of [`transfer`]:
/// `E'[a',a] = Σ_{p,b',b} conj(x[a',p,b']) y[a,p,b] E[b',b]`.
pub(crate) fn transfer_right(env: &CMat, x: &Core, y: &Core) -> CMat {
    // T[(a,p), b'] = Σ_b y[(a,p),b] E[b',b]
    let t = y.left_matrix() * env.transpose();
    let t = linalg::from_row_major(y.left, y.phys * x.right, &linalg::to_row_major(&t));
    // E'[a',a] = Σ_{(p,b')} conj(x[a',(p,b')]) T[a,(p,b')]
    x.right_matrix().conjugate() * t.transpose()
}

fn check_dense_guard(n: usize, limit: usize, what: &'static str) -> Result<()> {
    if n > limit {
        Err(Error::SizeGuard { what, n, limit })
    } else {
        Ok(())
    }
}

fn log2_exact(len: usize) -> Result<usize> {
    if len == 0 {
        return Err(Error::Empty);
    }
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

// ---------------------------------------------------------------------------

/// Matrix product state / TT-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TTVector {
    pub(crate) tt: TensorTrain,
}

impl TTVector {
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        TensorTrain::validate(&cores)?;
        Ok(TTVector { tt: TensorTrain { cores } })
    }

    /// TT-SVD of a dense qubit vector (length `2^n`).
    pub fn from_dense(dense: &[C64], tol: f64) -> Result<Self> {
        let n = log2_exact(dense.len())?;
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        Self::from_dense_with_dims(dense, &vec![2; n], tol)
    }

    pub fn from_dense_with_dims(dense: &[C64], dims: &[usize], tol: f64) -> Result<Self> {
        Ok(TTVector { tt: TensorTrain::from_dense(dense, dims, tol)? })
    }

    /// Rank-1 state from per-site local vectors.
    pub fn product(locals: &[Vec<C64>]) -> Result<Self> {
        let cores = locals
            .iter()
            .map(|v| Core::new(1, v.len(), 1, v.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    /// Computational basis state `|bits⟩` (qubits).
    pub fn basis_state(bits: &[u8]) -> Result<Self> {
        let locals: Vec<Vec<C64>> = bits
            .iter()
            .map(|&b| if b == 0 { vec![ONE, ZERO] } else { vec![ZERO, ONE] })
            .collect();
        Self::product(&locals)
    }

    pub fn n(&self) -> usize {
        self.tt.n()
    }

    pub fn cores(&self) -> &[Core] {
        &self.tt.cores
    }

    pub fn into_cores(self) -> Vec<Core> {
        self.tt.cores
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tt.cores.iter().map(|c| c.phys).collect()
    }

    pub fn rank_profile(&self) -> RankProfile {
        self.tt.ranks()
    }

    pub fn to_dense(&self) -> Result<Vec<C64>> {
        self.to_dense_with_limit(VECTOR_DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<Vec<C64>> {
        check_dense_guard(self.n(), limit, "vector")?;
        Ok(self.tt.to_dense())
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn dot(&self, other: &TTVector) -> Result<C64> {
        self.tt.dot(&other.tt)
    }

    pub fn norm(&self) -> f64 {
        self.tt.norm()
    }

    pub fn add(&self, other: &TTVector) -> Result<TTVector> {
        Ok(TTVector { tt: self.tt.add(&other.tt)? })
    }

    pub fn scale(&self, c: C64) -> TTVector {
        TTVector { tt: self.tt.scaled(c) }
    }

    pub fn round(&self, tol: f64, max_rank: Option<usize>) -> Result<TTVector> {
        Ok(TTVector { tt: self.tt.round(tol, max_rank)? })
    }

    pub fn orthogonalize(&self, center: usize) -> Result<TTVector> {
        Ok(TTVector { tt: self.tt.orthogonalize(center)? })
    }

    /// Entry at a multi-index.
    pub fn element(&self, index: &[usize]) -> Result<C64> {
        if index.len() != self.n() {
            return Err(Error::DimensionMismatch("index length".into()));
        }
        let mut row = vec![ONE];
        for (core, &p) in self.tt.cores.iter().zip(index) {
            if p >= core.phys {
                return Err(Error::OutOfRange { index: p, len: core.phys });
            }
            let mut next = vec![ZERO; core.right];
            for (a, w) in row.iter().enumerate() {
                for (b, slot) in next.iter_mut().enumerate() {
                    *slot += w * core.get(a, p, b);
                }
            }
            row = next;
        }
        Ok(row[0])
    }
}

// ---------------------------------------------------------------------------

/// Matrix product operator / TT-matrix with square local dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct TTMatrix {
    pub(crate) tt: TensorTrain,
    phys_dims: Vec<usize>,
}

impl TTMatrix {
    /// Builds from `(α, s·d + l, β)` cores; each core's physical size must be a
    /// perfect square `d²`.
    pub fn new(cores: Vec<Core>) -> Result<Self> {
        TensorTrain::validate(&cores)?;
        let phys_dims = cores
            .iter()
            .map(|c| {
                let d = (c.phys as f64).sqrt().round() as usize;
                if d * d == c.phys {
                    Ok(d)
                } else {
                    Err(Error::Malformed(format!("operator core phys {} is not square", c.phys)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TTMatrix { tt: TensorTrain { cores }, phys_dims })
    }

    /// Builds from 4-way cores given as closures `f(α, s, l, β)`.
    pub fn from_fn(
        shapes: &[(usize, usize, usize)],
        mut f: impl FnMut(usize, usize, usize, usize, usize) -> C64,
    ) -> Result<Self> {
        let cores = shapes
            .iter()
            .enumerate()
            .map(|(k, &(left, d, right))| {
                let mut c = Core::zeros(left, d * d, right);
                for a in 0..left {
                    for s in 0..d {
                        for l in 0..d {
                            for b in 0..right {
                                c.set(a, s * d + l, b, f(k, a, s, l, b));
                            }
                        }
                    }
                }
                c
            })
            .collect();
        Self::new(cores)
    }

    /// TT-SVD of a dense `2^n × 2^n` operator.
    pub fn from_dense(dense: &CMat, tol: f64) -> Result<Self> {
        if dense.nrows() != dense.ncols() {
            return Err(Error::DimensionMismatch("operator must be square".into()));
        }
        let n = log2_exact(dense.nrows())?;
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        let dim = dense.nrows();
        let mut interleaved = vec![ZERO; dim * dim];
        for row in 0..dim {
            for col in 0..dim {
                interleaved[interleave(row, col, n)] = dense[(row, col)];
            }
        }
        let tt = TensorTrain::from_dense(&interleaved, &vec![4; n], tol)?;
        Ok(TTMatrix { tt, phys_dims: vec![2; n] })
    }

    pub fn n(&self) -> usize {
        self.tt.n()
    }

    pub fn cores(&self) -> &[Core] {
        &self.tt.cores
    }

    pub fn phys_dims(&self) -> &[usize] {
        &self.phys_dims
    }

    pub fn rank_profile(&self) -> RankProfile {
        self.tt.ranks()
    }

    /// Core entry `A[k]^{s l}_{α β}`.
    #[inline]
    pub fn entry(&self, k: usize, a: usize, s: usize, l: usize, b: usize) -> C64 {
        let d = self.phys_dims[k];
        self.tt.cores[k].get(a, s * d + l, b)
    }

    pub fn to_dense(&self) -> Result<CMat> {
        self.to_dense_with_limit(MATRIX_DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<CMat> {
        check_dense_guard(self.n(), limit, "matrix")?;
        if self.phys_dims.iter().any(|&d| d != 2) {
            return Err(Error::InvalidArgument("dense export supports qubit sites only".into()));
        }
        let n = self.n();
        let flat = self.tt.to_dense();
        let dim = 1usize << n;
        let mut out = CMat::zeros(dim, dim);
        for row in 0..dim {
            for col in 0..dim {
                out[(row, col)] = flat[interleave(row, col, n)];
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &TTVector) -> Result<TTVector> {
        if self.n() != x.n() {
            return Err(Error::DimensionMismatch(format!("{} vs {} sites", self.n(), x.n())));
        }
        let mut cores = Vec::with_capacity(self.n());
        for (k, (a, v)) in self.tt.cores.iter().zip(&x.tt.cores).enumerate() {
            let d = self.phys_dims[k];
            if v.phys != d {
                return Err(Error::DimensionMismatch(format!("site {k}: operator {d}, vector {}", v.phys)));
            }
            let mut c = Core::zeros(a.left * v.left, d, a.right * v.right);
            for ia in 0..a.left {
                for iv in 0..v.left {
                    for s in 0..d {
                        for l in 0..d {
                            for ja in 0..a.right {
                                let w = a.get(ia, s * d + l, ja);
                                if w == ZERO {
                                    continue;
                                }
                                for jv in 0..v.right {
                                    let i = c.idx(ia * v.left + iv, s, ja * v.right + jv);
                                    c.data[i] += w * v.get(iv, l, jv);
                                }
                            }
                        }
                    }
                }
            }
            cores.push(c);
        }
        TTVector::new(cores)
    }

    /// Operator product `self · other`.
    pub fn matmat(&self, other: &TTMatrix) -> Result<TTMatrix> {
        if self.n() != other.n() || self.phys_dims != other.phys_dims {
            return Err(Error::DimensionMismatch("operator shapes differ".into()));
        }
        let mut cores = Vec::with_capacity(self.n());
        for (k, (a, b)) in self.tt.cores.iter().zip(&other.tt.cores).enumerate() {
            let d = self.phys_dims[k];
            let mut c = Core::zeros(a.left * b.left, d * d, a.right * b.right);
            for ia in 0..a.left {
                for ib in 0..b.left {
                    for s in 0..d {
                        for m in 0..d {
                            for ja in 0..a.right {
                                let w = a.get(ia, s * d + m, ja);
                                if w == ZERO {
                                    continue;
                                }
                                for t in 0..d {
                                    for jb in 0..b.right {
                                        let i = c.idx(ia * b.left + ib, s * d + t, ja * b.right + jb);
                                        c.data[i] += w * b.get(ib, m * d + t, jb);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            cores.push(c);
        }
        TTMatrix::new(cores)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.tt.norm()
    }

    /// `Tr[self† other]`.
    pub fn trace_adjoint_product(&self, other: &TTMatrix) -> Result<C64> {
        if self.phys_dims != other.phys_dims {
            return Err(Error::DimensionMismatch("operator shapes differ".into()));
        }
        self.tt.dot(&other.tt)
    }

    pub fn add(&self, other: &TTMatrix) -> Result<TTMatrix> {
        if self.phys_dims != other.phys_dims {
            return Err(Error::DimensionMismatch("operator shapes differ".into()));
        }
        Ok(TTMatrix { tt: self.tt.add(&other.tt)?, phys_dims: self.phys_dims.clone() })
    }

    pub fn scale(&self, c: C64) -> TTMatrix {
        TTMatrix { tt: self.tt.scaled(c), phys_dims: self.phys_dims.clone() }
    }

    pub fn round(&self, tol: f64, max_rank: Option<usize>) -> Result<TTMatrix> {
        Ok(TTMatrix { tt: self.tt.round(tol, max_rank)?, phys_dims: self.phys_dims.clone() })
    }

    pub fn orthogonalize(&self, center: usize) -> Result<TTMatrix> {
        Ok(TTMatrix { tt: self.tt.orthogonalize(center)?, phys_dims: self.phys_dims.clone() })
    }

    /// Conjugate transpose, core by core.
    pub fn adjoint(&self) -> TTMatrix {
        let cores = self
            .tt
            .cores
            .iter()
            .zip(&self.phys_dims)
            .map(|(c, &d)| {
                let mut out = Core::zeros(c.left, c.phys, c.right);
                for a in 0..c.left {
                    for s in 0..d {
                        for l in 0..d {
                            for b in 0..c.right {
                                out.set(a, l * d + s, b, c.get(a, s * d + l, b).conj());
                            }
                        }
                    }
                }
                out
            })
            .collect();
        TTMatrix { tt: TensorTrain { cores }, phys_dims: self.phys_dims.clone() }
    }
}

/// Position of `(row, col)` in the site-interleaved `(s1 l1 s2 l2 …)` layout.
fn interleave(row: usize, col: usize, n: usize) -> usize {
    let mut idx = 0;
    for k in 0..n {
        let shift = n - 1 - k;
        let s = (row >> shift) & 1;
        let l = (col >> shift) & 1;
        idx = idx * 4 + s * 2 + l;
    }
    idx
}

/// TT-SVD of a dense qubit vector.
pub fn tt_svd_vector(dense: &[C64], tol: f64) -> Result<TTVector> {
    TTVector::from_dense(dense, tol)
}

/// TT-SVD of a dense qubit operator.
pub fn tt_svd_matrix(dense: &CMat, tol: f64) -> Result<TTMatrix> {
    TTMatrix::from_dense(dense, tol)
}

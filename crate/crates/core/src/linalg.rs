//! Dense complex linear-algebra helpers shared by the tensor-train, manifold
//! and circuit code. Everything is a thin layer over `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn from_row_major(rows: usize, cols: usize, data: &[C64]) -> CMat {
    CMat::from_row_slice(rows, cols, data)
}

pub fn to_row_major(m: &CMat) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry of `V†V − I`.
pub fn gram_deviation(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((g[(i, j)] - target).norm());
        }
    }
    dev
}

pub fn is_isometry(v: &CMat, tol: f64) -> bool {
    v.nrows() >= v.ncols() && gram_deviation(v) <= tol
}

/// Thin QR with the convention that the diagonal of `R` is real and
/// non-negative. For an `m×p` input, `Q` is `m×min(m,p)`.
pub fn qr_positive(a: &CMat) -> (CMat, CMat) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let k = q.ncols().min(r.nrows());
    for i in 0..k {
        let d = r[(i, i)];
        let mag = d.norm();
        if mag > 0.0 {
            let phase = d / mag;
            for row in 0..q.nrows() {
                q[(row, i)] *= phase;
            }
            let conj = phase.conj();
            for col in 0..r.ncols() {
                r[(i, col)] *= conj;
            }
        }
    }
    (q, r)
}

/// Thin SVD `a = U diag(s) Vt` with singular values in descending order.
///
/// Computed with faer: nalgebra's bidiagonal SVD returns wrong factors on
/// some rank-deficient inputs with repeated singular values.
pub fn svd(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (m, p) = a.shape();
    let k = m.min(p);
    if k == 0 {
        return (CMat::zeros(m, 0), Vec::new(), CMat::zeros(0, p));
    }
    let fa = faer::Mat::<C64>::from_fn(m, p, |i, j| a[(i, j)]);
    match fa.thin_svd() {
        Ok(f) => {
            let (u, v, d) = (f.U(), f.V(), f.S().column_vector());
            (
                CMat::from_fn(m, k, |i, j| u[(i, j)]),
                (0..k).map(|i| d[i].re).collect(),
                CMat::from_fn(k, p, |i, j| v[(j, i)].conj()),
            )
        }
        Err(_) => {
            let svd = a.clone().svd(true, true);
            let u = svd.u.expect("u requested");
            let vt = svd.v_t.expect("v_t requested");
            (u, svd.singular_values.iter().copied().collect(), vt)
        }
    }
}

/// Number of leading singular values to keep so that the discarded tail has
/// Euclidean norm at most `delta`. Values that are numerically zero relative
/// to the largest one are always dropped; at least one value is kept.
pub fn truncation_rank(s: &[f64], delta: f64) -> usize {
    if s.is_empty() {
        return 0;
    }
    let floor = s[0] * 1e-14;
    let mut keep = s.iter().take_while(|&&x| x > floor).count().max(1);
    let mut tail = s[keep..].iter().map(|x| x * x).sum::<f64>();
    while keep > 1 {
        let next = tail + s[keep - 1] * s[keep - 1];
        if next.sqrt() <= delta {
            tail = next;
            keep -= 1;
        } else {
            break;
        }
    }
    keep
}

/// Unitary (isometric) factor of the polar decomposition of a tall or square
/// matrix.
pub fn polar(a: &CMat) -> CMat {
    let (u, _, vt) = svd(a);
    u * vt
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Haar-distributed `m×p` isometry (QR of a complex Gaussian matrix).
pub fn haar_isometry(m: usize, p: usize, rng: &mut ChaCha8Rng) -> CMat {
    assert!(m >= p, "isometry needs m >= p");
    let (q, _) = qr_positive(&gaussian(m, p, rng));
    q
}

/// Extends an `m×p` isometry to an `m×m` unitary whose first `p` columns are
/// exactly `v`. The complement is the QR of a seeded Gaussian block after
/// projecting out the range of `v`.
pub fn complete_isometry(v: &CMat, seed: u64) -> Result<CMat> {
    let (m, p) = v.shape();
    if m < p {
        return Err(Error::InvalidArgument(format!(
            "cannot complete a {m}x{p} matrix: more columns than rows"
        )));
    }
    let dev = gram_deviation(v);
    if dev > 1e-8 {
        return Err(Error::NotIsometric(dev));
    }
    if m == p {
        return Ok(v.clone());
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = gaussian(m, m - p, &mut rng);
    // two passes of projection keep the complement orthogonal to working precision
    for _ in 0..2 {
        let overlap = v.adjoint() * &g;
        g -= v * overlap;
    }
    let (q, r) = qr_positive(&g);
    let rmin = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if !(rmin > 1e-10) {
        return Err(Error::RankDeficient);
    }
    let mut out = CMat::zeros(m, m);
    out.columns_mut(0, p).copy_from(v);
    out.columns_mut(p, m - p).copy_from(&q);
    Ok(out)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

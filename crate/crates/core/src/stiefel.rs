//! Complex Stiefel manifold `St(m, p) = {V ∈ ℂ^{m×p} : V†V = I}` with the
//! Euclidean metric, QR retraction and a Riemannian ADAM optimizer over a
//! product of such manifolds.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Tolerance on `‖V†V − I‖_max` accepted as "isometric" at API boundaries.
pub const ISOMETRY_TOL: f64 = 1e-8;

/// Orthogonal projection of an ambient direction onto the tangent space at
/// `v`: `ξ = G − V (V†G + G†V)/2`.
pub fn project_tangent(v: &CMat, g: &CMat) -> Result<CMat> {
    if v.shape() != g.shape() {
        return Err(Error::DimensionMismatch(format!("point {:?} vs direction {:?}", v.shape(), g.shape())));
    }
    let dev = linalg::gram_deviation(v);
    if v.nrows() < v.ncols() || dev > ISOMETRY_TOL {
        return Err(Error::NotIsometric(dev));
    }
    Ok(project_unchecked(v, g))
}

pub(crate) fn project_unchecked(v: &CMat, g: &CMat) -> CMat {
    let vg = v.adjoint() * g;
    let sym = (&vg + vg.adjoint()) * C64::new(0.5, 0.0);
    g - v * sym
}

/// QR retraction `qf(V + α ξ)` with a positive-diagonal R factor.
pub fn retract(v: &CMat, xi: &CMat, alpha: f64) -> Result<CMat> {
    if v.shape() != xi.shape() {
        return Err(Error::DimensionMismatch(format!("point {:?} vs tangent {:?}", v.shape(), xi.shape())));
    }
    if alpha == 0.0 || xi.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(v.clone());
    }
    let moved = v + xi * C64::new(alpha, 0.0);
    let (q, r) = linalg::qr_positive(&moved);
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min_diag = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].re).fold(f64::INFINITY, f64::min);
    if !(min_diag > 1e-12 * scale.max(1.0)) {
        return Err(Error::RankDeficient);
    }
    Ok(q)
}

/// Hyperparameters of [`RiemannianAdam`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// ADAM over a product of Stiefel manifolds.
///
/// The first moment lives in the tangent space and is re-projected onto the
/// new tangent space after every retraction (projection stands in for
/// parallel transport). The second moment is kept entrywise and is not
/// transported.
#[derive(Clone, Debug)]
pub struct RiemannianAdam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<CMat>,
    second: Vec<DMatrix<f64>>,
}

impl RiemannianAdam {
    pub fn new(config: AdamConfig, shapes: &[(usize, usize)]) -> Self {
        RiemannianAdam {
            config,
            step: 0,
            first: shapes.iter().map(|&(m, p)| CMat::zeros(m, p)).collect(),
            second: shapes.iter().map(|&(m, p)| DMatrix::zeros(m, p)).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of every point from its ambient (Euclidean) gradient,
    /// using `lr` in place of the configured learning rate.
    pub fn step_with_lr(&mut self, points: &mut [CMat], grads: &[CMat], lr: f64) -> Result<()> {
        if points.len() != self.first.len() || grads.len() != points.len() {
            return Err(Error::DimensionMismatch("optimizer state and points differ in length".into()));
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (k, (v, g)) in points.iter_mut().zip(grads).enumerate() {
            if g.shape() != v.shape() {
                return Err(Error::DimensionMismatch(format!("gradient {k} has wrong shape")));
            }
            let rg = project_unchecked(v, g);
            let m = &mut self.first[k];
            let s = &mut self.second[k];
            *m = &*m * C64::new(beta1, 0.0) + &rg * C64::new(1.0 - beta1, 0.0);
            for (sv, gv) in s.iter_mut().zip(rg.iter()) {
                *sv = beta2 * *sv + (1.0 - beta2) * gv.norm_sqr();
            }
            let mut dir = m.clone();
            for (dv, sv) in dir.iter_mut().zip(s.iter()) {
                *dv /= bc1 * ((sv / bc2).sqrt() + eps);
            }
            let dir = project_unchecked(v, &dir);
            let next = retract(v, &dir, -lr)?;
            *m = project_unchecked(&next, m);
            *v = next;
        }
        Ok(())
    }

    pub fn step(&mut self, points: &mut [CMat], grads: &[CMat]) -> Result<()> {
        let lr = self.config.learning_rate;
        self.step_with_lr(points, grads, lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::haar_isometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hermitian(p: usize, rng: &mut ChaCha8Rng) -> CMat {
        let a = linalg::gaussian(p, p, rng);
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn normal_directions_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = haar_isometry(6, 3, &mut rng);
        let g = &v * hermitian(3, &mut rng);
        let xi = project_tangent(&v, &g).unwrap();
        assert!(linalg::frob_norm(&xi) < 1e-12);
    }

    #[test]
    fn skew_directions_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = haar_isometry(6, 3, &mut rng);
        let s = hermitian(3, &mut rng) * C64::new(0.0, 1.0);
        let g = &v * s;
        let xi = project_tangent(&v, &g).unwrap();
        assert!(linalg::max_abs_diff(&xi, &g) < 1e-12);
    }

    #[test]
    fn projection_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v = haar_isometry(8, 4, &mut rng);
            let g = linalg::gaussian(8, 4, &mut rng);
            let xi = project_tangent(&v, &g).unwrap();
            let tangency = v.adjoint() * &xi + xi.adjoint() * &v;
            assert!(tangency.iter().all(|z| z.norm() < 1e-12));
            let residual = &g - &xi;
            let inner: C64 = xi.iter().zip(residual.iter()).map(|(a, b)| a.conj() * b).sum();
            assert!(inner.re.abs() < 1e-10);
        }
    }

    #[test]
    fn projection_rejects_non_isometry() {
        let v = CMat::from_element(2, 1, C64::new(1.0, 0.0));
        assert!(matches!(project_tangent(&v, &v), Err(Error::NotIsometric(_))));
    }

    #[test]
    fn zero_step_retraction_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = haar_isometry(5, 2, &mut rng);
        let xi = project_tangent(&v, &linalg::gaussian(5, 2, &mut rng)).unwrap();
        assert_eq!(retract(&v, &xi, 0.0).unwrap(), v);
        let w = retract(&v, &xi, 0.3).unwrap();
        assert!(linalg::gram_deviation(&w) < 1e-12);
    }

    #[test]
    fn retraction_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = haar_isometry(6, 3, &mut rng);
        let xi = project_tangent(&v, &linalg::gaussian(6, 3, &mut rng)).unwrap();
        let gap = |a: f64| linalg::frob_norm(&(retract(&v, &xi, a).unwrap() - (&v + &xi * C64::new(a, 0.0))));
        let (e1, e2) = (gap(1e-2), gap(5e-3));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn zero_gradient_leaves_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pts = vec![haar_isometry(4, 2, &mut rng), haar_isometry(4, 4, &mut rng)];
        let before = pts.clone();
        let grads: Vec<CMat> = pts.iter().map(|p| CMat::zeros(p.nrows(), p.ncols())).collect();
        let mut adam = RiemannianAdam::new(AdamConfig::default(), &[(4, 2), (4, 4)]);
        adam.step(&mut pts, &grads).unwrap();
        assert_eq!(pts, before);
    }

    #[test]
    fn isometry_survives_many_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pts = vec![haar_isometry(8, 2, &mut rng), haar_isometry(8, 8, &mut rng)];
        let mut adam = RiemannianAdam::new(AdamConfig { learning_rate: 0.1, ..Default::default() }, &[(8, 2), (8, 8)]);
        for _ in 0..100 {
            let grads: Vec<CMat> = pts.iter().map(|p| linalg::gaussian(p.nrows(), p.ncols(), &mut rng)).collect();
            adam.step(&mut pts, &grads).unwrap();
            for p in &pts {
                assert!(linalg::gram_deviation(p) < 1e-10);
            }
        }
    }
}

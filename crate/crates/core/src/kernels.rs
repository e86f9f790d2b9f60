//! Squared-exponential kernels over Euclidean, arc-length, and
//! transformation-magnitude distances, plus Gram matrix assembly.
//!
//! Kernels over the non-Euclidean distances are not guaranteed positive
//! definite; the operational contract is positive-definite-after-jitter.
//! [`gram`] escalates a diagonal jitter geometrically until the Cholesky
//! factorization succeeds and the factor's pivot spread indicates an
//! acceptable condition number, and reports
//! [`KernelError::NotPositiveDefinite`] when the escalation cap is reached.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{d_arc, d_mag, DualQuaternionPose, UnitQuaternion};

/// Condition-number ceiling enforced (via a Cholesky pivot estimate) when
/// selecting the jitter level.
const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("input dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Gram matrix not positive definite after jitter escalation up to {max_jitter:.3e}")]
    NotPositiveDefinite { max_jitter: f64 },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("Gram matrix needs at least one point")]
    EmptyPointSet,
}

/// Signal magnitude, length scale, and observation noise of a squared
/// exponential kernel.
///
/// `sigma_f` and `length_scale` are strictly positive (the optimizer works
/// on their logarithms); `sigma_n` is nonnegative and augments the Gram
/// diagonal as `sigma_n^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    sigma_f: f64,
    length_scale: f64,
    sigma_n: f64,
}

impl Hyperparameters {
    pub fn new(sigma_f: f64, length_scale: f64, sigma_n: f64) -> Result<Self, KernelError> {
        let hp = Self { sigma_f, length_scale, sigma_n };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.sigma_f.is_finite() && self.sigma_f > 0.0) {
            return Err(KernelError::InvalidHyperparameters(format!(
                "sigma_f must be finite and positive, got {}",
                self.sigma_f
            )));
        }
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(KernelError::InvalidHyperparameters(format!(
                "length_scale must be finite and positive, got {}",
                self.length_scale
            )));
        }
        if !(self.sigma_n.is_finite() && self.sigma_n >= 0.0) {
            return Err(KernelError::InvalidHyperparameters(format!(
                "sigma_n must be finite and nonnegative, got {}",
                self.sigma_n
            )));
        }
        Ok(())
    }

    pub fn sigma_f(&self) -> f64 {
        self.sigma_f
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn sigma_n(&self) -> f64 {
        self.sigma_n
    }

    /// Log-space coordinates `(ln sigma_f, ln length_scale, ln sigma_n)`
    /// used by the hyperparameter optimizer.
    pub fn to_log(&self) -> [f64; 3] {
        [self.sigma_f.ln(), self.length_scale.ln(), self.sigma_n.ln()]
    }

    /// Inverse of [`Hyperparameters::to_log`]; finite inputs always yield a
    /// valid positive parameter set.
    pub fn from_log(log: &[f64; 3]) -> Self {
        Self { sigma_f: log[0].exp(), length_scale: log[1].exp(), sigma_n: log[2].exp() }
    }

    /// Kernel value as a function of squared distance.
    #[inline]
    pub fn kernel_of_sq_dist(&self, d_sq: f64) -> f64 {
        let l = self.length_scale;
        self.sigma_f * self.sigma_f * (-d_sq / (2.0 * l * l)).exp()
    }
}

/// Squared exponential kernel over the Euclidean distance.
pub fn k_se(x: &[f64], x2: &[f64], hp: &Hyperparameters) -> Result<f64, KernelError> {
    if x.len() != x2.len() {
        return Err(KernelError::DimensionMismatch { left: x.len(), right: x2.len() });
    }
    let d_sq: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(hp.kernel_of_sq_dist(d_sq))
}

/// Squared exponential kernel over the arc distance on `S3`; invariant
/// under sign flips of either argument.
pub fn k_arc(q: &UnitQuaternion, q2: &UnitQuaternion, hp: &Hyperparameters) -> f64 {
    let d = d_arc(q, q2);
    hp.kernel_of_sq_dist(d * d)
}

/// Squared exponential kernel over the transformation magnitude between
/// two rigid poses.
pub fn k_mag(a: &DualQuaternionPose, b: &DualQuaternionPose, hp: &Hyperparameters) -> f64 {
    let d = d_mag(a, b);
    hp.kernel_of_sq_dist(d * d)
}

/// Diagonal jitter escalation schedule, relative to `sigma_f^2`.
///
/// Zero jitter is attempted first; on failure the level starts at
/// `start_scale * sigma_f^2` and grows geometrically up to
/// `max_scale * sigma_f^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub start_scale: f64,
    pub growth: f64,
    pub max_scale: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self { start_scale: 1e-10, growth: 10.0, max_scale: 1e-4 }
    }
}

impl JitterPolicy {
    /// Jitter candidates for a given signal magnitude, starting at zero.
    pub fn ladder(&self, sigma_f: f64) -> Vec<f64> {
        let unit = sigma_f * sigma_f;
        let mut levels = vec![0.0];
        let mut scale = self.start_scale;
        while scale <= self.max_scale * (1.0 + 1e-12) {
            levels.push(scale * unit);
            scale *= self.growth;
        }
        levels
    }
}

/// Symmetric kernel matrix over a point set with its accepted jitter level
/// and cached Cholesky factorization.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: DMatrix<f64>,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Kernel matrix including the `sigma_n^2 + jitter` diagonal term.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Solves `K x = b` through the cached factorization.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `ln det K` from the Cholesky diagonal.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// Pairwise squared transformation-magnitude distances with an exactly zero
/// diagonal; shared by Gram assembly across hyperparameter candidates.
pub fn pairwise_sq_distances(points: &[DualQuaternionPose]) -> DMatrix<f64> {
    let n = points.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = d_mag(&points[i], &points[j]);
            let sq = dist * dist;
            d[(i, j)] = sq;
            d[(j, i)] = sq;
        }
    }
    d
}

/// Gram matrix of the pose kernel over `points` with escalating jitter.
pub fn gram(
    points: &[DualQuaternionPose],
    hp: &Hyperparameters,
    policy: &JitterPolicy,
) -> Result<GramMatrix, KernelError> {
    if points.is_empty() {
        return Err(KernelError::EmptyPointSet);
    }
    gram_from_sq_distances(&pairwise_sq_distances(points), hp, policy)
}

/// Gram assembly from a precomputed squared-distance matrix.
///
/// The kernel matrix is built from the upper triangle and mirrored, so the
/// result is exactly symmetric. A jitter level is accepted when the
/// factorization succeeds and the squared pivot spread stays within the
/// condition limit.
pub fn gram_from_sq_distances(
    d_sq: &DMatrix<f64>,
    hp: &Hyperparameters,
    policy: &JitterPolicy,
) -> Result<GramMatrix, KernelError> {
    let n = d_sq.nrows();
    if n == 0 {
        return Err(KernelError::EmptyPointSet);
    }
    let mut kernel = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let k = hp.kernel_of_sq_dist(d_sq[(i, j)]);
            kernel[(i, j)] = k;
            kernel[(j, i)] = k;
        }
    }
    let diag_base = hp.sigma_f() * hp.sigma_f() + hp.sigma_n() * hp.sigma_n();

    // Only the diagonal changes between attempts, so mutate it in place and
    // clone just for the factorization.
    let mut max_jitter = 0.0;
    for jitter in policy.ladder(hp.sigma_f()) {
        max_jitter = jitter;
        for i in 0..n {
            kernel[(i, i)] = diag_base + jitter;
        }
        if let Some(chol) = Cholesky::new(kernel.clone()) {
            if pivot_condition_estimate(&chol) <= CONDITION_LIMIT {
                return Ok(GramMatrix { matrix: kernel, jitter, chol });
            }
        }
    }
    Err(KernelError::NotPositiveDefinite { max_jitter })
}

/// Kernel evaluations of a query against a point set.
pub fn kernel_vector(
    query: &DualQuaternionPose,
    points: &[DualQuaternionPose],
    hp: &Hyperparameters,
) -> DVector<f64> {
    DVector::from_iterator(points.len(), points.iter().map(|p| k_mag(query, p, hp)))
}

/// Lower-bound estimate of the condition number from the Cholesky pivots:
/// `(max L_ii / min L_ii)^2`.
fn pivot_condition_estimate(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let mut min = f64::INFINITY;
    let mut max = 0.0_f64;
    for i in 0..l.nrows() {
        let pivot = l[(i, i)];
        min = min.min(pivot);
        max = max.max(pivot);
    }
    if min <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = max / min;
    ratio * ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DualQuaternionPose, UnitQuaternion};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_hp() -> Hyperparameters {
        Hyperparameters::new(1.0, 1.0, 0.0).unwrap()
    }

    fn random_pose(rng: &mut impl Rng) -> DualQuaternionPose {
        let q = UnitQuaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap_or_else(|_| UnitQuaternion::identity());
        let p = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        DualQuaternionPose::from_pose(q, &p)
    }

    #[test]
    fn hyperparameters_reject_nonpositive() {
        assert!(Hyperparameters::new(0.0, 1.0, 0.0).is_err());
        assert!(Hyperparameters::new(1.0, -1.0, 0.0).is_err());
        assert!(Hyperparameters::new(1.0, 1.0, -0.1).is_err());
        assert!(Hyperparameters::new(1.0, 1.0, 0.0).is_ok());
    }

    #[test]
    fn log_round_trip() {
        let hp = Hyperparameters::new(0.7, 2.5, 0.01).unwrap();
        let back = Hyperparameters::from_log(&hp.to_log());
        assert_relative_eq!(back.sigma_f(), 0.7, epsilon = 1e-15);
        assert_relative_eq!(back.length_scale(), 2.5, epsilon = 1e-15);
        assert_relative_eq!(back.sigma_n(), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn k_se_zero_distance_and_unit_distance() {
        let hp = unit_hp();
        let x = [0.3, -0.2, 0.9];
        assert_relative_eq!(k_se(&x, &x, &hp).unwrap(), 1.0, epsilon = 1e-15);
        // |x - x2| = 1 with sigma_f = l = 1.
        assert_relative_eq!(
            k_se(&[0.0, 0.0], &[1.0, 0.0], &hp).unwrap(),
            0.6065306597126334,
            epsilon = 1e-15
        );
    }

    #[test]
    fn k_se_dimension_mismatch() {
        let err = k_se(&[0.0], &[0.0, 1.0], &unit_hp()).unwrap_err();
        assert!(matches!(err, KernelError::DimensionMismatch { left: 1, right: 2 }));
    }

    #[test]
    fn k_se_monotone_in_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let hp = Hyperparameters::new(1.3, 0.8, 0.0).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let da: f64 = x.iter().zip(&a).map(|(p, q)| (p - q) * (p - q)).sum();
            let db: f64 = x.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
            let ka = k_se(&x, &a, &hp).unwrap();
            let kb = k_se(&x, &b, &hp).unwrap();
            if da < db {
                assert!(ka >= kb);
            } else {
                assert!(kb >= ka);
            }
        }
    }

    #[test]
    fn k_arc_double_cover_and_quarter_arc_value() {
        let hp = unit_hp();
        let q = UnitQuaternion::new(0.4, -0.3, 0.8, 0.1).unwrap();
        assert_relative_eq!(k_arc(&q, &q, &hp), 1.0, epsilon = 1e-15);
        assert_relative_eq!(k_arc(&q, &q.negated(), &hp), 1.0, epsilon = 1e-15);

        // pi/4 arc, sigma_f = l = 1: exp(-(pi/4)^2 / 2) = exp(-pi^2/32).
        let eighth = UnitQuaternion::new(
            std::f64::consts::FRAC_PI_4.cos(),
            std::f64::consts::FRAC_PI_4.sin(),
            0.0,
            0.0,
        )
        .unwrap();
        assert_relative_eq!(
            k_arc(&UnitQuaternion::identity(), &eighth, &hp),
            0.7346029443286334,
            epsilon = 1e-12
        );
    }

    #[test]
    fn k_mag_reduces_to_euclidean_for_pure_translation() {
        let l = 0.35;
        let hp = Hyperparameters::new(1.0, l, 0.0).unwrap();
        let a = DualQuaternionPose::identity();
        let b = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &Vector3::new(l, 0.0, 0.0));
        assert_relative_eq!(k_mag(&a, &b, &hp), (-0.5_f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(k_mag(&a, &a, &hp), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn k_mag_left_composition_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let hp = Hyperparameters::new(0.9, 0.6, 0.0).unwrap();
        for _ in 0..100 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let g = random_pose(&mut rng);
            let direct = k_mag(&a, &b, &hp);
            let composed = k_mag(&(g * a), &(g * b), &hp);
            assert_relative_eq!(direct, composed, epsilon = 1e-9);
        }
    }

    #[test]
    fn kernel_range_and_peak_only_at_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let hp = Hyperparameters::new(1.7, 0.5, 0.0).unwrap();
        let peak = hp.sigma_f() * hp.sigma_f();
        for _ in 0..300 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let k = k_mag(&a, &b, &hp);
            assert!(k > 0.0 && k <= peak);
            let d = crate::geometry::d_mag(&a, &b);
            if d > 1e-6 {
                assert!(k < peak);
            }
        }
    }

    #[test]
    fn gram_single_point_diagonal() {
        let hp = Hyperparameters::new(1.5, 1.0, 0.2).unwrap();
        let g = gram(&[DualQuaternionPose::identity()], &hp, &JitterPolicy::default()).unwrap();
        assert_eq!(g.n(), 1);
        let expected = 1.5 * 1.5 + 0.2 * 0.2 + g.jitter();
        assert_relative_eq!(g.matrix()[(0, 0)], expected, epsilon = 1e-15);
        // A single point is perfectly conditioned, so no jitter is needed.
        assert_eq!(g.jitter(), 0.0);
    }

    #[test]
    fn gram_duplicate_points_escalates_jitter() {
        let hp = Hyperparameters::new(1.0, 0.5, 0.0).unwrap();
        let p = DualQuaternionPose::from_pose(UnitQuaternion::identity(), &Vector3::new(0.1, 0.2, 0.3));
        let points = vec![p; 6];
        let g = gram(&points, &hp, &JitterPolicy::default()).unwrap();
        assert!(g.jitter() > 0.0, "rank-deficient set must be regularized");
        // Factorization usable: solve returns finite values.
        let rhs = DVector::from_element(6, 1.0);
        assert!(g.solve(&rhs).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gram_random_sets_positive_definite_by_eigenvalue_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let hp = Hyperparameters::new(1.0, 0.7, 0.05).unwrap();
        for _ in 0..5 {
            let points: Vec<_> = (0..20).map(|_| random_pose(&mut rng)).collect();
            let g = gram(&points, &hp, &JitterPolicy::default()).unwrap();
            let eigen = g.matrix().clone().symmetric_eigen();
            let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "minimum eigenvalue {min} not positive");
            // Exact symmetry by construction.
            for i in 0..20 {
                for j in 0..20 {
                    assert_eq!(g.matrix()[(i, j)], g.matrix()[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn gram_small_neighborhood_condition_bounded() {
        // All pairwise distances below l/10; jitter escalation must keep the
        // true condition number below 1e12.
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let hp = Hyperparameters::new(1.0, 1.0, 0.0).unwrap();
        let base = Vector3::new(0.4, -0.1, 0.2);
        let points: Vec<_> = (0..20)
            .map(|_| {
                let wobble = Vector3::new(
                    rng.random_range(-1e-4..1e-4),
                    rng.random_range(-1e-4..1e-4),
                    rng.random_range(-1e-4..1e-4),
                );
                DualQuaternionPose::from_pose(UnitQuaternion::identity(), &(base + wobble))
            })
            .collect();
        let g = gram(&points, &hp, &JitterPolicy::default()).unwrap();
        let eigen = g.matrix().clone().symmetric_eigen();
        let max = eigen.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        assert!(max / min < 1e12, "condition number {} too large", max / min);
    }

    #[test]
    fn gram_respects_jitter_cap() {
        // A policy with no headroom cannot fix a rank-deficient matrix.
        let hp = Hyperparameters::new(1.0, 0.5, 0.0).unwrap();
        let p = DualQuaternionPose::identity();
        let policy = JitterPolicy { start_scale: 1e-16, growth: 10.0, max_scale: 1e-15 };
        let err = gram(&[p, p, p], &hp, &policy).unwrap_err();
        assert!(matches!(err, KernelError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn kernel_vector_matches_pairwise_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let hp = Hyperparameters::new(0.8, 0.4, 0.0).unwrap();
        let points: Vec<_> = (0..7).map(|_| random_pose(&mut rng)).collect();
        let q = random_pose(&mut rng);
        let v = kernel_vector(&q, &points, &hp);
        for (i, p) in points.iter().enumerate() {
            assert_eq!(v[i], k_mag(&q, p, &hp));
        }
    }
}

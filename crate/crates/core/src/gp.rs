//! Gaussian process regression from rigid poses to tangent-space velocities.
//!
//! One independent GP per output dimension (three tangent-space rotation
//! rates, three translation rates), all sharing the transformation-magnitude
//! input metric but carrying their own `(sigma_f, length_scale, sigma_n)`.
//! The prior mean is zero, so predictions revert to zero velocity far from
//! the training set.
//!
//! Hyperparameters are fitted by maximizing the log marginal likelihood with
//! a deterministic multi-start Nelder-Mead search in log-space; the search
//! schedule is fixed, so fitting the same data always yields the same model.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::geometry::{
    central_project, DualQuaternionPose, GeometryError, TangentVelocity,
};
use crate::kernels::{
    gram_from_sq_distances, kernel_vector, pairwise_sq_distances, GramMatrix, Hyperparameters,
    JitterPolicy, KernelError,
};
use crate::optim::{nelder_mead, NelderMeadConfig};

/// Number of output dimensions: tangent-space rotation rate plus translation rate.
pub const OUTPUT_DIMS: usize = 6;

/// Default workspace radius in meters beyond which a rollout counts as diverged.
pub const DEFAULT_WORKSPACE_BOUND: f64 = 10.0;

const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_METRIC: &str = "d_mag/v1";
const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("target matrix is {rows}x{cols}, expected {expected_rows}x{OUTPUT_DIMS}")]
    TargetShape { rows: usize, cols: usize, expected_rows: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("rollout diverged at step {step}: |p| = {norm:.3} m exceeds bound {bound:.3} m")]
    DivergenceDetected { step: usize, norm: f64, bound: f64 },
    #[error("model file: {0}")]
    InvalidModelFile(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Settings for the hyperparameter search.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of starting points taken from the log-grid schedule.
    pub n_starts: usize,
    /// Simplex iteration cap per start.
    pub max_iters: usize,
    pub jitter: JitterPolicy,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { n_starts: 8, max_iters: 200, jitter: JitterPolicy::default() }
    }
}

/// Posterior mean velocity and per-dimension predictive variances
/// (including observation noise, so the prior level is
/// `sigma_f^2 + sigma_n^2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: TangentVelocity,
    pub variance: [f64; OUTPUT_DIMS],
}

#[derive(Debug, Clone)]
struct DimensionModel {
    hp: Hyperparameters,
    gram: GramMatrix,
    /// Cached `K^{-1} y`.
    alpha: DVector<f64>,
}

/// Fitted Gaussian process over poses with cached per-dimension Gram
/// factorizations; immutable and safely shareable across threads.
#[derive(Debug, Clone)]
pub struct GpModel {
    label: String,
    inputs: Vec<DualQuaternionPose>,
    targets: DMatrix<f64>,
    dims: Vec<DimensionModel>,
    jitter_policy: JitterPolicy,
}

impl GpModel {
    /// Fits hyperparameters per output dimension by maximizing the log
    /// marginal likelihood over a fixed multi-start schedule.
    pub fn fit(
        inputs: &[DualQuaternionPose],
        targets: &DMatrix<f64>,
        config: &FitConfig,
    ) -> Result<Self, GpError> {
        Ok(Self::fit_with_report(inputs, targets, config)?.0)
    }

    /// Like [`GpModel::fit`], also returning per-dimension optimizer
    /// bookkeeping (the likelihood each start converged to).
    pub fn fit_with_report(
        inputs: &[DualQuaternionPose],
        targets: &DMatrix<f64>,
        config: &FitConfig,
    ) -> Result<(Self, FitReport), GpError> {
        let n = inputs.len();
        if n < 2 {
            return Err(GpError::DegenerateData(format!("need at least 2 training points, got {n}")));
        }
        if targets.nrows() != n || targets.ncols() != OUTPUT_DIMS {
            return Err(GpError::TargetShape {
                rows: targets.nrows(),
                cols: targets.ncols(),
                expected_rows: n,
            });
        }
        let d_sq = pairwise_sq_distances(inputs);
        let max_sq = d_sq.iter().cloned().fold(0.0_f64, f64::max);
        if max_sq <= 1e-24 {
            return Err(GpError::DegenerateData("all training inputs are identical".into()));
        }
        let median_dist = median_offdiag_distance(&d_sq);
        let max_dist = max_sq.sqrt();

        let per_dim: Vec<DimensionFit> = (0..OUTPUT_DIMS)
            .into_par_iter()
            .map(|dim| {
                let y = targets.column(dim).clone_owned();
                optimize_dimension(&d_sq, &y, median_dist, max_dist, config)
            })
            .collect();

        let hp: Vec<Hyperparameters> = per_dim.iter().map(|d| d.hp).collect();
        let model = Self::from_hyperparameters_with_distances(
            String::new(),
            inputs.to_vec(),
            targets.clone(),
            &hp,
            &config.jitter,
            &d_sq,
        )?;
        Ok((model, FitReport { dims: per_dim }))
    }

    /// Builds a model with explicitly given hyperparameters, computing the
    /// cached factorizations.
    pub fn from_hyperparameters(
        label: String,
        inputs: Vec<DualQuaternionPose>,
        targets: DMatrix<f64>,
        hp: &[Hyperparameters],
        jitter: &JitterPolicy,
    ) -> Result<Self, GpError> {
        let d_sq = pairwise_sq_distances(&inputs);
        Self::from_hyperparameters_with_distances(label, inputs, targets, hp, jitter, &d_sq)
    }

    fn from_hyperparameters_with_distances(
        label: String,
        inputs: Vec<DualQuaternionPose>,
        targets: DMatrix<f64>,
        hp: &[Hyperparameters],
        jitter: &JitterPolicy,
        d_sq: &DMatrix<f64>,
    ) -> Result<Self, GpError> {
        let n = inputs.len();
        if targets.nrows() != n || targets.ncols() != OUTPUT_DIMS {
            return Err(GpError::TargetShape {
                rows: targets.nrows(),
                cols: targets.ncols(),
                expected_rows: n,
            });
        }
        if hp.len() != OUTPUT_DIMS {
            return Err(GpError::InvalidModelFile(format!(
                "expected {OUTPUT_DIMS} hyperparameter sets, got {}",
                hp.len()
            )));
        }
        let mut dims = Vec::with_capacity(OUTPUT_DIMS);
        for (dim, hp_dim) in hp.iter().enumerate() {
            hp_dim.validate()?;
            let gram = gram_from_sq_distances(d_sq, hp_dim, jitter)?;
            let y = targets.column(dim).clone_owned();
            let alpha = gram.solve(&y);
            dims.push(DimensionModel { hp: *hp_dim, gram, alpha });
        }
        Ok(Self { label, inputs, targets, dims, jitter_policy: *jitter })
    }

    pub fn named(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[DualQuaternionPose] {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn hyperparameters(&self) -> Vec<Hyperparameters> {
        self.dims.iter().map(|d| d.hp).collect()
    }

    pub fn jitter_policy(&self) -> &JitterPolicy {
        &self.jitter_policy
    }

    /// Log marginal likelihood of the cached factorization for one output
    /// dimension.
    pub fn log_marginal_likelihood(&self, dim: usize) -> f64 {
        let d = &self.dims[dim];
        let y = self.targets.column(dim).clone_owned();
        log_marginal_likelihood(&d.gram, &y)
    }

    /// Posterior mean and predictive variance at a query pose.
    pub fn predict(&self, query: &DualQuaternionPose) -> Prediction {
        let mut mean = [0.0; OUTPUT_DIMS];
        let mut variance = [0.0; OUTPUT_DIMS];
        for (dim, model) in self.dims.iter().enumerate() {
            let k_star = kernel_vector(query, &self.inputs, &model.hp);
            mean[dim] = k_star.dot(&model.alpha);
            let v = model.gram.solve(&k_star);
            let sigma_f_sq = model.hp.sigma_f() * model.hp.sigma_f();
            let sigma_n_sq = model.hp.sigma_n() * model.hp.sigma_n();
            variance[dim] = (sigma_f_sq - k_star.dot(&v) + sigma_n_sq).max(0.0);
        }
        Prediction {
            mean: TangentVelocity::from_array(&mean),
            variance,
        }
    }

    /// Iterates predict-then-step from `start`, feeding each posterior mean
    /// back as the next query. Returns `n_steps + 1` poses including the
    /// start and one predictive variance row per step taken.
    pub fn rollout(
        &self,
        start: &DualQuaternionPose,
        n_steps: usize,
        workspace_bound: f64,
    ) -> Result<Rollout, GpError> {
        let mut poses = Vec::with_capacity(n_steps + 1);
        let mut variances = Vec::with_capacity(n_steps);
        poses.push(*start);
        let mut current = *start;
        for i in 0..n_steps {
            let prediction = self.predict(&current);
            current = step(&current, &prediction.mean);
            let norm = current.translation().norm();
            if !current.is_finite() || norm > workspace_bound {
                return Err(GpError::DivergenceDetected { step: i + 1, norm, bound: workspace_bound });
            }
            poses.push(current);
            variances.push(prediction.variance);
        }
        Ok(Rollout { poses, variances })
    }

    /// Serializes the model into its canonical JSON form.
    pub fn to_json(&self) -> Result<String, GpError> {
        let record = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            metric: MODEL_METRIC.to_string(),
            label: self.label.clone(),
            hyperparameters: self.hyperparameters(),
            inputs: self.inputs.iter().map(|p| p.to_array()).collect(),
            targets: (0..self.targets.nrows())
                .map(|i| {
                    let row = self.targets.row(i);
                    [row[0], row[1], row[2], row[3], row[4], row[5]]
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    /// Reconstructs a model (including Gram factorizations) from its JSON form.
    pub fn from_json(text: &str, jitter: &JitterPolicy) -> Result<Self, GpError> {
        let record: ModelFile = serde_json::from_str(text)?;
        if record.format_version != MODEL_FORMAT_VERSION {
            return Err(GpError::InvalidModelFile(format!(
                "unsupported format version {}",
                record.format_version
            )));
        }
        if record.metric != MODEL_METRIC {
            return Err(GpError::InvalidModelFile(format!(
                "unsupported metric {:?}, expected {MODEL_METRIC:?}",
                record.metric
            )));
        }
        let inputs = record
            .inputs
            .iter()
            .map(DualQuaternionPose::from_array)
            .collect::<Result<Vec<_>, _>>()?;
        let n = inputs.len();
        if record.targets.len() != n {
            return Err(GpError::InvalidModelFile(format!(
                "{} target rows for {n} inputs",
                record.targets.len()
            )));
        }
        let targets = DMatrix::from_fn(n, OUTPUT_DIMS, |i, j| record.targets[i][j]);
        Self::from_hyperparameters(record.label, inputs, targets, &record.hyperparameters, jitter)
    }

    pub fn save_to(&self, path: &Path) -> Result<(), GpError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_from(path: &Path, jitter: &JitterPolicy) -> Result<Self, GpError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, jitter)
    }
}

/// Poses visited by a rollout plus the per-step predictive variances.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub poses: Vec<DualQuaternionPose>,
    pub variances: Vec<[f64; OUTPUT_DIMS]>,
}

/// Hyperparameter search bookkeeping for one output dimension.
#[derive(Debug, Clone)]
pub struct DimensionFit {
    pub hp: Hyperparameters,
    /// Best log marginal likelihood found.
    pub lml: f64,
    /// Likelihood each search start converged to, in schedule order.
    pub start_lml: Vec<f64>,
}

/// Per-dimension fit diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub dims: Vec<DimensionFit>,
}

/// Advances a pose by one velocity step: the rotation moves along the
/// central projection of the tangent rate, the position translates by the
/// per-step rate.
pub fn step(pose: &DualQuaternionPose, vel: &TangentVelocity) -> DualQuaternionPose {
    let (rotation, position) = pose.to_pose();
    let next_rotation = central_project(&rotation, &vel.v_ts);
    DualQuaternionPose::from_pose(next_rotation, &(position + vel.p_dot))
}

/// `-1/2 y^T K^{-1} y - 1/2 ln|K| - n/2 ln(2 pi)` through the cached
/// Cholesky factorization.
pub fn log_marginal_likelihood(gram: &GramMatrix, y: &DVector<f64>) -> f64 {
    let alpha = gram.solve(y);
    let n = gram.n() as f64;
    -0.5 * y.dot(&alpha) - 0.5 * gram.log_det() - 0.5 * n * LN_2PI
}

/// Deterministic log-grid of search starts around data-driven centers.
fn log_grid_starts(y_std: f64, median_dist: f64, n_starts: usize) -> Vec<[f64; 3]> {
    let signal = if y_std > 1e-12 { y_std } else { 1.0 };
    let dist = if median_dist > 1e-12 { median_dist } else { 1.0 };
    let sigma_f_axis = [0.5 * signal, 2.0 * signal];
    let length_axis = [dist / 8.0, dist / 2.0];
    let sigma_n_axis = [0.01 * signal, 0.3 * signal];

    let mut starts = Vec::new();
    let mut shrink = 1.0;
    while starts.len() < n_starts {
        for sf in sigma_f_axis {
            for l in length_axis {
                for sn in sigma_n_axis {
                    if starts.len() < n_starts {
                        starts.push([
                            (sf * shrink).ln(),
                            (l * shrink).ln(),
                            (sn * shrink).ln(),
                        ]);
                    }
                }
            }
        }
        shrink *= 0.6;
    }
    starts
}

fn median_offdiag_distance(d_sq: &DMatrix<f64>) -> f64 {
    let n = d_sq.nrows();
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            values.push(d_sq[(i, j)].sqrt());
        }
    }
    if values.is_empty() {
        return 1.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

fn column_std(y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Maximizes the log marginal likelihood for one output dimension.
fn optimize_dimension(
    d_sq: &DMatrix<f64>,
    y: &DVector<f64>,
    median_dist: f64,
    config: &FitConfig,
) -> DimensionFit {
    let jitter = config.jitter;
    let objective = |log_hp: &[f64]| -> f64 {
        if log_hp.iter().any(|v| !v.is_finite() || v.abs() > 30.0) {
            return f64::INFINITY;
        }
        let hp = Hyperparameters::from_log(&[log_hp[0], log_hp[1], log_hp[2]]);
        match gram_from_sq_distances(d_sq, &hp, &jitter) {
            Ok(gram) => -log_marginal_likelihood(&gram, y),
            Err(_) => f64::INFINITY,
        }
    };

    let nm_config = NelderMeadConfig {
        max_iters: config.max_iters,
        ..NelderMeadConfig::default()
    };
    let starts = log_grid_starts(column_std(y), median_dist, config.n_starts.max(1));
    let mut start_lml = Vec::with_capacity(starts.len());
    let mut best: Option<(f64, [f64; 3])> = None;
    for start in &starts {
        let result = nelder_mead(&objective, start, &nm_config);
        let candidate = [result.x[0], result.x[1], result.x[2]];
        start_lml.push(-result.f);
        // Strict improvement keeps the earliest start on ties.
        if result.f.is_finite() && best.map_or(true, |(f, _)| result.f < f) {
            best = Some((result.f, candidate));
        }
    }
    let (neg_lml, log_hp) = best.unwrap_or((f64::INFINITY, starts[0]));
    DimensionFit { hp: Hyperparameters::from_log(&log_hp), lml: -neg_lml, start_lml }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    metric: String,
    label: String,
    hyperparameters: Vec<Hyperparameters>,
    inputs: Vec<[f64; 8]>,
    targets: Vec<[f64; 6]>,
}

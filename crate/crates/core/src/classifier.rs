//! Streaming classification of pose trajectories into known motion
//! conditions.
//!
//! Each incoming pose is compared against every active condition through a
//! Mahalanobis distance over the transformation-magnitude metric: per
//! training trajectory of a condition, the closest stored pose is selected,
//! and the distance vector to those poses is whitened by their kernel
//! covariance. Inverse distances normalize into per-step class
//! probabilities.
//!
//! Four decision rules drive the online state machine, applied in fixed
//! order each step: absolute nominate, absolute eliminate, windowed
//! nominate, windowed eliminate. The windowed rules integrate the
//! probability trace over the last `window_m` steps and only engage once
//! that many steps have been observed. Classification terminates at the
//! first nomination; eliminated conditions stay out, and probabilities
//! renormalize over the survivors from the next step onward. The last
//! surviving condition is auto-nominated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

use crate::data::Trajectory;
use crate::geometry::{d_mag, DualQuaternionPose};
use crate::gp::GpModel;
use crate::kernels::{gram, Hyperparameters, JitterPolicy, KernelError};

/// Default floor on the Mahalanobis distance, preventing division by zero
/// when a query coincides with a training pose.
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid classifier configuration: {0}")]
    InvalidConfig(String),
    #[error("classification needs at least 2 conditions, got {got}")]
    TooFewConditions { got: usize },
    #[error("condition {label:?} needs at least 2 training trajectories, got {got}")]
    TooFewTrajectories { label: String, got: usize },
    #[error("condition {expected:?} given a trajectory labeled {got:?}")]
    LabelMismatch { expected: String, got: String },
    #[error("range [{from}, {to}] out of bounds for trace of length {len}")]
    RangeError { from: usize, to: usize, len: usize },
    #[error("classifier already terminated")]
    TerminalState,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A known motion condition: its training trajectories, the scalar kernel
/// hyperparameters used by the similarity measure, and the fitted motion
/// model.
#[derive(Debug, Clone)]
pub struct ConditionModel {
    label: String,
    trajectories: Vec<Trajectory>,
    hp: Hyperparameters,
    gp: GpModel,
}

impl ConditionModel {
    /// Builds a condition from its training trajectories and fitted model.
    ///
    /// The similarity kernel needs a single `(sigma_f, length_scale)` pair
    /// while the motion model carries one per output dimension; the
    /// geometric mean over dimensions is used.
    pub fn new(
        label: impl Into<String>,
        trajectories: Vec<Trajectory>,
        gp: GpModel,
    ) -> Result<Self, ClassifierError> {
        let label = label.into();
        if trajectories.len() < 2 {
            return Err(ClassifierError::TooFewTrajectories { label, got: trajectories.len() });
        }
        for trajectory in &trajectories {
            if let Some(got) = trajectory.label() {
                if got != label {
                    return Err(ClassifierError::LabelMismatch {
                        expected: label,
                        got: got.to_string(),
                    });
                }
            }
        }
        let hp = aggregate_hyperparameters(&gp.hyperparameters())?;
        Ok(Self { label, trajectories, hp, gp })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    pub fn gp(&self) -> &GpModel {
        &self.gp
    }
}

/// Geometric mean of per-dimension signal magnitudes and length scales;
/// observation noise is dropped (the similarity matrix is pure kernel plus
/// jitter).
pub fn aggregate_hyperparameters(dims: &[Hyperparameters]) -> Result<Hyperparameters, ClassifierError> {
    if dims.is_empty() {
        return Err(ClassifierError::InvalidConfig("no hyperparameters to aggregate".into()));
    }
    let n = dims.len() as f64;
    let sigma_f = (dims.iter().map(|hp| hp.sigma_f().ln()).sum::<f64>() / n).exp();
    let length_scale = (dims.iter().map(|hp| hp.length_scale().ln()).sum::<f64>() / n).exp();
    Hyperparameters::new(sigma_f, length_scale, 0.0)
        .map_err(|e| ClassifierError::InvalidConfig(e.to_string()))
}

/// Thresholds of the four decision rules plus the moving-window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// A condition whose per-step probability reaches this is nominated.
    pub abs_nominate: f64,
    /// A condition whose per-step probability falls to this is eliminated.
    pub abs_eliminate: f64,
    /// Moving window length in steps; windowed rules engage after this many.
    pub window_m: usize,
    /// Windowed-integral nomination threshold (probability-steps).
    pub win_nominate: f64,
    /// Windowed-integral elimination threshold (probability-steps).
    pub win_eliminate: f64,
    /// Floor on the Mahalanobis distance.
    pub epsilon_floor: f64,
    #[serde(skip, default)]
    pub jitter: JitterPolicy,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        let window_m = 40;
        Self {
            abs_nominate: 0.5,
            abs_eliminate: 0.02,
            window_m,
            win_nominate: 0.45 * window_m as f64,
            win_eliminate: 0.04 * window_m as f64,
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
            // The similarity kernel is evaluated on arbitrary closest-pose
            // sets, where the pose kernel's indefiniteness shows up more
            // often than on training sets; give the escalation more
            // headroom than the kernel default.
            jitter: JitterPolicy { max_scale: 1e-2, ..JitterPolicy::default() },
        }
    }
}

impl ClassifierConfig {
    /// Checks threshold ordering for a given number of active conditions.
    pub fn validate(&self, n_conditions: usize) -> Result<(), ClassifierError> {
        if !(self.abs_nominate > 0.0 && self.abs_nominate < 1.0) {
            return Err(ClassifierError::InvalidConfig(format!(
                "abs_nominate {} outside (0, 1)",
                self.abs_nominate
            )));
        }
        if !(self.abs_eliminate > 0.0 && self.abs_eliminate < self.abs_nominate) {
            return Err(ClassifierError::InvalidConfig(format!(
                "abs_eliminate {} must sit in (0, abs_nominate)",
                self.abs_eliminate
            )));
        }
        if self.window_m == 0 {
            return Err(ClassifierError::InvalidConfig("window_m must be positive".into()));
        }
        if !(self.win_eliminate >= 0.0 && self.win_nominate > self.win_eliminate) {
            return Err(ClassifierError::InvalidConfig(format!(
                "window thresholds ({}, {}) must satisfy 0 <= eliminate < nominate",
                self.win_eliminate, self.win_nominate
            )));
        }
        if !(self.epsilon_floor > 0.0) {
            return Err(ClassifierError::InvalidConfig("epsilon_floor must be positive".into()));
        }
        if n_conditions >= 2 {
            let uniform = 1.0 / n_conditions as f64;
            if !(self.abs_eliminate < uniform && uniform < self.abs_nominate) {
                return Err(ClassifierError::InvalidConfig(format!(
                    "absolute thresholds must bracket the uniform probability {uniform:.4}"
                )));
            }
            let neutral_integral = self.window_m as f64 * uniform;
            if !(self.win_eliminate < neutral_integral && neutral_integral < self.win_nominate) {
                return Err(ClassifierError::InvalidConfig(format!(
                    "window thresholds must bracket the neutral integral {neutral_integral:.4}"
                )));
            }
        }
        Ok(())
    }
}

/// Mahalanobis distance of a query pose from a reference set under the
/// pose kernel: `sqrt(d^T K^{-1} d)` with `d_j = d_mag(query, ref_j)` and
/// `K_ij = k_mag(ref_i, ref_j)` (plus escalating jitter). Observation noise
/// in `hp` is ignored. The result is floored at `epsilon_floor`.
pub fn mahalanobis(
    query: &DualQuaternionPose,
    refs: &[DualQuaternionPose],
    hp: &Hyperparameters,
    epsilon_floor: f64,
    jitter: &JitterPolicy,
) -> Result<f64, ClassifierError> {
    let noise_free = Hyperparameters::new(hp.sigma_f(), hp.length_scale(), 0.0)
        .map_err(|e| ClassifierError::InvalidConfig(e.to_string()))?;
    let g = gram(refs, &noise_free, jitter)?;
    let d = nalgebra::DVector::from_iterator(refs.len(), refs.iter().map(|r| d_mag(query, r)));
    let solved = g.solve(&d);
    let squared = d.dot(&solved).max(0.0);
    Ok(squared.sqrt().max(epsilon_floor))
}

/// Per training trajectory, the stored pose closest to the query under the
/// transformation magnitude; ties resolve to the earliest time step.
pub fn closest_poses(
    query: &DualQuaternionPose,
    condition: &ConditionModel,
) -> Vec<DualQuaternionPose> {
    condition
        .trajectories()
        .iter()
        .map(|trajectory| {
            let mut best_index = 0;
            let mut best_distance = f64::INFINITY;
            for (index, pose) in trajectory.poses().enumerate() {
                let distance = d_mag(query, pose);
                if distance < best_distance {
                    best_distance = distance;
                    best_index = index;
                }
            }
            *trajectory.pose(best_index)
        })
        .collect()
}

/// Normalizes inverse distances into probabilities summing to one.
pub fn probabilities_from_distances(distances: &[f64]) -> Vec<f64> {
    let inverses: Vec<f64> = distances.iter().map(|d| 1.0 / d).collect();
    let total: f64 = inverses.iter().sum();
    inverses.into_iter().map(|s| s / total).collect()
}

/// Per-condition probability of the query pose across the given (active)
/// conditions; a single condition gets probability one.
pub fn step_probability(
    query: &DualQuaternionPose,
    conditions: &[&ConditionModel],
    cfg: &ClassifierConfig,
) -> Result<Vec<f64>, ClassifierError> {
    if conditions.is_empty() {
        return Err(ClassifierError::TooFewConditions { got: 0 });
    }
    if conditions.len() == 1 {
        return Ok(vec![1.0]);
    }
    let distances = conditions
        .par_iter()
        .map(|condition| {
            let refs = closest_poses(query, condition);
            mahalanobis(query, &refs, condition.hyperparameters(), cfg.epsilon_floor, &cfg.jitter)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(probabilities_from_distances(&distances))
}

/// Trapezoidal integral of a probability trace over the inclusive sample
/// range `[from, to]`; a single sample yields that sample's value.
pub fn trajectory_likelihood(trace: &[f64], from: usize, to: usize) -> Result<f64, ClassifierError> {
    if from > to || to >= trace.len() {
        return Err(ClassifierError::RangeError { from, to, len: trace.len() });
    }
    if from == to {
        return Ok(trace[from]);
    }
    let mut integral = 0.0;
    for i in from..to {
        integral += 0.5 * (trace[i] + trace[i + 1]);
    }
    Ok(integral)
}

/// Which rule family triggered a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    Absolute,
    Window,
    Survivor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationEvent {
    pub label: String,
    pub step: usize,
    pub rule: DecisionRule,
}

/// Terminal or running status of a classification stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Running,
    Nominated { label: String, step: usize, rule: DecisionRule },
    Exhausted,
}

#[derive(Debug, Clone)]
struct ConditionStatus {
    active: bool,
    trace: Vec<f64>,
}

/// Online classification state over a fixed condition set.
///
/// Owned by a single stream; poses are fed one at a time through
/// [`ClassifierState::advance`]. Once a condition is nominated the state is
/// terminal.
#[derive(Debug, Clone)]
pub struct ClassifierState<'m> {
    models: &'m [ConditionModel],
    cfg: ClassifierConfig,
    status: Vec<ConditionStatus>,
    step: usize,
    outcome: Outcome,
    eliminations: Vec<EliminationEvent>,
}

impl<'m> ClassifierState<'m> {
    pub fn new(models: &'m [ConditionModel], cfg: ClassifierConfig) -> Result<Self, ClassifierError> {
        if models.is_empty() {
            return Err(ClassifierError::TooFewConditions { got: 0 });
        }
        cfg.validate(models.len())?;
        Ok(Self {
            models,
            cfg,
            status: models
                .iter()
                .map(|_| ConditionStatus { active: true, trace: Vec::new() })
                .collect(),
            step: 0,
            outcome: Outcome::Running,
            eliminations: Vec::new(),
        })
    }

    pub fn outcome(&self) -> &Outcome {
        &self.outcome
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn active_labels(&self) -> Vec<&str> {
        self.models
            .iter()
            .zip(&self.status)
            .filter(|(_, s)| s.active)
            .map(|(m, _)| m.label())
            .collect()
    }

    pub fn eliminations(&self) -> &[EliminationEvent] {
        &self.eliminations
    }

    pub fn trace(&self, label: &str) -> Option<&[f64]> {
        self.models
            .iter()
            .position(|m| m.label() == label)
            .map(|i| self.status[i].trace.as_slice())
    }

    fn nominate(&mut self, index: usize, rule: DecisionRule) {
        self.outcome = Outcome::Nominated {
            label: self.models[index].label().to_string(),
            step: self.step,
            rule,
        };
    }

    fn eliminate(&mut self, index: usize, rule: DecisionRule) {
        self.status[index].active = false;
        self.eliminations.push(EliminationEvent {
            label: self.models[index].label().to_string(),
            step: self.step,
            rule,
        });
    }

    /// Feeds one pose: computes probabilities over the active set and
    /// applies, in order, absolute nomination, absolute elimination,
    /// windowed nomination, windowed elimination, then last-survivor
    /// auto-nomination.
    pub fn advance(&mut self, pose: &DualQuaternionPose) -> Result<Outcome, ClassifierError> {
        if self.outcome != Outcome::Running {
            return Err(ClassifierError::TerminalState);
        }
        let active: Vec<usize> = (0..self.models.len()).filter(|&i| self.status[i].active).collect();
        let conditions: Vec<&ConditionModel> = active.iter().map(|&i| &self.models[i]).collect();
        let probabilities = step_probability(pose, &conditions, &self.cfg)?;
        for (&index, &p) in active.iter().zip(&probabilities) {
            self.status[index].trace.push(p);
        }

        // Absolute nomination: best candidate at or above the threshold.
        let best = active
            .iter()
            .zip(&probabilities)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(&i, &p)| (i, p));
        if let Some((index, p)) = best {
            if p >= self.cfg.abs_nominate {
                self.nominate(index, DecisionRule::Absolute);
                self.step += 1;
                return Ok(self.outcome.clone());
            }
        }

        // Absolute elimination, guarded so the best candidate survives.
        let best_index = best.map(|(i, _)| i);
        for (&index, &p) in active.iter().zip(&probabilities) {
            if p <= self.cfg.abs_eliminate && Some(index) != best_index {
                self.eliminate(index, DecisionRule::Absolute);
            }
        }

        // Windowed rules engage once the window is full.
        if self.step + 1 >= self.cfg.window_m {
            let window_from = self.step + 1 - self.cfg.window_m;
            let survivors: Vec<usize> =
                active.iter().copied().filter(|&i| self.status[i].active).collect();
            let mut integrals = Vec::with_capacity(survivors.len());
            for &index in &survivors {
                let trace = &self.status[index].trace;
                integrals.push(trajectory_likelihood(trace, window_from, self.step)?);
            }
            let best_window = survivors
                .iter()
                .zip(&integrals)
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|(&i, &v)| (i, v));
            if let Some((index, integral)) = best_window {
                if integral >= self.cfg.win_nominate {
                    self.nominate(index, DecisionRule::Window);
                    self.step += 1;
                    return Ok(self.outcome.clone());
                }
            }
            let best_window_index = best_window.map(|(i, _)| i);
            for (&index, &integral) in survivors.iter().zip(&integrals) {
                if integral <= self.cfg.win_eliminate && Some(index) != best_window_index {
                    self.eliminate(index, DecisionRule::Window);
                }
            }
        }

        // Last survivor is nominated outright.
        let remaining: Vec<usize> =
            (0..self.models.len()).filter(|&i| self.status[i].active).collect();
        if remaining.len() == 1 {
            self.nominate(remaining[0], DecisionRule::Survivor);
        }
        self.step += 1;
        Ok(self.outcome.clone())
    }
}

/// Full classification result of one streamed trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub nominated: Option<String>,
    pub nomination_step: Option<usize>,
    /// `(nomination_step + 1) / trajectory length`.
    pub nomination_fraction: Option<f64>,
    pub nomination_rule: Option<DecisionRule>,
    pub eliminations: Vec<EliminationEvent>,
    pub traces: BTreeMap<String, Vec<f64>>,
}

/// Streams a trajectory through the decision rules, stopping at the first
/// nomination; no sample beyond the nomination step is read.
pub fn classify_stream(
    trajectory: &Trajectory,
    models: &[ConditionModel],
    cfg: &ClassifierConfig,
) -> Result<ClassificationReport, ClassifierError> {
    if models.len() < 2 {
        return Err(ClassifierError::TooFewConditions { got: models.len() });
    }
    let mut state = ClassifierState::new(models, *cfg)?;
    for sample in trajectory.samples() {
        if let Outcome::Nominated { .. } = state.advance(&sample.pose)? {
            break;
        }
    }

    let (nominated, nomination_step, rule) = match state.outcome() {
        Outcome::Nominated { label, step, rule } => (Some(label.clone()), Some(*step), Some(*rule)),
        _ => (None, None, None),
    };
    let nomination_fraction =
        nomination_step.map(|step| (step + 1) as f64 / trajectory.len() as f64);
    let traces = models
        .iter()
        .zip(&state.status)
        .map(|(model, status)| (model.label().to_string(), status.trace.clone()))
        .collect();
    Ok(ClassificationReport {
        nominated,
        nomination_step,
        nomination_fraction,
        nomination_rule: rule,
        eliminations: state.eliminations.clone(),
        traces,
    })
}

/// Writes probability traces as CSV: `step` column plus one column per
/// condition (sorted by label); cells are empty after a condition's trace
/// ends.
pub fn write_traces_csv(report: &ClassificationReport, mut writer: impl Write) -> std::io::Result<()> {
    let labels: Vec<&String> = report.traces.keys().collect();
    let longest = report.traces.values().map(|t| t.len()).max().unwrap_or(0);
    let mut header = vec!["step".to_string()];
    header.extend(labels.iter().map(|l| (*l).clone()));
    writeln!(writer, "{}", header.join(","))?;
    for step in 0..longest {
        let mut row = vec![step.to_string()];
        for label in &labels {
            let trace = &report.traces[*label];
            row.push(trace.get(step).map(|p| format!("{p}")).unwrap_or_default());
        }
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

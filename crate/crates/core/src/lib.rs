//! Gaussian process models of 6D rigid-body motion over dual quaternions,
//! with streaming classification of pose trajectories into known motion
//! conditions and prediction of the remaining trajectory.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`] — quaternion / dual quaternion algebra, tangent-space
//!   frames, central projection, and the arc and transformation-magnitude
//!   distances.
//! * [`kernels`] — squared-exponential kernels over those distances and
//!   Gram matrix assembly with a jitter escalation policy.
//! * [`optim`] — multi-start Nelder-Mead used for hyperparameter fitting.
//! * [`gp`] — per-output-dimension Gaussian process regression from poses
//!   to tangent-space velocities, with one-step integration and rollout.
//! * [`classifier`] — Mahalanobis similarity against per-condition training
//!   sets, streamed per-step class probabilities, and the nomination /
//!   elimination decision rules.
//! * [`data`] — trajectory CSV ingestion, pose/velocity pair extraction,
//!   dataset splitting, and a synthetic handover-style trajectory generator.

pub mod classifier;
pub mod data;
pub mod geometry;
pub mod gp;
pub mod kernels;
pub mod optim;

pub use classifier::{ClassificationReport, ClassifierConfig, ClassifierState, ConditionModel};
pub use data::{Trajectory, TrajectorySample};
pub use geometry::{
    central_project, d_arc, d_mag, dq_mul, quat_mul, tangent_frame, tangent_log,
    DualQuaternionPose, GeometryError, Quat, TangentVelocity, UnitQuaternion,
};
pub use gp::{FitConfig, GpModel, Prediction, Rollout};
pub use kernels::{gram, k_arc, k_mag, k_se, GramMatrix, Hyperparameters, JitterPolicy};

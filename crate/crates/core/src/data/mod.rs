//! Trajectory ingestion and preprocessing.
//!
//! Trajectories are time-indexed pose sequences. The canonical interchange
//! format is CSV with header `t,px,py,pz,qw,qx,qy,qz` (UTF-8, LF line
//! endings, time in seconds, positions in meters); a JSON manifest lists
//! files with their condition labels. On construction every trajectory is
//! normalized: the first orientation is canonicalized to the `w >= 0`
//! hemisphere and subsequent signs are aligned so consecutive quaternion
//! dot products stay positive.
//!
//! [`derive_velocities`] turns consecutive pose pairs into the training
//! pairs consumed by the regression model: per-step tangent-space rotation
//! rates and translation rates. The time step scale is kept intact, so
//! targets are per step, not per second.

pub mod synth;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    d_arc, tangent_log, DualQuaternionPose, GeometryError, TangentVelocity, UnitQuaternion,
};

/// Largest plausible per-step rotation: anything above this arc between
/// consecutive samples is treated as a physically implausible jump.
pub const MAX_STEP_ARC: f64 = std::f64::consts::FRAC_PI_4;

/// Default bound on per-step velocity magnitudes used to reject corrupt data.
pub const DEFAULT_VELOCITY_LIMIT: f64 = 10.0;

const CSV_HEADER: [&str; 8] = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("line {line}: time stamps must be strictly increasing")]
    NonMonotoneTime { line: u64 },
    #[error("line {line}: quaternion cannot be normalized")]
    InvalidQuaternion { line: u64 },
    #[error("line {line}: implausible orientation jump of {arc:.3} rad between consecutive samples")]
    JumpDetected { line: u64, arc: f64 },
    #[error("trajectory needs at least {required} samples, got {got}")]
    TooFewSamples { got: usize, required: usize },
    #[error("condition {label:?} has {available} trajectories, needs at least {required}")]
    InsufficientData { label: String, available: usize, required: usize },
    #[error("trajectory {index} has no condition label")]
    MissingLabel { index: usize },
    #[error("samples {index} and {} are antipodal; tangent-space velocity undefined", index + 1)]
    AntipodalSamples { index: usize },
    #[error("velocity at sample {index} has magnitude {magnitude:.3}, limit {limit:.3}")]
    VelocityOutOfRange { index: usize, magnitude: f64, limit: f64 },
    #[error("condition {label:?} is not in the feasible set")]
    InfeasibleCondition { label: String },
    #[error("synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    Recorded,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    /// Seconds.
    pub t: f64,
    pub pose: DualQuaternionPose,
}

/// Time-indexed pose sequence with uniform-step metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    label: Option<String>,
    source: TrajectorySource,
    nominal_rate: f64,
}

impl Trajectory {
    /// Validates and normalizes a sample sequence.
    ///
    /// Errors carry the 0-based sample index in their `line` field; the CSV
    /// loader rewrites it into a file line number.
    pub fn new(
        mut samples: Vec<TrajectorySample>,
        label: Option<String>,
        source: TrajectorySource,
        nominal_rate: f64,
    ) -> Result<Self, DataError> {
        if samples.is_empty() {
            return Err(DataError::TooFewSamples { got: 0, required: 1 });
        }
        for (i, sample) in samples.iter().enumerate() {
            if !sample.t.is_finite() || !sample.pose.is_finite() {
                return Err(DataError::ParseError {
                    line: i as u64,
                    message: "non-finite sample".into(),
                });
            }
            if i > 0 && sample.t <= samples[i - 1].t {
                return Err(DataError::NonMonotoneTime { line: i as u64 });
            }
        }
        // Hemisphere-canonicalize the first pose, then keep signs continuous.
        samples[0].pose = samples[0].pose.canonicalized();
        for i in 1..samples.len() {
            let previous = samples[i - 1].pose;
            samples[i].pose = samples[i].pose.sign_aligned(&previous);
            let arc = d_arc(&previous.rotation(), &samples[i].pose.rotation());
            if arc > MAX_STEP_ARC {
                return Err(DataError::JumpDetected { line: i as u64, arc });
            }
        }
        Ok(Self { samples, label, source, nominal_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn pose(&self, index: usize) -> &DualQuaternionPose {
        &self.samples[index].pose
    }

    pub fn poses(&self) -> impl Iterator<Item = &DualQuaternionPose> {
        self.samples.iter().map(|s| &s.pose)
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn source(&self) -> TrajectorySource {
        self.source
    }

    pub fn nominal_rate(&self) -> f64 {
        self.nominal_rate
    }
}

/// Reads a trajectory CSV (`t,px,py,pz,qw,qx,qy,qz`).
pub fn load_trajectory(path: &Path) -> Result<Trajectory, DataError> {
    let file = std::fs::File::open(path)?;
    read_trajectory(file)
}

/// Reads trajectory CSV data from any reader.
pub fn read_trajectory(reader: impl Read) -> Result<Trajectory, DataError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = csv_reader.headers()?;
        let expected: Vec<&str> = CSV_HEADER.to_vec();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(DataError::ParseError {
                line: 1,
                message: format!("bad header {:?}, expected {}", headers, CSV_HEADER.join(",")),
            });
        }
    }

    let mut samples = Vec::new();
    let mut dts = Vec::new();
    for (index, record) in csv_reader.records().enumerate() {
        let record = record?;
        let line = index as u64 + 2;
        if record.len() != 8 {
            return Err(DataError::ParseError {
                line,
                message: format!("expected 8 fields, got {}", record.len()),
            });
        }
        let mut values = [0.0_f64; 8];
        for (i, field) in record.iter().enumerate() {
            values[i] = field.trim().parse::<f64>().map_err(|e| DataError::ParseError {
                line,
                message: format!("field {:?}: {e}", CSV_HEADER[i]),
            })?;
        }
        let t = values[0];
        let position = nalgebra::Vector3::new(values[1], values[2], values[3]);
        let rotation = UnitQuaternion::new(values[4], values[5], values[6], values[7])
            .map_err(|_| DataError::InvalidQuaternion { line })?;
        if let Some(last) = samples.last() {
            let last: &TrajectorySample = last;
            dts.push(t - last.t);
        }
        samples.push(TrajectorySample { t, pose: DualQuaternionPose::from_pose(rotation, &position) });
    }

    let nominal_rate = median_rate(&mut dts);
    Trajectory::new(samples, None, TrajectorySource::Recorded, nominal_rate)
        .map_err(|e| offset_sample_index_to_line(e, 2))
}

/// Writes a trajectory in the canonical CSV form; floats use the shortest
/// representation that round-trips exactly.
pub fn write_trajectory(trajectory: &Trajectory, writer: impl Write) -> Result<(), DataError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(CSV_HEADER)?;
    for sample in trajectory.samples() {
        let (rotation, p) = sample.pose.to_pose();
        let q = rotation.as_quat();
        csv_writer.write_record([
            format_float(sample.t),
            format_float(p.x),
            format_float(p.y),
            format_float(p.z),
            format_float(q.w),
            format_float(q.x),
            format_float(q.y),
            format_float(q.z),
        ])?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn save_trajectory(trajectory: &Trajectory, path: &Path) -> Result<(), DataError> {
    let file = std::fs::File::create(path)?;
    write_trajectory(trajectory, file)
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

fn median_rate(dts: &mut [f64]) -> f64 {
    if dts.is_empty() {
        return 1.0;
    }
    dts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = dts[dts.len() / 2];
    if median > 0.0 && median.is_finite() {
        1.0 / median
    } else {
        1.0
    }
}

fn offset_sample_index_to_line(error: DataError, offset: u64) -> DataError {
    match error {
        DataError::ParseError { line, message } => DataError::ParseError { line: line + offset, message },
        DataError::NonMonotoneTime { line } => DataError::NonMonotoneTime { line: line + offset },
        DataError::InvalidQuaternion { line } => DataError::InvalidQuaternion { line: line + offset },
        DataError::JumpDetected { line, arc } => DataError::JumpDetected { line: line + offset, arc },
        other => other,
    }
}

/// One manifest row: a trajectory file and its condition label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
    pub steps: usize,
}

/// Dataset manifest: file listing plus the generation seed when synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: Option<u64>,
    pub files: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn save_to(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_from(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Loads every manifest entry relative to the manifest's directory,
/// attaching labels.
pub fn load_dataset(manifest_path: &Path) -> Result<Vec<Trajectory>, DataError> {
    let manifest = DatasetManifest::load_from(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut trajectories = Vec::with_capacity(manifest.files.len());
    for entry in &manifest.files {
        let trajectory = load_trajectory(&base.join(&entry.path))?;
        trajectories.push(trajectory.with_label(entry.label.clone()));
    }
    Ok(trajectories)
}

/// Per-step training pairs from consecutive samples: the tangent-space
/// rotation rate at the earlier pose plus the translation difference.
pub fn derive_velocities(
    trajectory: &Trajectory,
    velocity_limit: f64,
) -> Result<Vec<(DualQuaternionPose, TangentVelocity)>, DataError> {
    let samples = trajectory.samples();
    if samples.len() < 2 {
        return Err(DataError::TooFewSamples { got: samples.len(), required: 2 });
    }
    let mut pairs = Vec::with_capacity(samples.len() - 1);
    for i in 0..samples.len() - 1 {
        let (q0, p0) = samples[i].pose.to_pose();
        let (q1, p1) = samples[i + 1].pose.to_pose();
        let v_ts = tangent_log(&q0, &q1).map_err(|e| match e {
            GeometryError::AntipodalPair { .. } => DataError::AntipodalSamples { index: i },
            other => DataError::Geometry(other),
        })?;
        let velocity = TangentVelocity::new(v_ts, p1 - p0);
        if !velocity.is_finite() || velocity.norm() > velocity_limit {
            return Err(DataError::VelocityOutOfRange {
                index: i,
                magnitude: velocity.norm(),
                limit: velocity_limit,
            });
        }
        pairs.push((samples[i].pose, velocity));
    }
    Ok(pairs)
}

/// Deterministic seeded split on labels: per condition, `train_k` items go
/// to training and the rest to testing. Returns sorted index lists into the
/// input slice.
pub fn split_indices(
    labels: &[String],
    train_k: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (index, label) in labels.iter().enumerate() {
        by_label.entry(label.as_str()).or_default().push(index);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (label, mut indices) in by_label {
        if indices.len() < train_k + 1 {
            return Err(DataError::InsufficientData {
                label: label.to_string(),
                available: indices.len(),
                required: train_k + 1,
            });
        }
        indices.shuffle(&mut rng);
        train_indices.extend_from_slice(&indices[..train_k]);
        test_indices.extend_from_slice(&indices[train_k..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok((train_indices, test_indices))
}

/// Deterministic seeded split into `train_k` training trajectories per
/// condition and the rest for testing.
pub fn split(
    trajectories: Vec<Trajectory>,
    train_k: usize,
    seed: u64,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>), DataError> {
    let labels = trajectories
        .iter()
        .enumerate()
        .map(|(index, trajectory)| {
            trajectory
                .label()
                .map(str::to_string)
                .ok_or(DataError::MissingLabel { index })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (train_indices, test_indices) = split_indices(&labels, train_k, seed)?;

    let mut train = Vec::with_capacity(train_indices.len());
    let mut test = Vec::with_capacity(test_indices.len());
    let mut slots: Vec<Option<Trajectory>> = trajectories.into_iter().map(Some).collect();
    for index in train_indices {
        train.push(slots[index].take().expect("split indices are disjoint"));
    }
    for index in test_indices {
        test.push(slots[index].take().expect("split indices are disjoint"));
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn line_trajectory(n: usize, step: f64) -> Trajectory {
        let samples = (0..n)
            .map(|i| TrajectorySample {
                t: i as f64 / 240.0,
                pose: DualQuaternionPose::from_pose(
                    UnitQuaternion::identity(),
                    &Vector3::new(step * i as f64, 0.0, 0.0),
                ),
            })
            .collect();
        Trajectory::new(samples, Some("line".into()), TrajectorySource::Synthetic, 240.0).unwrap()
    }

    fn turning_trajectory(n: usize) -> Trajectory {
        let samples = (0..n)
            .map(|i| {
                let angle = 0.004 * i as f64;
                TrajectorySample {
                    t: i as f64 / 240.0,
                    pose: DualQuaternionPose::from_pose(
                        UnitQuaternion::from_axis_angle(&Vector3::z(), angle).unwrap(),
                        &Vector3::new(0.001 * i as f64, 0.0002 * i as f64, 0.0),
                    ),
                }
            })
            .collect();
        Trajectory::new(samples, None, TrajectorySource::Synthetic, 240.0).unwrap()
    }

    #[test]
    fn loads_well_formed_csv() {
        let csv = "t,px,py,pz,qw,qx,qy,qz\n0.0,0.1,0.2,0.3,1.0,0.0,0.0,0.0\n0.004,0.11,0.2,0.3,1.0,0.0,0.0,0.0\n";
        let trajectory = read_trajectory(csv.as_bytes()).unwrap();
        assert_eq!(trajectory.len(), 2);
        assert_relative_eq!(trajectory.samples()[1].t, 0.004, epsilon = 1e-15);
        assert_relative_eq!(trajectory.nominal_rate(), 250.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_zero_quaternion_with_line_number() {
        let csv = "t,px,py,pz,qw,qx,qy,qz\n0.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0\n0.004,0.0,0.0,0.0,0.0,0.0,0.0,0.0\n";
        let err = read_trajectory(csv.as_bytes()).unwrap_err();
        match err {
            DataError::InvalidQuaternion { line } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotone_time_with_line_number() {
        let csv = "t,px,py,pz,qw,qx,qy,qz\n0.0,0,0,0,1,0,0,0\n0.004,0,0,0,1,0,0,0\n0.004,0,0,0,1,0,0,0\n";
        let err = read_trajectory(csv.as_bytes()).unwrap_err();
        match err {
            DataError::NonMonotoneTime { line } => assert_eq!(line, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_unparsable_field() {
        let csv = "t,px,py,pz,qw,qx,qy,qz\n0.0,0,zero,0,1,0,0,0\n";
        let err = read_trajectory(csv.as_bytes()).unwrap_err();
        match err {
            DataError::ParseError { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_orientation_jump() {
        // Second row is rotated 120 degrees from the first: beyond pi/4.
        let csv = "t,px,py,pz,qw,qx,qy,qz\n0.0,0,0,0,1,0,0,0\n0.004,0,0,0,0.5,0.866025403784,0,0\n";
        let err = read_trajectory(csv.as_bytes()).unwrap_err();
        match err {
            DataError::JumpDetected { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let trajectory = turning_trajectory(50);
        let mut buffer = Vec::new();
        write_trajectory(&trajectory, &mut buffer).unwrap();
        let reloaded = read_trajectory(buffer.as_slice()).unwrap();
        assert_eq!(reloaded.len(), trajectory.len());
        for (a, b) in trajectory.samples().iter().zip(reloaded.samples()) {
            assert_eq!(a.t, b.t);
            assert!(crate::geometry::d_mag(&a.pose, &b.pose) < 1e-12);
        }
        // LF line endings only.
        assert!(!buffer.contains(&b'\r'));
    }

    #[test]
    fn sign_continuity_enforced_on_construction() {
        // Alternate raw signs; construction must align them.
        let samples = (0..10)
            .map(|i| {
                let angle = 0.01 * i as f64;
                let q = UnitQuaternion::from_axis_angle(&Vector3::z(), angle).unwrap();
                let q = if i % 2 == 1 { q.negated() } else { q };
                TrajectorySample {
                    t: i as f64,
                    pose: DualQuaternionPose::from_pose(q, &Vector3::zeros()),
                }
            })
            .collect();
        let trajectory =
            Trajectory::new(samples, None, TrajectorySource::Recorded, 240.0).unwrap();
        for pair in trajectory.samples().windows(2) {
            assert!(pair[0].pose.rotation().dot(&pair[1].pose.rotation()) > 0.0);
        }
        assert!(trajectory.samples()[0].pose.rotation().w >= 0.0);
    }

    #[test]
    fn derive_velocities_stationary_and_line() {
        let stationary = line_trajectory(20, 0.0);
        let pairs = derive_velocities(&stationary, DEFAULT_VELOCITY_LIMIT).unwrap();
        assert_eq!(pairs.len(), 19);
        for (_, velocity) in &pairs {
            assert!(velocity.norm() < 1e-12);
        }

        let line = line_trajectory(20, 0.01);
        let pairs = derive_velocities(&line, DEFAULT_VELOCITY_LIMIT).unwrap();
        for (_, velocity) in &pairs {
            assert_relative_eq!(velocity.p_dot, Vector3::new(0.01, 0.0, 0.0), epsilon = 1e-12);
            assert!(velocity.v_ts.norm() < 1e-12);
        }
    }

    #[test]
    fn derive_velocities_inverts_through_step() {
        let trajectory = turning_trajectory(500);
        let pairs = derive_velocities(&trajectory, DEFAULT_VELOCITY_LIMIT).unwrap();
        let mut pose = *trajectory.pose(0);
        for (i, (_, velocity)) in pairs.iter().enumerate() {
            pose = gp::step(&pose, velocity);
            let reference = trajectory.pose(i + 1);
            assert!(
                crate::geometry::d_mag(&pose, reference) < 1e-9,
                "drift at step {i}"
            );
        }
    }

    #[test]
    fn derive_velocities_rejects_out_of_range() {
        let trajectory = line_trajectory(3, 6.0);
        let err = derive_velocities(&trajectory, 5.0).unwrap_err();
        assert!(matches!(err, DataError::VelocityOutOfRange { .. }));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let mut trajectories = Vec::new();
        for label in ["a", "b"] {
            for i in 0..20 {
                trajectories.push(line_trajectory(5, 0.001 * (i + 1) as f64).with_label(label));
            }
        }
        let (train1, test1) = split(trajectories.clone(), 15, 7).unwrap();
        let (train2, test2) = split(trajectories.clone(), 15, 7).unwrap();
        assert_eq!(train1.len(), 30);
        assert_eq!(test1.len(), 10);
        assert_eq!(train1, train2);
        assert_eq!(test1, test2);
        // A different seed reshuffles.
        let (train3, _) = split(trajectories.clone(), 15, 8).unwrap();
        assert_ne!(train1, train3);
        // Disjoint: 15 + 5 per label accounts for every trajectory.
        let (train, test) = split(trajectories, 15, 7).unwrap();
        assert_eq!(train.len() + test.len(), 40);
    }

    #[test]
    fn split_reports_insufficient_data() {
        let trajectories = vec![
            line_trajectory(5, 0.001).with_label("only"),
            line_trajectory(5, 0.002).with_label("only"),
        ];
        let err = split(trajectories, 2, 0).unwrap_err();
        match err {
            DataError::InsufficientData { label, available, required } => {
                assert_eq!(label, "only");
                assert_eq!(available, 2);
                assert_eq!(required, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = DatasetManifest {
            seed: Some(42),
            files: vec![ManifestEntry { path: "t0.csv".into(), label: "b-l".into(), steps: 5 }],
        };
        let path = dir.path().join("manifest.json");
        manifest.save_to(&path).unwrap();
        assert_eq!(DatasetManifest::load_from(&path).unwrap(), manifest);
    }

    #[test]
    fn load_dataset_attaches_labels() {
        let dir = tempfile::tempdir().unwrap();
        let trajectory = line_trajectory(5, 0.001);
        save_trajectory(&trajectory, &dir.path().join("t0.csv")).unwrap();
        let manifest = DatasetManifest {
            seed: None,
            files: vec![ManifestEntry { path: "t0.csv".into(), label: "b-l".into(), steps: 5 }],
        };
        let manifest_path = dir.path().join("manifest.json");
        manifest.save_to(&manifest_path).unwrap();
        let loaded = load_dataset(&manifest_path).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].label(), Some("b-l"));
    }
}

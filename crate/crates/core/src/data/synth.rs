//! Synthetic handover-style trajectory generator.
//!
//! Each condition pairs a grasp configuration (which fixes the start pose
//! and a wrist twist at the end) with a handover configuration (which fixes
//! the end pose region). Ten of the sixteen combinations are feasible; the
//! rest are rejected.
//!
//! Per repetition, the template path gets smooth perturbations: endpoint
//! positions and orientations are jittered, a low-frequency positional bump
//! is added mid-path, and the duration is drawn from the configured step
//! range. Positions follow a minimum-jerk profile; orientations follow a
//! constant-rate shortest-arc interpolation between the perturbed endpoint
//! orientations. Everything is seeded and bit-reproducible.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataError, Trajectory, TrajectorySample, TrajectorySource};
use crate::geometry::UnitQuaternion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grasp {
    Bottom,
    Top,
    Above,
    Reversed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Handover {
    Right,
    Down,
    Left,
    Up,
}

impl Grasp {
    pub fn letter(&self) -> char {
        match self {
            Grasp::Bottom => 'b',
            Grasp::Top => 't',
            Grasp::Above => 'a',
            Grasp::Reversed => 'r',
        }
    }
}

impl Handover {
    pub fn letter(&self) -> char {
        match self {
            Handover::Right => 'r',
            Handover::Down => 'd',
            Handover::Left => 'l',
            Handover::Up => 'u',
        }
    }
}

/// One grasp/handover combination, labeled like `b-l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub grasp: Grasp,
    pub handover: Handover,
}

impl Condition {
    pub fn new(grasp: Grasp, handover: Handover) -> Self {
        Self { grasp, handover }
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.grasp.letter(), self.handover.letter())
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let bad = || DataError::InfeasibleCondition { label: text.to_string() };
        let mut parts = text.split('-');
        let grasp = match parts.next().ok_or_else(bad)? {
            "b" => Grasp::Bottom,
            "t" => Grasp::Top,
            "a" => Grasp::Above,
            "r" => Grasp::Reversed,
            _ => return Err(bad()),
        };
        let handover = match parts.next().ok_or_else(bad)? {
            "r" => Handover::Right,
            "d" => Handover::Down,
            "l" => Handover::Left,
            "u" => Handover::Up,
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self { grasp, handover })
    }
}

/// The ten feasible grasp/handover combinations.
pub fn feasible_conditions() -> Vec<Condition> {
    use Grasp::*;
    use Handover::*;
    vec![
        Condition::new(Bottom, Right),
        Condition::new(Bottom, Down),
        Condition::new(Bottom, Left),
        Condition::new(Bottom, Up),
        Condition::new(Top, Right),
        Condition::new(Top, Left),
        Condition::new(Above, Right),
        Condition::new(Above, Up),
        Condition::new(Reversed, Down),
        Condition::new(Reversed, Left),
    ]
}

/// Generation settings: condition list, repetitions, step range, endpoint
/// noise, modulation depth, and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub conditions: Vec<Condition>,
    pub repetitions: usize,
    pub steps_min: usize,
    pub steps_max: usize,
    /// Endpoint/waypoint position noise, meters.
    pub noise_pos: f64,
    /// Endpoint orientation noise, radians.
    pub noise_ang: f64,
    /// Amplitude of the condition-specific positional modulation, meters.
    pub wiggle_pos: f64,
    /// Amplitude of the condition-specific orientation modulation, radians.
    pub wiggle_ang: f64,
    pub seed: u64,
    /// Metadata only; sample times are `step / nominal_rate`.
    pub nominal_rate: f64,
}

impl SynthSpec {
    /// The full ten-condition benchmark configuration.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            conditions: feasible_conditions(),
            repetitions: 20,
            steps_min: 404,
            steps_max: 468,
            noise_pos: 0.01,
            noise_ang: 0.02,
            wiggle_pos: 0.012,
            wiggle_ang: 0.025,
            seed,
            nominal_rate: 240.0,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let feasible = feasible_conditions();
        if self.conditions.is_empty() {
            return Err(DataError::InvalidSpec("condition list is empty".into()));
        }
        for (i, condition) in self.conditions.iter().enumerate() {
            if !feasible.contains(condition) {
                return Err(DataError::InfeasibleCondition { label: condition.label() });
            }
            if self.conditions[..i].contains(condition) {
                return Err(DataError::InvalidSpec(format!("duplicate condition {}", condition.label())));
            }
        }
        if self.repetitions == 0 {
            return Err(DataError::InvalidSpec("repetitions must be positive".into()));
        }
        if self.steps_min < 2 || self.steps_max < self.steps_min {
            return Err(DataError::InvalidSpec(format!(
                "step range {}..={} invalid",
                self.steps_min, self.steps_max
            )));
        }
        if !(self.noise_pos.is_finite() && self.noise_pos >= 0.0)
            || !(self.noise_ang.is_finite() && self.noise_ang >= 0.0)
            || !(self.wiggle_pos.is_finite() && self.wiggle_pos >= 0.0)
            || !(self.wiggle_ang.is_finite() && self.wiggle_ang >= 0.0)
        {
            return Err(DataError::InvalidSpec("noise levels must be nonnegative".into()));
        }
        if !(self.nominal_rate.is_finite() && self.nominal_rate > 0.0) {
            return Err(DataError::InvalidSpec("nominal rate must be positive".into()));
        }
        Ok(())
    }
}

fn rot_x(angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&Vector3::x(), angle).expect("unit axis")
}

fn rot_y(angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&Vector3::y(), angle).expect("unit axis")
}

fn rot_z(angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&Vector3::z(), angle).expect("unit axis")
}

/// Hand orientation while grasping, before the reach starts.
pub fn grasp_orientation(grasp: Grasp) -> UnitQuaternion {
    match grasp {
        Grasp::Bottom => UnitQuaternion::identity(),
        Grasp::Top => rot_x(1.9),
        Grasp::Above => rot_y(-1.8),
        Grasp::Reversed => rot_z(2.0),
    }
}

/// Hand position at grasp time; the object rests near the table origin.
pub fn grasp_position(grasp: Grasp) -> Vector3<f64> {
    match grasp {
        Grasp::Bottom => Vector3::new(0.0, 0.0, -0.04),
        Grasp::Top => Vector3::new(0.0, 0.0, 0.06),
        Grasp::Above => Vector3::new(0.0, 0.05, 0.10),
        Grasp::Reversed => Vector3::new(0.06, 0.0, 0.02),
    }
}

fn handover_orientation(handover: Handover) -> UnitQuaternion {
    match handover {
        Handover::Right => rot_y(-1.0),
        Handover::Down => rot_x(1.2),
        Handover::Left => rot_y(1.0),
        Handover::Up => rot_z(0.8),
    }
}

fn handover_base_position(handover: Handover) -> Vector3<f64> {
    let reach = Vector3::new(0.0, 0.55, 0.15);
    let offset = match handover {
        Handover::Right => Vector3::new(0.30, 0.0, 0.0),
        Handover::Down => Vector3::new(0.0, 0.0, -0.26),
        Handover::Left => Vector3::new(-0.30, 0.0, 0.0),
        Handover::Up => Vector3::new(0.0, 0.0, 0.26),
    };
    reach + offset
}

/// Residual wrist twist at the handover; depends on how the object was
/// grasped, which keeps end poses of same-handover conditions apart.
fn grasp_twist(grasp: Grasp) -> f64 {
    match grasp {
        Grasp::Bottom => 0.0,
        Grasp::Top => 0.75,
        Grasp::Above => 1.5,
        Grasp::Reversed => 2.25,
    }
}

fn grasp_end_offset(grasp: Grasp) -> Vector3<f64> {
    match grasp {
        Grasp::Bottom => Vector3::new(0.0, -0.05, -0.03),
        Grasp::Top => Vector3::new(0.0, -0.05, 0.03),
        Grasp::Above => Vector3::new(0.04, 0.05, 0.0),
        Grasp::Reversed => Vector3::new(-0.04, 0.05, 0.0),
    }
}

/// Hand orientation template at the handover for a full condition.
pub fn handover_orientation_for(condition: &Condition) -> UnitQuaternion {
    handover_orientation(condition.handover) * rot_z(grasp_twist(condition.grasp))
}

/// Hand position template at the handover for a full condition.
pub fn handover_position_for(condition: &Condition) -> Vector3<f64> {
    handover_base_position(condition.handover) + grasp_end_offset(condition.grasp)
}

/// Minimum-jerk time profile on `[0, 1]`.
fn minimum_jerk(u: f64) -> f64 {
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Condition-specific smooth path modulation, shared by all repetitions of
/// the condition.
///
/// A `sin(pi u)` envelope keeps the endpoints exactly on the template
/// poses. The modulation gives the velocity field structure at a scale well
/// below the path length, which is what the regression length scales lock
/// onto; without it the field degenerates to a near-linear ramp.
struct ConditionModulation {
    pos_dir: [Vector3<f64>; 2],
    pos_amp: [f64; 2],
    pos_freq: [f64; 2],
    pos_phase: [f64; 2],
    /// Three generic axes so every rotational direction sees structure;
    /// the base interpolation alone has a constant rotational rate.
    rot_axis: [Vector3<f64>; 3],
    rot_amp: [f64; 3],
    rot_freq: [f64; 3],
    rot_phase: [f64; 3],
}

impl ConditionModulation {
    fn for_condition(spec: &SynthSpec, condition_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream((1 << 40) | condition_index as u64);
        let mut unit = |rng: &mut ChaCha8Rng| {
            let mut v = gaussian3(rng);
            while v.norm() < 1e-6 {
                v = gaussian3(rng);
            }
            v / v.norm()
        };
        let mut phase = |rng: &mut ChaCha8Rng| rng.random_range(0.0..std::f64::consts::TAU);
        let pos_dir = [unit(&mut rng), unit(&mut rng)];
        let pos_phase = [phase(&mut rng), phase(&mut rng)];
        let rot_axis = [unit(&mut rng), unit(&mut rng), unit(&mut rng)];
        let rot_phase = [phase(&mut rng), phase(&mut rng), phase(&mut rng)];
        Self {
            pos_dir,
            pos_amp: [spec.wiggle_pos, 0.6 * spec.wiggle_pos],
            pos_freq: [2.0, 3.0],
            pos_phase,
            rot_axis,
            rot_amp: [spec.wiggle_ang, 0.7 * spec.wiggle_ang, 0.5 * spec.wiggle_ang],
            rot_freq: [2.0, 2.5, 3.5],
            rot_phase,
        }
    }

    fn position_offset(&self, u: f64) -> Vector3<f64> {
        let envelope = (std::f64::consts::PI * u).sin();
        let mut offset = Vector3::zeros();
        for i in 0..2 {
            let wave = (std::f64::consts::TAU * self.pos_freq[i] * u + self.pos_phase[i]).sin();
            offset += self.pos_dir[i] * (self.pos_amp[i] * wave * envelope);
        }
        offset
    }

    fn rotation_offset(&self, u: f64) -> UnitQuaternion {
        let envelope = (std::f64::consts::PI * u).sin();
        let mut offset = UnitQuaternion::identity();
        for i in 0..3 {
            let angle = self.rot_amp[i]
                * (std::f64::consts::TAU * self.rot_freq[i] * u + self.rot_phase[i]).sin()
                * envelope;
            offset = offset * UnitQuaternion::from_axis_angle(&self.rot_axis[i], angle).expect("unit axis");
        }
        offset
    }
}

/// Constant-rate interpolation along the shorter great-circle arc.
fn slerp(q0: &UnitQuaternion, q1: &UnitQuaternion, u: f64) -> UnitQuaternion {
    let mut dot = q0.dot(q1);
    let mut end = *q1.as_quat();
    if dot < 0.0 {
        end = -end;
        dot = -dot;
    }
    let dot = dot.clamp(-1.0, 1.0);
    if dot > 1.0 - 1e-12 {
        // Nearly parallel: linear blend, renormalized.
        let blended = q0.as_quat().scaled(1.0 - u) + end.scaled(u);
        return UnitQuaternion::from_quat(blended).expect("blend of nearby unit quaternions");
    }
    let omega = dot.acos();
    let sin_omega = omega.sin();
    let blended = q0.as_quat().scaled(((1.0 - u) * omega).sin() / sin_omega)
        + end.scaled((u * omega).sin() / sin_omega);
    UnitQuaternion::from_quat(blended).expect("slerp stays on the sphere")
}

fn gaussian3(rng: &mut impl Rng) -> Vector3<f64> {
    let n = |rng: &mut dyn rand::RngCore| -> f64 { StandardNormal.sample(rng) };
    Vector3::new(n(rng), n(rng), n(rng))
}

/// Small random rotation with Gaussian angle of the given scale.
fn random_rotation(rng: &mut impl Rng, angle_scale: f64) -> UnitQuaternion {
    // Draws are consumed even for zero scale so the stream layout does not
    // depend on the noise setting.
    let mut axis = gaussian3(rng);
    let angle: f64 = {
        let a: f64 = StandardNormal.sample(rng);
        a * angle_scale
    };
    while axis.norm() < 1e-6 {
        axis = gaussian3(rng);
    }
    UnitQuaternion::from_axis_angle(&axis, angle).expect("nonzero axis")
}

/// Generates the trajectory of one repetition of one condition.
fn generate_one(
    spec: &SynthSpec,
    condition: &Condition,
    condition_index: usize,
    repetition: usize,
    modulation: &ConditionModulation,
) -> Result<Trajectory, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((condition_index as u64) << 24) | repetition as u64);

    let steps = if spec.steps_min == spec.steps_max {
        spec.steps_min
    } else {
        rng.random_range(spec.steps_min..=spec.steps_max)
    };

    let p_start = grasp_position(condition.grasp) + spec.noise_pos * gaussian3(&mut rng);
    let p_end = handover_position_for(condition) + spec.noise_pos * gaussian3(&mut rng);
    let mid_bump = spec.noise_pos * gaussian3(&mut rng);
    let q_start = grasp_orientation(condition.grasp) * random_rotation(&mut rng, spec.noise_ang);
    let q_end = handover_orientation_for(condition) * random_rotation(&mut rng, spec.noise_ang);

    let mut samples = Vec::with_capacity(steps);
    for step in 0..steps {
        let u = step as f64 / (steps - 1) as f64;
        let s = minimum_jerk(u);
        let position = p_start
            + (p_end - p_start) * s
            + mid_bump * (std::f64::consts::PI * u).sin()
            + modulation.position_offset(u);
        let rotation = slerp(&q_start, &q_end, u) * modulation.rotation_offset(u);
        samples.push(TrajectorySample {
            t: step as f64 / spec.nominal_rate,
            pose: crate::geometry::DualQuaternionPose::from_pose(rotation, &position),
        });
    }
    Trajectory::new(samples, Some(condition.label()), TrajectorySource::Synthetic, spec.nominal_rate)
}

/// Generates `repetitions` trajectories per condition, ordered by condition
/// then repetition; bit-reproducible for a fixed seed.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<Trajectory>, DataError> {
    spec.validate()?;
    let mut trajectories = Vec::with_capacity(spec.conditions.len() * spec.repetitions);
    for (condition_index, condition) in spec.conditions.iter().enumerate() {
        let modulation = ConditionModulation::for_condition(spec, condition_index);
        for repetition in 0..spec.repetitions {
            trajectories.push(generate_one(spec, condition, condition_index, repetition, &modulation)?);
        }
    }
    Ok(trajectories)
}

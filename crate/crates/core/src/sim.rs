//! Ground-truth world that executes touch-and-slide actions.
//!
//! The world knows the true base pose and the exact environment. An action
//! moves the end-effector from its pre-touch pose along the tool axis until
//! contact, then slides it along the surface while pressing lightly, and
//! reports joint configurations with (noisy) contact flags.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::action::Selection;
use crate::filter::{ContactEvent, Observation};
use crate::geometry::{
    closest_cloud_point, cloud_distance, DistanceField, EndEffectorCloud, EnvironmentModel, Geometry, GeometryError,
    SdfGrid,
};
use crate::kinematics::{IkParams, IkTarget, JointConfig, KinematicChain, KinematicsError};
use crate::math;
use crate::rng::{stream, uniform, NoiseSource};
use crate::se3::{Pose6, PoseSE3};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("noise setting {name} = {value} is out of range")]
    BadNoise { name: &'static str, value: f64 },
    #[error("error interval component {index} must be finite and non-negative, got {value}")]
    BadInterval { index: usize, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct NoiseConfig {
    /// Distance at or below which the end-effector counts as touching (m).
    pub contact_threshold: f64,
    /// Standard deviation of the noise added to each recorded joint value (rad).
    pub q_noise_sd: f64,
    pub false_negative_rate: f64,
    pub false_positive_rate: f64,
    /// Spacing of recorded events along a slide (m).
    pub step_interval: f64,
    /// Longest slide (m).
    pub max_slide: f64,
    /// Step of the approach motion (m).
    pub descent_step: f64,
    /// Longest approach motion before the action counts as a miss (m).
    pub descent_budget: f64,
    /// Deepest press along the tool axis before contact counts as lost (m).
    pub max_press: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            contact_threshold: 0.002,
            q_noise_sd: 1e-3,
            false_negative_rate: 0.02,
            false_positive_rate: 0.02,
            step_interval: 0.01,
            max_slide: 0.15,
            descent_step: 0.001,
            descent_budget: 0.25,
            max_press: 0.02,
        }
    }
}

impl NoiseConfig {
    /// Noise-free settings with the default geometry.
    pub fn noiseless() -> Self {
        Self { q_noise_sd: 0.0, false_negative_rate: 0.0, false_positive_rate: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("contact_threshold", self.contact_threshold),
            ("step_interval", self.step_interval),
            ("descent_step", self.descent_step),
            ("max_press", self.max_press),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SimError::BadNoise { name, value });
            }
        }
        let non_negative =
            [("q_noise_sd", self.q_noise_sd), ("max_slide", self.max_slide), ("descent_budget", self.descent_budget)];
        for (name, value) in non_negative {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(SimError::BadNoise { name, value });
            }
        }
        for (name, value) in
            [("false_negative_rate", self.false_negative_rate), ("false_positive_rate", self.false_positive_rate)]
        {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::BadNoise { name, value });
            }
        }
        Ok(())
    }
}

/// Exact environment distance or a fine grid of it.
#[derive(Clone, Debug)]
pub enum TruthField {
    Exact(EnvironmentModel),
    Grid(SdfGrid),
}

impl DistanceField for TruthField {
    #[inline]
    fn distance(&self, p: &Vec3) -> f64 {
        match self {
            TruthField::Exact(env) => env.distance(p),
            TruthField::Grid(g) => g.query(p),
        }
    }
}

/// Meshes up to this many triangles are queried exactly; each query is
/// linear in the triangle count.
pub const EXACT_MESH_TRIANGLES: usize = 2000;

impl TruthField {
    /// Exact distance for primitive unions and small meshes; for meshes
    /// above [`EXACT_MESH_TRIANGLES`] a grid at `min(1 mm, filter_resolution / 2)`
    /// with `padding`.
    pub fn for_env(env: &EnvironmentModel, filter_resolution: f64, padding: f64) -> Result<Self, SimError> {
        match env.geometry() {
            Geometry::Primitives(_) => Ok(TruthField::Exact(env.clone())),
            Geometry::Mesh(m) if m.triangles().len() <= EXACT_MESH_TRIANGLES => Ok(TruthField::Exact(env.clone())),
            Geometry::Mesh(_) => {
                let res = 0.001f64.min(filter_resolution / 2.0);
                Ok(TruthField::Grid(SdfGrid::build(env, res, padding)?))
            }
        }
    }

    /// Resolution of the field; zero when exact.
    pub fn resolution(&self) -> f64 {
        match self {
            TruthField::Exact(_) => 0.0,
            TruthField::Grid(g) => g.resolution(),
        }
    }
}

/// The simulated world.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub true_pose: PoseSE3,
    pub truth: TruthField,
    /// End-effector model used for contact detection.
    pub cloud: EndEffectorCloud,
    pub noise: NoiseConfig,
    pub ik: IkParams,
}

/// Draws the true base pose: `x0 + U(−e, e)` per dimension.
pub fn draw_true_pose(x0: &Pose6, e: &[f64; 6], seed: u64) -> Result<Pose6, SimError> {
    if let Some((index, &value)) = e.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(SimError::BadInterval { index, value });
    }
    let mut rng = stream(seed, 0x74_7275_7468);
    let c = x0.to_array();
    let mut a = [0.0; 6];
    for k in 0..6 {
        a[k] = c[k] + uniform(&mut rng, -e[k], e[k]);
    }
    Ok(Pose6::from_array(a))
}

/// Where the true pose comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruePoseSpec {
    Fixed(Pose6),
    Random { x0: Pose6, e: [f64; 6] },
}

/// Builds a world for `env` with a true base pose from `spec`.
pub fn make_world(
    truth: TruthField,
    cloud: EndEffectorCloud,
    spec: &TruePoseSpec,
    noise: NoiseConfig,
    seed: u64,
) -> Result<WorldState, SimError> {
    noise.validate()?;
    let pose = match spec {
        TruePoseSpec::Fixed(p) => *p,
        TruePoseSpec::Random { x0, e } => draw_true_pose(x0, e, seed)?,
    };
    Ok(WorldState { true_pose: pose.to_se3(), truth, cloud, noise, ik: IkParams::default() })
}

/// Result of one executed action.
#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub observation: Observation,
    /// Whether the approach found the surface.
    pub touched: bool,
    /// Events recorded after touching (zero on a miss).
    pub slide_events: usize,
}

impl WorldState {
    /// True end-effector distance at a world pose.
    pub fn distance_at(&self, world_from_ee: &PoseSE3) -> f64 {
        cloud_distance(&self.truth, &self.cloud, world_from_ee)
    }

    fn contact_flag<R: RngCore + ?Sized>(&self, truth: bool, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        if truth {
            u >= self.noise.false_negative_rate
        } else {
            u < self.noise.false_positive_rate
        }
    }

    /// Joint configuration for a world pose, warm-started from `warm`.
    fn joints_for<R: RngCore + ?Sized>(
        &self,
        chain: &KinematicChain,
        world_from_ee: &PoseSE3,
        warm: &[f64],
        rng: &mut R,
    ) -> Result<Option<JointConfig>, SimError> {
        let target = IkTarget::Pose(self.true_pose.inverse().compose(world_from_ee));
        Ok(chain.inverse_reach(&target, Some(warm), &self.ik, rng)?.reached())
    }

    fn record<R: RngCore + ?Sized>(&self, q: &JointConfig, truth: bool, rng: &mut R) -> ContactEvent {
        let mut noisy = q.clone();
        if self.noise.q_noise_sd > 0.0 {
            for v in &mut noisy.0 {
                *v += self.noise.q_noise_sd * rng.standard_normal();
            }
        }
        ContactEvent { q: noisy, contact: self.contact_flag(truth, rng) }
    }

    /// Presses along `axis` until the distance lies in `[−threshold, 0]`.
    /// Returns `None` when that needs more than `max_press` of travel.
    fn settle(&self, pose: &PoseSE3, axis: &Vec3) -> Option<(PoseSE3, f64)> {
        let thr = self.noise.contact_threshold;
        let target = -0.5 * thr;
        let mut s = 0.0;
        for _ in 0..64 {
            let p = pose.with_translation(pose.translation() + axis * s);
            let d = self.distance_at(&p);
            if (-thr..=0.0).contains(&d) {
                return Some((p, d));
            }
            s += d - target;
            if s.abs() > self.noise.max_press {
                return None;
            }
        }
        None
    }

    /// Outward surface normal under the end-effector's closest point.
    fn surface_normal(&self, pose: &PoseSE3) -> Vec3 {
        let (_, p) = closest_cloud_point(&self.truth, &self.cloud, pose);
        self.truth.gradient(&p, 1e-4)
    }

    /// Runs an action from its approach configuration.
    pub fn execute_action<R: RngCore + ?Sized>(
        &self,
        selection: &Selection,
        chain: &KinematicChain,
        rng: &mut R,
    ) -> Result<Execution, SimError> {
        let nz = &self.noise;
        let start = self.true_pose.compose(&chain.forward(selection.approach.as_slice())?);
        let axis = start.rotation().column(2).into_owned();
        let at = |s: f64| start.with_translation(start.translation() + axis * s);

        // Back off first if the pre-touch pose is already touching.
        let mut s0 = 0.0;
        while self.distance_at(&at(s0)) <= nz.contact_threshold && -s0 < nz.descent_budget {
            s0 -= nz.descent_step;
        }
        let steps = math::floor(nz.descent_budget / nz.descent_step) as usize;
        let touch = (0..=steps)
            .map(|k| s0 + k as f64 * nz.descent_step)
            .find(|&s| self.distance_at(&at(s)) <= nz.contact_threshold);

        let mut events = Vec::new();
        let mut warm = selection.approach.clone();
        let Some(s_touch) = touch else {
            let n = math::floor(nz.descent_budget / nz.step_interval) as usize;
            for k in 0..=n {
                let pose = at(s0 + k as f64 * nz.step_interval);
                let Some(q) = self.joints_for(chain, &pose, warm.as_slice(), rng)? else { break };
                events.push(self.record(&q, self.distance_at(&pose) <= nz.contact_threshold, rng));
                warm = q;
            }
            return Ok(Execution { observation: Observation { events }, touched: false, slide_events: 0 });
        };

        let Some((mut pose, _)) = self.settle(&at(s_touch), &axis) else {
            return Ok(Execution { observation: Observation { events }, touched: true, slide_events: 0 });
        };
        let mut normal = self.surface_normal(&pose);
        let mut tangent = Vec3::zeros();
        for _ in 0..32 {
            let phi = uniform(rng, 0.0, math::TAU);
            let h = Vec3::new(math::cos(phi), math::sin(phi), 0.0);
            let t = h - normal * h.dot(&normal);
            if t.norm() > 1e-3 {
                tangent = t.normalize();
                break;
            }
        }
        let slide_steps = math::floor(nz.max_slide / nz.step_interval + 1e-9) as usize;
        for k in 0..=slide_steps {
            if k > 0 {
                let t = tangent - normal * tangent.dot(&normal);
                if t.norm() > 1e-9 {
                    tangent = t.normalize();
                }
                let moved = pose.with_translation(pose.translation() + tangent * nz.step_interval);
                match self.settle(&moved, &axis) {
                    Some((p, _)) => pose = p,
                    None => {
                        if let Some(q) = self.joints_for(chain, &moved, warm.as_slice(), rng)? {
                            events.push(self.record(&q, self.distance_at(&moved) <= nz.contact_threshold, rng));
                        }
                        break;
                    }
                }
                normal = self.surface_normal(&pose);
            }
            let Some(q) = self.joints_for(chain, &pose, warm.as_slice(), rng)? else { break };
            events.push(self.record(&q, true, rng));
            warm = q;
        }
        let slide_events = events.len();
        Ok(Execution { observation: Observation { events }, touched: true, slide_events })
    }
}

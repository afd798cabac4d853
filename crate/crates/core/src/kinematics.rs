//! Serial-chain forward kinematics and damped least squares inverse kinematics.
//!
//! Each joint is described by a fixed transform (parent frame to joint frame)
//! followed by the joint motion about/along a unit axis expressed in the
//! joint frame. A final `tool` transform maps the last joint frame to the
//! end-effector body frame.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix6};
use rand::RngCore;
use thiserror::Error;

use crate::math::PI;
use crate::rng::uniform;
use crate::se3::{angle_between, rotation_log, PoseSE3};
use crate::Vec3;

/// Unit-norm tolerance for joint axes.
pub const AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("a chain needs at least one joint")]
    NoJoints,
    #[error("joint {0} axis is not unit length")]
    AxisNotUnit(usize),
    #[error("joint bounds list has {got} entries for {dof} joints")]
    BoundsLength { got: usize, dof: usize },
    #[error("configuration has {got} values, chain has {dof} joints")]
    DimensionMismatch { got: usize, dof: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub axis: Vec3,
    pub kind: JointKind,
    /// Applied before the joint motion.
    pub fixed: PoseSE3,
}

impl JointSpec {
    pub fn revolute(axis: Vec3, fixed: PoseSE3) -> Self {
        Self { axis, kind: JointKind::Revolute, fixed }
    }

    pub fn prismatic(axis: Vec3, fixed: PoseSE3) -> Self {
        Self { axis, kind: JointKind::Prismatic, fixed }
    }

    #[inline]
    fn motion(&self, q: f64) -> PoseSE3 {
        match self.kind {
            JointKind::Revolute => PoseSE3::from_axis_angle(&self.axis, q),
            JointKind::Prismatic => PoseSE3::identity().with_translation(self.axis * q),
        }
    }
}

/// Joint positions (rad for revolute joints, m for prismatic ones).
#[derive(Clone, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    joints: Vec<JointSpec>,
    tool: PoseSE3,
    bounds: Option<Vec<(f64, f64)>>,
}

/// What the end-effector frame must reach.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IkTarget {
    /// Full pose.
    Pose(PoseSE3),
    /// Origin at `position` with the end-effector z-axis along `axis`; spin about it is free.
    PointAxis { position: Vec3, axis: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkParams {
    pub damping: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub position_tol: f64,
    pub orientation_tol: f64,
    /// Largest joint-space step per iteration (norm).
    pub max_step: f64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            damping: 1e-3,
            max_iterations: 200,
            restarts: 5,
            position_tol: 1e-4,
            orientation_tol: 1e-3,
            max_step: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum IkOutcome {
    Reached(JointConfig),
    Unreachable,
}

impl IkOutcome {
    pub fn reached(self) -> Option<JointConfig> {
        match self {
            IkOutcome::Reached(q) => Some(q),
            IkOutcome::Unreachable => None,
        }
    }
}

impl KinematicChain {
    pub fn new(joints: Vec<JointSpec>, tool: PoseSE3) -> Result<Self, KinematicsError> {
        if joints.is_empty() {
            return Err(KinematicsError::NoJoints);
        }
        for (i, j) in joints.iter().enumerate() {
            if (j.axis.norm() - 1.0).abs() > AXIS_TOL {
                return Err(KinematicsError::AxisNotUnit(i));
            }
        }
        Ok(Self { joints, tool, bounds: None })
    }

    /// Optional joint bounds, used to draw IK restarts and clamp iterates.
    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Result<Self, KinematicsError> {
        if bounds.len() != self.joints.len() {
            return Err(KinematicsError::BoundsLength { got: bounds.len(), dof: self.joints.len() });
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    /// Same joints with a different tool transform.
    pub fn with_tool(mut self, tool: PoseSE3) -> Self {
        self.tool = tool;
        self
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn tool(&self) -> &PoseSE3 {
        &self.tool
    }

    pub fn bounds(&self) -> Option<&[(f64, f64)]> {
        self.bounds.as_deref()
    }

    fn check_len(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.joints.len() {
            return Err(KinematicsError::DimensionMismatch { got: q.len(), dof: self.joints.len() });
        }
        Ok(())
    }

    /// Base-to-end-effector transform.
    pub fn forward(&self, q: &[f64]) -> Result<PoseSE3, KinematicsError> {
        self.check_len(q)?;
        Ok(self.forward_unchecked(q))
    }

    fn forward_unchecked(&self, q: &[f64]) -> PoseSE3 {
        let mut t = PoseSE3::identity();
        for (j, &qi) in self.joints.iter().zip(q) {
            t = t.compose(&j.fixed).compose(&j.motion(qi));
        }
        t.compose(&self.tool)
    }

    /// End-effector pose and the 6×N geometric Jacobian in the base frame
    /// (rows: linear velocity, then angular velocity).
    pub fn jacobian(&self, q: &[f64]) -> Result<(PoseSE3, DMatrix<f64>), KinematicsError> {
        self.check_len(q)?;
        Ok(self.jacobian_unchecked(q))
    }

    fn jacobian_unchecked(&self, q: &[f64]) -> (PoseSE3, DMatrix<f64>) {
        let n = self.joints.len();
        let mut axes = Vec::with_capacity(n);
        let mut t = PoseSE3::identity();
        for (j, &qi) in self.joints.iter().zip(q) {
            t = t.compose(&j.fixed);
            axes.push((t.transform_vector(&j.axis), *t.translation(), j.kind));
            t = t.compose(&j.motion(qi));
        }
        let ee = t.compose(&self.tool);
        let pe = *ee.translation();
        let mut jac = DMatrix::zeros(6, n);
        for (i, (z, o, kind)) in axes.into_iter().enumerate() {
            let (lin, ang) = match kind {
                JointKind::Revolute => (z.cross(&(pe - o)), z),
                JointKind::Prismatic => (z, Vec3::zeros()),
            };
            for r in 0..3 {
                jac[(r, i)] = lin[r];
                jac[(r + 3, i)] = ang[r];
            }
        }
        (ee, jac)
    }

    /// Upper bound on the distance from the base origin to the end-effector origin.
    pub fn reach_bound(&self) -> f64 {
        let mut r = self.tool.translation().norm();
        for (i, j) in self.joints.iter().enumerate() {
            r += j.fixed.translation().norm();
            if j.kind == JointKind::Prismatic {
                let travel = match &self.bounds {
                    Some(b) => b[i].0.abs().max(b[i].1.abs()),
                    None => f64::INFINITY,
                };
                r += travel;
            }
        }
        r
    }

    fn restart_range(&self, i: usize) -> (f64, f64) {
        match &self.bounds {
            Some(b) => b[i],
            None => match self.joints[i].kind {
                JointKind::Revolute => (-PI, PI),
                JointKind::Prismatic => (-0.5, 0.5),
            },
        }
    }

    /// Damped least squares IK with random restarts.
    ///
    /// The first attempt starts from `initial` (zeros when absent); up to
    /// `params.restarts` further attempts start from uniform draws inside the
    /// joint bounds. Success means the position error is within
    /// `position_tol` and the orientation error within `orientation_tol`.
    pub fn inverse_reach<R: RngCore + ?Sized>(
        &self,
        target: &IkTarget,
        initial: Option<&[f64]>,
        params: &IkParams,
        rng: &mut R,
    ) -> Result<IkOutcome, KinematicsError> {
        let n = self.dof();
        let mut q = match initial {
            Some(q0) => {
                self.check_len(q0)?;
                q0.to_vec()
            }
            None => vec![0.0; n],
        };
        for attempt in 0..=params.restarts {
            if attempt > 0 {
                for (i, qi) in q.iter_mut().enumerate() {
                    let (lo, hi) = self.restart_range(i);
                    *qi = uniform(rng, lo, hi);
                }
            }
            if self.solve_from(&mut q, target, params) {
                return Ok(IkOutcome::Reached(JointConfig(q)));
            }
        }
        Ok(IkOutcome::Unreachable)
    }

    fn target_error(&self, ee: &PoseSE3, target: &IkTarget) -> ([f64; 6], f64, f64) {
        let (pos, rot_err, ang) = match target {
            IkTarget::Pose(t) => {
                let r = t.rotation() * ee.rotation().transpose();
                let w = rotation_log(&r);
                (*t.translation(), w, w.norm())
            }
            IkTarget::PointAxis { position, axis } => {
                let z = ee.rotation().column(2).into_owned();
                let a = axis.normalize();
                let ang = angle_between(&z, &a);
                let mut w = z.cross(&a);
                let s = w.norm();
                if s > 1e-12 {
                    w *= ang / s;
                } else if ang > PI / 2.0 {
                    // Anti-parallel: rotate about any axis perpendicular to z.
                    let perp = ee.rotation().column(0).into_owned();
                    w = perp * ang;
                }
                (*position, w, ang)
            }
        };
        let dp = pos - ee.translation();
        ([dp.x, dp.y, dp.z, rot_err.x, rot_err.y, rot_err.z], dp.norm(), ang)
    }

    fn solve_from(&self, q: &mut [f64], target: &IkTarget, params: &IkParams) -> bool {
        let lambda2 = params.damping * params.damping;
        for _ in 0..params.max_iterations {
            let (ee, jac) = self.jacobian_unchecked(q);
            let (e, dp, da) = self.target_error(&ee, target);
            if dp <= params.position_tol && da <= params.orientation_tol {
                return true;
            }
            let jjt: Matrix6<f64> = {
                let m = &jac * jac.transpose();
                Matrix6::from_fn(|r, c| m[(r, c)] + if r == c { lambda2 } else { 0.0 })
            };
            let Some(chol) = jjt.cholesky() else {
                return false;
            };
            let y = chol.solve(&nalgebra::Vector6::from_row_slice(&e));
            let dq: DVector<f64> = jac.transpose() * DVector::from_row_slice(y.as_slice());
            let norm = dq.norm();
            let scale = if norm > params.max_step { params.max_step / norm } else { 1.0 };
            for (i, qi) in q.iter_mut().enumerate() {
                *qi += dq[i] * scale;
                if let Some(b) = &self.bounds {
                    *qi = qi.clamp(b[i].0, b[i].1);
                }
            }
        }
        let ee = self.forward_unchecked(q);
        let (_, dp, da) = self.target_error(&ee, target);
        dp <= params.position_tol && da <= params.orientation_tol
    }
}

/// Ready-made chains.
pub mod presets {
    use super::*;
    use crate::se3::Pose6;

    /// Planar arm with two revolute joints about z and link lengths `l1`, `l2` along x.
    pub fn planar_two_link(l1: f64, l2: f64) -> KinematicChain {
        let z = Vec3::z();
        KinematicChain::new(
            vec![
                JointSpec::revolute(z, PoseSE3::identity()),
                JointSpec::revolute(z, PoseSE3::from_translation(l1, 0.0, 0.0)),
            ],
            PoseSE3::from_translation(l2, 0.0, 0.0),
        )
        .expect("valid chain")
    }

    /// Modified-DH rows `(a, d, alpha)` of a 7-DoF Franka-Panda-like arm, plus the flange offset.
    pub const FRANKA_DH: [(f64, f64, f64); 7] = [
        (0.0, 0.333, 0.0),
        (0.0, 0.0, -PI / 2.0),
        (0.0, 0.316, PI / 2.0),
        (0.0825, 0.0, PI / 2.0),
        (-0.0825, 0.384, -PI / 2.0),
        (0.0, 0.0, PI / 2.0),
        (0.088, 0.0, PI / 2.0),
    ];
    pub const FRANKA_FLANGE: f64 = 0.107;
    pub const FRANKA_LIMITS: [(f64, f64); 7] = [
        (-2.8973, 2.8973),
        (-1.7628, 1.7628),
        (-2.8973, 2.8973),
        (-3.0718, -0.0698),
        (-2.8973, 2.8973),
        (-0.0175, 3.7525),
        (-2.8973, 2.8973),
    ];

    /// Fixed transform of one modified-DH row, `RotX(alpha) · Trans(a, 0, d)`, as a [`Pose6`].
    pub fn dh_fixed(a: f64, d: f64, alpha: f64) -> Pose6 {
        let (s, c) = (crate::math::sin(alpha), crate::math::cos(alpha));
        Pose6::new(a, -s * d, c * d, alpha, 0.0, 0.0)
    }

    /// 7-DoF Franka-like arm with its joint limits; the end-effector frame is the flange.
    pub fn franka_like() -> KinematicChain {
        let joints = FRANKA_DH
            .iter()
            .map(|&(a, d, alpha)| JointSpec::revolute(Vec3::z(), dh_fixed(a, d, alpha).to_se3()))
            .collect();
        KinematicChain::new(joints, PoseSE3::from_translation(0.0, 0.0, FRANKA_FLANGE))
            .and_then(|c| c.with_bounds(FRANKA_LIMITS.to_vec()))
            .expect("valid chain")
    }
}

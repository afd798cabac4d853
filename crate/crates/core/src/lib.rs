//! Contact-based self-calibration of a robot base pose.
//!
//! A particle filter over SE(3) hypotheses of the robot base is driven by
//! binary contact events collected while the robot touches and slides along a
//! known environment. Hypothesized end-effector/environment distances are read
//! from a voxelized signed distance field, actions are picked to cover
//! unexplored surface orientations, and three self-assessed criteria decide
//! when the estimate has converged.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature enables
//! rayon-backed data parallelism for weight evaluation and grid building;
//! results are bit-identical with or without it.
//!
//! Module map:
//!
//! - [`se3`]: poses, 6-vector conversions, weighted statistics, perturbation.
//! - [`kinematics`]: serial-chain forward kinematics and damped least squares IK.
//! - [`geometry`]: primitives, meshes, SDF grids, end-effector point clouds.
//! - [`action`]: contact candidates, local sparsity and action selection.
//! - [`filter`]: particle set propagation, weighting, resampling, estimation.
//! - [`convergence`]: confidence/stability/consistency criteria, adaptive spreading.
//! - [`sim`]: ground-truth world that executes touch-and-slide actions.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod action;
pub mod convergence;
pub mod filter;
pub mod geometry;
pub mod kinematics;
mod math;
pub mod rng;
pub mod se3;
pub mod sim;

pub use nalgebra::{Matrix3, Vector3};

/// 3-vector in meters unless stated otherwise.
pub type Vec3 = Vector3<f64>;
/// 3×3 matrix.
pub type Mat3 = Matrix3<f64>;

/// Serializes a [`Vec3`] as a `[x, y, z]` array.
#[cfg(feature = "serde")]
pub mod vec3_array {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::Vec3;

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(x, y, z))
    }
}

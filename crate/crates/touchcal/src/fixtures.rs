//! Built-in worlds, robots and end-effector models.

use touchcal_core::geometry::{EnvironmentModel, GeometryError, Segment, SegmentParts, Solid};
use touchcal_core::kinematics::{presets, KinematicChain};
use touchcal_core::se3::{Pose6, PoseSE3};
use touchcal_core::Vec3;

/// Table standing on the floor, centered on the world origin.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableSpec {
    /// Overall width (x), depth (y) and height (z), m.
    pub size: [f64; 3],
    pub top_thickness: f64,
    /// Square leg side, m.
    pub leg: f64,
    /// Leg inset from the top's edges, m.
    pub leg_inset: f64,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self { size: [1.2, 0.8, 0.7], top_thickness: 0.04, leg: 0.05, leg_inset: 0.03 }
    }
}

/// A table as five box segments: the top and four legs.
pub fn box_table(spec: &TableSpec) -> Result<EnvironmentModel, GeometryError> {
    let [w, d, h] = spec.size;
    let t = spec.top_thickness;
    let mut solids = vec![Solid::cuboid(Vec3::new(w, d, t), PoseSE3::from_translation(0.0, 0.0, h - t / 2.0))];
    let leg_h = h - t;
    let dx = w / 2.0 - spec.leg_inset - spec.leg / 2.0;
    let dy = d / 2.0 - spec.leg_inset - spec.leg / 2.0;
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        solids.push(Solid::cuboid(
            Vec3::new(spec.leg, spec.leg, leg_h),
            PoseSE3::from_translation(sx * dx, sy * dy, leg_h / 2.0),
        ));
    }
    let names = ["top", "leg-front-left", "leg-front-right", "leg-back-left", "leg-back-right"];
    let segments = names
        .iter()
        .enumerate()
        .map(|(i, n)| Segment { name: n.to_string(), parts: SegmentParts::Solids(vec![i]) })
        .collect();
    EnvironmentModel::new(touchcal_core::geometry::Geometry::Primitives(solids), segments)
}

/// Distance from the flange to the fingertips of [`gripper`], m.
pub const GRIPPER_LENGTH: f64 = 0.12;

/// Parallel gripper in its own frame: fingertips at the origin, body along −z.
pub fn gripper() -> Vec<Solid> {
    vec![
        Solid::cuboid(Vec3::new(0.02, 0.015, 0.05), PoseSE3::from_translation(0.025, 0.0, -0.025)),
        Solid::cuboid(Vec3::new(0.02, 0.015, 0.05), PoseSE3::from_translation(-0.025, 0.0, -0.025)),
        Solid::cuboid(Vec3::new(0.09, 0.03, 0.02), PoseSE3::from_translation(0.0, 0.0, -0.06)),
        Solid::cylinder(0.035, 0.05, PoseSE3::from_translation(0.0, 0.0, -0.095)),
    ]
}

/// Franka-like arm whose end-effector frame sits at the fingertips.
pub fn franka_with_gripper() -> KinematicChain {
    presets::franka_like().with_tool(PoseSE3::from_translation(0.0, 0.0, presets::FRANKA_FLANGE + GRIPPER_LENGTH))
}

/// A comfortable ready configuration, used as the first IK guess.
pub const FRANKA_READY: [f64; 7] = [0.0, -0.3, 0.0, -2.2, 0.0, 2.0, 0.785];

/// Nominal base pose beside the table's front edge, facing +y.
pub fn nominal_base() -> Pose6 {
    Pose6::new(0.0, -0.75, 0.45, 0.0, 0.0, core::f64::consts::FRAC_PI_2)
}

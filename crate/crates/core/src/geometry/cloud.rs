use alloc::vec::Vec;

use super::surface::{sample_patches, solid_patches, PatchSource};
use super::{DistanceField, GeometryError, Solid, HIDDEN_TOL};
use crate::rng::stream;
use crate::se3::PoseSE3;
use crate::Vec3;

/// End-effector surface points in the end-effector body frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EndEffectorCloud {
    points: Vec<Vec3>,
}

impl EndEffectorCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest distance of a point from the body-frame origin.
    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// Samples `count` points uniformly by area over the visible surface of a
/// union of solids given in the end-effector frame. Deterministic in `seed`.
pub fn sample_cloud(model: &[Solid], count: usize, seed: u64) -> Result<EndEffectorCloud, GeometryError> {
    if count == 0 {
        return Err(GeometryError::EmptyCloud);
    }
    if model.is_empty() {
        return Err(GeometryError::NoSolids);
    }
    let mut patches = Vec::new();
    for (i, s) in model.iter().enumerate() {
        solid_patches(i, s, &mut patches);
    }
    let source = PatchSource::Solids(model);
    let mut rng = stream(seed, 0x63_6c6f_7564);
    let hidden = |p: &Vec3| {
        let mut touching = 0;
        for s in model {
            let d = s.sdf(p);
            if d < -HIDDEN_TOL {
                return true;
            }
            if d <= HIDDEN_TOL {
                touching += 1;
            }
        }
        touching >= 2
    };
    let samples =
        sample_patches(&source, &patches, count, &mut rng, |p, _| !hidden(p)).ok_or(GeometryError::SamplingFailed)?;
    EndEffectorCloud::new(samples.into_iter().map(|(p, _)| p).collect())
}

/// Minimum signed distance over the cloud placed at `world_from_ee`.
#[inline]
pub fn cloud_distance<F: DistanceField + ?Sized>(field: &F, cloud: &EndEffectorCloud, world_from_ee: &PoseSE3) -> f64 {
    let mut best = f64::INFINITY;
    for p in cloud.points() {
        let d = field.distance(&world_from_ee.transform_point(p));
        if d < best {
            best = d;
        }
    }
    best
}

/// As [`cloud_distance`], also returning the world position of the closest point.
pub fn closest_cloud_point<F: DistanceField + ?Sized>(
    field: &F,
    cloud: &EndEffectorCloud,
    world_from_ee: &PoseSE3,
) -> (f64, Vec3) {
    let mut best = (f64::INFINITY, Vec3::zeros());
    for p in cloud.points() {
        let w = world_from_ee.transform_point(p);
        let d = field.distance(&w);
        if d < best.0 {
            best = (d, w);
        }
    }
    best
}

/// Hypothesized end-effector/environment distance for a base pose and a
/// base-to-end-effector transform: `min_l field(base · ee · p_l)`.
#[inline]
pub fn hypothesized_distance<F: DistanceField + ?Sized>(
    field: &F,
    cloud: &EndEffectorCloud,
    base_pose: &PoseSE3,
    ee_transform: &PoseSE3,
) -> f64 {
    cloud_distance(field, cloud, &base_pose.compose(ee_transform))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sdf, EnvironmentModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_point_on_sphere() {
        let c = sample_cloud(&[Solid::sphere(0.04, PoseSE3::identity())], 1, 3).unwrap();
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c.points()[0].norm(), 0.04, epsilon = 1e-9);
    }

    #[test]
    fn cube_faces_share_points_evenly() {
        let n = 10_000;
        let c = sample_cloud(&[Solid::cuboid(Vec3::repeat(1.0), PoseSE3::identity())], n, 17).unwrap();
        let mut counts = [0usize; 6];
        for p in c.points() {
            let axis = (0..3).max_by(|&a, &b| p[a].abs().partial_cmp(&p[b].abs()).unwrap()).unwrap();
            counts[2 * axis + usize::from(p[axis] > 0.0)] += 1;
        }
        let expected = n as f64 / 6.0;
        for k in counts {
            assert!((k as f64 - expected).abs() <= 0.05 * expected, "{counts:?}");
        }
    }

    #[test]
    fn deterministic_and_on_surface() {
        let model = [
            Solid::cylinder(0.03, 0.06, PoseSE3::from_translation(0.0, 0.0, 0.03)),
            Solid::cuboid(Vec3::new(0.05, 0.02, 0.04), PoseSE3::from_translation(0.0, 0.0, 0.08)),
        ];
        let a = sample_cloud(&model, 300, 5).unwrap();
        let b = sample_cloud(&model, 300, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_cloud(&model, 300, 6).unwrap());
        for p in a.points() {
            assert!(model[..].distance(p).abs() <= 1e-6);
        }
        assert_eq!(sample_cloud(&model, 0, 5), Err(GeometryError::EmptyCloud));
    }

    fn table_grid() -> (EnvironmentModel, crate::geometry::SdfGrid) {
        // Slab whose top face is the plane z = 0.
        let env = EnvironmentModel::from_solids(alloc::vec![Solid::cuboid(
            Vec3::new(1.0, 1.0, 0.1),
            PoseSE3::from_translation(0.0, 0.0, -0.05)
        )])
        .unwrap();
        let g = build_sdf(&env, 0.005, 0.3).unwrap();
        (env, g)
    }

    #[test]
    fn hypothesized_distance_examples() {
        let (_, g) = table_grid();
        let res = g.resolution();
        let cloud = EndEffectorCloud::new(alloc::vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.02, 0.0, 0.01),
            Vec3::new(-0.01, 0.03, 0.05),
        ])
        .unwrap();
        let ee = PoseSE3::from_translation(0.1, -0.05, 0.0);

        let above = PoseSE3::from_translation(0.0, 0.0, 0.1);
        let d = hypothesized_distance(&g, &cloud, &above, &ee);
        assert!((d - 0.1).abs() <= res, "{d}");

        let touching = PoseSE3::identity();
        assert!(hypothesized_distance(&g, &cloud, &touching, &ee).abs() <= res);

        let sunk = PoseSE3::from_translation(0.0, 0.0, -0.02);
        let d = hypothesized_distance(&g, &cloud, &sunk, &ee);
        assert!((d + 0.02).abs() <= res, "{d}");
    }

    #[test]
    fn subset_never_lowers_minimum() {
        let (_, g) = table_grid();
        let pts: Vec<Vec3> = (0..20).map(|i| Vec3::new(0.01 * i as f64, 0.0, 0.003 * (i % 7) as f64)).collect();
        let full = EndEffectorCloud::new(pts.clone()).unwrap();
        let base = PoseSE3::from_translation(0.0, 0.0, 0.01);
        let d_full = hypothesized_distance(&g, &full, &base, &PoseSE3::identity());
        for k in 1..pts.len() {
            let sub = EndEffectorCloud::new(pts[k..].to_vec()).unwrap();
            assert!(hypothesized_distance(&g, &sub, &base, &PoseSE3::identity()) >= d_full);
        }
    }
}

//! Everything a run needs besides the seed: environment, robot, end-effector
//! clouds and distance fields.

use touchcal_core::geometry::{
    sample_cloud, EndEffectorCloud, EnvironmentModel, SdfGrid, Segment, SegmentParts, Solid,
};
use touchcal_core::kinematics::KinematicChain;
use touchcal_core::rng::derive_seed;
use touchcal_core::sim::TruthField;
use touchcal_core::Vec3;

use crate::config::{EnvConfig, ExperimentConfig, ShapeKind, SolidConfig};
use crate::{fixtures, mesh_io, Error};

pub fn build_env(cfg: &EnvConfig) -> Result<EnvironmentModel, Error> {
    match cfg {
        EnvConfig::BoxTable { table } => Ok(fixtures::box_table(table)?),
        EnvConfig::Primitives { solids } => {
            let built = solids.iter().map(solid).collect::<Result<Vec<_>, _>>()?;
            let mut segments: Vec<Segment> = Vec::new();
            for (i, s) in solids.iter().enumerate() {
                let name = s.segment.clone().unwrap_or_else(|| format!("solid-{i}"));
                match segments.iter_mut().find(|g| g.name == name) {
                    Some(Segment { parts: SegmentParts::Solids(ids), .. }) => ids.push(i),
                    _ => segments.push(Segment { name, parts: SegmentParts::Solids(vec![i]) }),
                }
            }
            Ok(EnvironmentModel::new(touchcal_core::geometry::Geometry::Primitives(built), segments)?)
        }
        EnvConfig::Mesh { path, segments } => {
            let mesh = mesh_io::load_mesh(path)?;
            let segments = segments
                .iter()
                .map(|s| Segment { name: s.name.clone(), parts: SegmentParts::Triangles(s.triangles.clone()) })
                .collect();
            Ok(EnvironmentModel::from_mesh(mesh, segments)?)
        }
    }
}

fn solid(s: &SolidConfig) -> Result<Solid, Error> {
    let pose = s.pose.to_se3();
    let wrong = |n: usize| Error::Config(format!("{:?} needs {n} size values, got {}", s.shape, s.size.len()));
    Ok(match s.shape {
        ShapeKind::Box => match s.size[..] {
            [x, y, z] => Solid::cuboid(Vec3::new(x, y, z), pose),
            _ => return Err(wrong(3)),
        },
        ShapeKind::Sphere => match s.size[..] {
            [r] => Solid::sphere(r, pose),
            _ => return Err(wrong(1)),
        },
        ShapeKind::Cylinder => match s.size[..] {
            [r, h] => Solid::cylinder(r, h, pose),
            _ => return Err(wrong(2)),
        },
    })
}

/// Static inputs shared by every seed of one configuration.
#[derive(Clone, Debug)]
pub struct Scene {
    pub env: EnvironmentModel,
    pub chain: KinematicChain,
    /// Cloud the filter uses (`L` points).
    pub cloud: EndEffectorCloud,
    /// Denser cloud the simulator uses.
    pub truth_cloud: EndEffectorCloud,
    /// Filter-side distance grid `Φ_O`.
    pub grid: SdfGrid,
    pub truth: TruthField,
}

impl Scene {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, Error> {
        let env = build_env(&cfg.env)?;
        let grid = SdfGrid::build(&env, cfg.filter.resolution, cfg.filter.padding)?;
        Self::with_grid(cfg, env, grid)
    }

    /// Uses a prebuilt filter grid, for example one loaded from a cache file.
    pub fn with_grid(cfg: &ExperimentConfig, env: EnvironmentModel, grid: SdfGrid) -> Result<Self, Error> {
        let grid = grid.with_interpolation(cfg.filter.interpolation);
        let model = fixtures::gripper();
        let cloud = sample_cloud(&model, cfg.end_effector.points, derive_seed(cfg.end_effector.seed, 1))?;
        let truth_cloud = sample_cloud(&model, cfg.end_effector.truth_points, derive_seed(cfg.end_effector.seed, 2))?;
        let truth = TruthField::for_env(&env, grid.resolution(), cfg.filter.padding)?;
        Ok(Self { env, chain: fixtures::franka_with_gripper(), cloud, truth_cloud, grid, truth })
    }
}

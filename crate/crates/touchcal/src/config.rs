//! Experiment configuration (TOML) with dotted-path overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use touchcal_core::action::TieBreak;
use touchcal_core::convergence::CriteriaConfig;
use touchcal_core::filter::{FilterParams, Likelihood};
use touchcal_core::geometry::Interpolation;
use touchcal_core::se3::Pose6;
use touchcal_core::sim::NoiseConfig;

use crate::fixtures::{self, TableSpec};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    /// Five-box table from [`fixtures::box_table`].
    BoxTable {
        #[serde(default)]
        table: TableSpec,
    },
    /// Union of primitives; solids sharing a `segment` name form one segment.
    Primitives { solids: Vec<SolidConfig> },
    /// Closed triangle mesh (STL or OBJ).
    Mesh {
        path: PathBuf,
        /// Triangle index lists; one segment over the whole mesh when empty.
        #[serde(default)]
        segments: Vec<MeshSegmentConfig>,
    },
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::BoxTable { table: TableSpec::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Box,
    Sphere,
    Cylinder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolidConfig {
    pub shape: ShapeKind,
    /// Box: full sizes `[x, y, z]`; sphere: `[radius]`; cylinder: `[radius, height]`.
    pub size: Vec<f64>,
    #[serde(default)]
    pub pose: Pose6,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSegmentConfig {
    pub name: String,
    pub triangles: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    /// Nominal base pose `X_0` in the world frame.
    pub base: Pose6,
    /// First IK guess for action selection.
    pub home: Vec<f64>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self { base: fixtures::nominal_base(), home: fixtures::FRANKA_READY.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndEffectorConfig {
    /// Size `L` of the cloud the filter uses.
    pub points: usize,
    /// Size of the denser cloud the simulator uses for contact detection.
    pub truth_points: usize,
    pub seed: u64,
}

impl Default for EndEffectorConfig {
    fn default() -> Self {
        Self { points: 600, truth_points: 2000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Half-width of the uniform initial error per dimension (m, rad).
    pub error: [f64; 6],
    /// Fixed true base pose; drawn from `base ± error` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_pose: Option<Pose6>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { error: [0.1; 6], true_pose: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub sigma_p: f64,
    pub delta_p: f64,
    pub epsilon: f64,
    pub particles: usize,
    pub sigma_0: f64,
    pub motion_scale: [f64; 6],
    pub likelihood: Likelihood,
    /// SDF voxel size `Δ_sdf`, m.
    pub resolution: f64,
    /// Margin around the environment covered by the grid, m.
    pub padding: f64,
    pub interpolation: Interpolation,
    /// Half-width of the initial particle box; `world.error` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_spread: Option<[f64; 6]>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = FilterParams::default();
        Self {
            sigma_p: p.sigma_p,
            delta_p: p.delta_p,
            epsilon: p.epsilon,
            particles: p.particles,
            sigma_0: p.sigma_0,
            motion_scale: p.motion_scale,
            likelihood: p.likelihood,
            resolution: 0.002,
            padding: 0.1,
            interpolation: Interpolation::Nearest,
            init_spread: None,
        }
    }
}

impl FilterConfig {
    pub fn params(&self) -> FilterParams {
        FilterParams {
            sigma_p: self.sigma_p,
            delta_p: self.delta_p,
            epsilon: self.epsilon,
            particles: self.particles,
            sigma_0: self.sigma_0,
            motion_scale: self.motion_scale,
            likelihood: self.likelihood,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionConfig {
    /// Total number of contact candidates `D`.
    pub candidates: usize,
    pub p_switch: f64,
    pub pretouch_offset: f64,
    /// Order among equally sparse candidates. On box worlds nearly every
    /// candidate ties once each face normal has been touched, and index
    /// order would return to the same point of each segment every time.
    pub tie_break: TieBreak,
}

impl Default for ActionConfig {
    fn default() -> Self {
        Self { candidates: 1000, p_switch: 0.1, pretouch_offset: 0.03, tie_break: TieBreak::Random }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
    /// Worker threads; rayon's default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// A run stops as failed after this many consecutive degenerate weight updates.
    pub max_degenerate_streak: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seeds: vec![42], max_iterations: 80, threads: None, max_degenerate_streak: 10 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub robot: RobotConfig,
    pub end_effector: EndEffectorConfig,
    pub world: WorldConfig,
    pub noise: NoiseConfig,
    pub filter: FilterConfig,
    pub criteria: CriteriaConfig,
    pub action: ActionConfig,
    pub experiment: RunConfig,
    /// Dotted parameter path to the list of values it takes.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, Error> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (path, raw) = parse_override(o)?;
            set_path(&mut value, &path, raw)?;
        }
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        // Mesh paths are relative to the config file.
        if let EnvConfig::Mesh { path: mesh, .. } = &mut cfg.env {
            if mesh.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh = dir.join(&*mesh);
                }
            }
        }
        Ok(cfg)
    }

    /// Copy with `path = value` pairs applied.
    pub fn with_overrides(&self, pairs: &[(String, toml::Value)]) -> Result<Self, Error> {
        let mut value = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (path, v) in pairs {
            set_path(&mut value, path, v.clone())?;
        }
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.experiment.seeds.is_empty() {
            return bad("experiment.seeds must not be empty".into());
        }
        if self.experiment.max_iterations == 0 {
            return bad("experiment.max_iterations must be at least 1".into());
        }
        if self.filter.particles == 0 {
            return bad("filter.particles must be at least 1".into());
        }
        for (name, v) in [
            ("filter.sigma_p", self.filter.sigma_p),
            ("filter.delta_p", self.filter.delta_p),
            ("filter.sigma_0", self.filter.sigma_0),
        ] {
            if v.is_nan() || v <= 0.0 {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.filter.epsilon > 0.0 && self.filter.epsilon < 1.0) {
            return bad(format!("filter.epsilon must lie in (0, 1), got {}", self.filter.epsilon));
        }
        if self.action.candidates == 0 {
            return bad("action.candidates must be at least 1".into());
        }
        if self.end_effector.points == 0 || self.end_effector.truth_points == 0 {
            return bad("end_effector point counts must be at least 1".into());
        }
        if self.robot.home.len() != 7 {
            return bad(format!("robot.home needs 7 joint values, got {}", self.robot.home.len()));
        }
        self.criteria.validate().map_err(|e| Error::Config(format!("criteria: {e}")))?;
        self.noise.validate().map_err(|e| Error::Config(format!("noise: {e}")))?;
        Ok(())
    }

    /// Cartesian product of the sweep grid, keys in sorted order. A config
    /// without a sweep has one empty cell.
    pub fn sweep_cells(&self) -> Vec<Vec<(String, toml::Value)>> {
        let mut cells = vec![Vec::new()];
        for (key, values) in &self.sweep {
            let mut next = Vec::with_capacity(cells.len() * values.len());
            for cell in &cells {
                for v in values {
                    let mut c = cell.clone();
                    c.push((key.clone(), v.clone()));
                    next.push(c);
                }
            }
            cells = next;
        }
        cells
    }

    pub fn init_spread(&self) -> [f64; 6] {
        self.filter.init_spread.unwrap_or(self.world.error)
    }

    /// Configuration used by the convergence and sweep criteria: the box
    /// table with `M = 10 000`, `Δ_sdf = 5 mm`, `L = 200`, `σ_P = 5 mm` and
    /// an initial error of ±10 cm / ±0.1 rad.
    pub fn desk_scale() -> Self {
        let mut cfg = Self::default();
        cfg.filter.particles = 10_000;
        cfg.filter.resolution = 0.005;
        cfg.filter.sigma_p = 0.005;
        cfg.end_effector.points = 200;
        cfg.world.error = [0.1; 6];
        cfg.experiment.max_iterations = 60;
        cfg
    }
}

fn parse_override(s: &str) -> Result<(String, toml::Value), Error> {
    let (path, raw) = s.split_once('=').ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path.trim().to_string(), value))
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), Error> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|p| !p.is_empty()).ok_or_else(|| Error::Config(format!("empty key in `{path}`")))?;
    let mut node = root;
    for p in parts {
        let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("`{path}`: `{p}` is not a table")))?;
        node = table.entry(p).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("`{path}` does not name a table entry")))?;
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.criteria, CriteriaConfig::default());
        assert_eq!(cfg.filter.params(), FilterParams::default());
    }

    #[test]
    fn overrides_reach_leaves() {
        let cfg = ExperimentConfig::from_toml_str(
            "[filter]\nsigma_p = 0.01\n",
            &["filter.sigma_p=0.002".into(), "experiment.seeds=[1,2,3]".into(), "filter.likelihood=as-printed".into()],
        )
        .unwrap();
        assert_eq!(cfg.filter.sigma_p, 0.002);
        assert_eq!(cfg.experiment.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.filter.likelihood, Likelihood::AsPrinted);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[filter]\nsigma = 1.0\n", &[]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["filter.bogus=1".into()]).is_err());
        assert!(ExperimentConfig::from_toml_str("", &["experiment.seeds=[]".into()]).is_err());
    }

    #[test]
    fn sweep_product() {
        let cfg = ExperimentConfig::from_toml_str(
            "[sweep]\n\"filter.resolution\" = [0.005, 0.02]\n\"filter.sigma_p\" = [0.001, 0.005, 0.02]\n",
            &[],
        )
        .unwrap();
        let cells = cfg.sweep_cells();
        assert_eq!(cells.len(), 6);
        let c = cfg.with_overrides(&cells[5]).unwrap();
        assert_eq!(c.filter.resolution, 0.02);
        assert_eq!(c.filter.sigma_p, 0.02);
        assert_eq!(ExperimentConfig::default().sweep_cells(), vec![Vec::new()]);
    }

    #[test]
    fn primitives_env_parses() {
        let text = r#"
            [env]
            kind = "primitives"
            solids = [
                { shape = "box", size = [1.0, 1.0, 0.1], pose = [0, 0, 0.05, 0, 0, 0], segment = "slab" },
                { shape = "sphere", size = [0.1] },
            ]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
        let EnvConfig::Primitives { solids } = cfg.env else { panic!() };
        assert_eq!(solids.len(), 2);
        assert_eq!(solids[0].segment.as_deref(), Some("slab"));
    }
}

use std::path::PathBuf;

use touchcal::config::EnvConfig;
use touchcal::scene::build_env;
use touchcal::ExperimentConfig;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn shipped_configs_load_and_build() {
    let mut seen = 0;
    for entry in std::fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let env = build_env(&cfg.env).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(!env.segments().is_empty());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn desk_scale_file_matches_preset() {
    let cfg = ExperimentConfig::load(&config_dir().join("desk_scale.toml"), &[]).unwrap();
    let preset = ExperimentConfig::desk_scale();
    assert_eq!(cfg.filter, preset.filter);
    assert_eq!(cfg.world, preset.world);
    assert_eq!(cfg.end_effector, preset.end_effector);
    assert_eq!(cfg.criteria, preset.criteria);
    assert_eq!(cfg.experiment.seeds, (0..20).collect::<Vec<u64>>());
    assert_eq!(cfg.experiment.max_iterations, 60);
}

#[test]
fn sweep_grid_counts() {
    let cfg = ExperimentConfig::load(&config_dir().join("sweep_resolution.toml"), &[]).unwrap();
    let cells = cfg.sweep_cells();
    assert_eq!(cells.len(), 3);
    assert_eq!(cells.len() * cfg.experiment.seeds.len(), 15);
    let res: Vec<f64> = cells.iter().map(|c| cfg.with_overrides(c).unwrap().filter.resolution).collect();
    assert_eq!(res, vec![0.02, 0.005, 0.002]);
}

#[test]
fn two_cell_grid_with_five_seeds() {
    let text = "[experiment]\nseeds = [1, 2, 3, 4, 5]\n[sweep]\n\"filter.resolution\" = [0.005, 0.02]\n";
    let cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
    assert_eq!(cfg.sweep_cells().len() * cfg.experiment.seeds.len(), 10);
    assert_eq!(cfg.sweep_cells().len(), 2);
}

#[test]
fn command_line_overrides_win() {
    let path = config_dir().join("desk_scale.toml");
    let cfg = ExperimentConfig::load(
        &path,
        &["filter.sigma_p=0.02".into(), "experiment.seeds=[7]".into(), "action.tie_break=\"index\"".into()],
    )
    .unwrap();
    assert_eq!(cfg.filter.sigma_p, 0.02);
    assert_eq!(cfg.experiment.seeds, vec![7]);
    assert!(ExperimentConfig::load(&path, &["filter.no_such_knob=1".into()]).is_err());
    assert!(ExperimentConfig::load(&path, &["experiment.seeds=[]".into()]).is_err());
    assert!(ExperimentConfig::load(&path, &["experiment.max_iterations=0".into()]).is_err());
}

#[test]
fn mesh_path_is_relative_to_the_config() {
    let cfg = ExperimentConfig::load(&config_dir().join("step_block.toml"), &[]).unwrap();
    match &cfg.env {
        EnvConfig::Mesh { path, segments } => {
            assert!(path.exists());
            assert_eq!(segments.len(), 6);
        }
        other => panic!("expected a mesh, got {other:?}"),
    }
}

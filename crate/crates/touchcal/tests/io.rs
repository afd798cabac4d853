use std::path::PathBuf;

use touchcal::mesh_io::{load_mesh, write_stl};
use touchcal::sdf_cache::{read_grid, write_grid};
use touchcal::trace::{read_jsonl, JsonlWriter};
use touchcal::Error;
use touchcal_core::geometry::{box_mesh, build_sdf, DistanceField, EnvironmentModel, Solid};
use touchcal_core::se3::PoseSE3;
use touchcal_core::Vec3;

fn step_block() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/step_block.obj")
}

#[test]
fn sdf_cache_roundtrip() {
    let env = EnvironmentModel::from_solids(vec![
        Solid::cuboid(Vec3::new(0.4, 0.3, 0.2), PoseSE3::from_translation(0.1, 0.0, 0.1)),
        Solid::sphere(0.1, PoseSE3::from_translation(-0.2, 0.1, 0.3)),
    ])
    .unwrap();
    let grid = build_sdf(&env, 0.02, 0.05).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.tcsdf");
    write_grid(&path, &grid).unwrap();
    let back = read_grid(&path).unwrap();
    assert_eq!(back.header(), grid.header());
    assert_eq!(back.values(), grid.values());
    let p = Vec3::new(0.05, 0.02, 0.31);
    assert_eq!(back.query(&p), grid.query(&p));
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 64 + 4 * grid.values().len() as u64);
}

#[test]
fn sdf_cache_rejects_foreign_and_truncated_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.tcsdf");
    std::fs::write(&path, vec![7u8; 100]).unwrap();
    assert!(matches!(read_grid(&path), Err(Error::Format(..))));

    let env = EnvironmentModel::from_solids(vec![Solid::sphere(0.1, PoseSE3::identity())]).unwrap();
    write_grid(&path, &build_sdf(&env, 0.05, 0.0).unwrap()).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 4);
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(read_grid(&path), Err(Error::Format(..))));
    assert!(matches!(read_grid(&dir.path().join("missing")), Err(Error::Io(..))));
}

#[test]
fn obj_step_block_is_closed_and_outward() {
    let mesh = load_mesh(&step_block()).unwrap();
    assert_eq!(mesh.triangles().len(), 20);
    assert_eq!(mesh.vertices().len(), 12);
    // L-shape: 0.8 × 0.5 × 0.5 plus 0.4 × 0.5 × 0.2.
    assert!((mesh.signed_volume() - 0.24).abs() < 1e-6);
    let env = EnvironmentModel::from_mesh(mesh, Vec::new()).unwrap();
    assert!((env.distance(&Vec3::new(0.2, 0.0, 0.6)) - 0.1).abs() < 1e-6);
    assert!((env.distance(&Vec3::new(-0.2, 0.0, 0.6)) + 0.1).abs() < 1e-6);
}

#[test]
fn stl_roundtrip() {
    let mesh = box_mesh(Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.4, 0.2, 1.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.stl");
    write_stl(&path, &mesh).unwrap();
    let back = load_mesh(&path).unwrap();
    assert_eq!(back.triangles().len(), 12);
    assert_eq!(back.vertices().len(), 8);
    assert!((back.signed_volume() - 0.08).abs() < 1e-6);
}

#[test]
fn unknown_mesh_extension() {
    assert!(matches!(load_mesh(&PathBuf::from("table.ply")), Err(Error::Format(..))));
}

#[test]
fn jsonl_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/values.jsonl");
    let mut w = JsonlWriter::create(path.clone()).unwrap();
    for i in 0..3 {
        w.write(&(i, format!("row {i}"))).unwrap();
    }
    assert_eq!(w.finish().unwrap(), path);
    let back: Vec<(u32, String)> = read_jsonl(&path).unwrap();
    assert_eq!(back, vec![(0, "row 0".into()), (1, "row 1".into()), (2, "row 2".into())]);
    std::fs::write(&path, "{not json}\n").unwrap();
    assert!(read_jsonl::<(u32, String)>(&path).is_err());
}

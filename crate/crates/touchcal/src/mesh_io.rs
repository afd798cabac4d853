//! STL and OBJ loading.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use touchcal_core::geometry::TriangleMesh;
use touchcal_core::Vec3;

use crate::Error;

/// Loads a closed triangle mesh, choosing the parser by file extension.
/// Coincident vertices are welded.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh, Error> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (vertices, triangles) = match ext.as_deref() {
        Some("stl") => read_stl(path)?,
        Some("obj") => read_obj(path)?,
        _ => return Err(Error::Format(path.to_path_buf(), "expected an .stl or .obj file".into())),
    };
    TriangleMesh::welded(&vertices, &triangles).map_err(|e| Error::Format(path.to_path_buf(), e.to_string()))
}

fn read_stl(path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), Error> {
    let file = File::open(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
    let mesh = stl_io::read_stl(&mut BufReader::new(file)).map_err(|e| Error::Io(path.to_path_buf(), e))?;
    let vertices = mesh.vertices.iter().map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64)).collect();
    let triangles = mesh.faces.iter().map(|f| f.vertices).collect();
    Ok((vertices, triangles))
}

fn read_obj(path: &Path) -> Result<(Vec<Vec3>, Vec<[usize; 3]>), Error> {
    let opts = tobj::LoadOptions { triangulate: true, single_index: true, ..Default::default() };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::Format(path.to_path_buf(), e.to_string()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in models {
        let offset = vertices.len();
        vertices.extend(m.mesh.positions.chunks_exact(3).map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)));
        triangles.extend(
            m.mesh
                .indices
                .chunks_exact(3)
                .map(|t| [offset + t[0] as usize, offset + t[1] as usize, offset + t[2] as usize]),
        );
    }
    Ok((vertices, triangles))
}

/// Writes a mesh as binary STL.
pub fn write_stl(path: &Path, mesh: &TriangleMesh) -> Result<(), Error> {
    let tris: Vec<stl_io::Triangle> = (0..mesh.triangles().len())
        .map(|i| {
            let c = mesh.corners(i);
            let n = mesh.triangle_normal(i);
            let v = |p: &Vec3| stl_io::Vertex::new([p.x as f32, p.y as f32, p.z as f32]);
            stl_io::Triangle {
                normal: stl_io::Normal::new([n.x as f32, n.y as f32, n.z as f32]),
                vertices: [v(&c[0]), v(&c[1]), v(&c[2])],
            }
        })
        .collect();
    let mut file = File::create(path).map_err(|e| Error::Io(path.to_path_buf(), e))?;
    stl_io::write_stl(&mut file, tris.iter()).map_err(|e| Error::Io(path.to_path_buf(), e))
}

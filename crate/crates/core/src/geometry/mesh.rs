//! Closed triangle meshes: watertightness check, exact point distance and
//! generalized winding number for inside/outside classification.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::shapes::Aabb;
use super::GeometryError;
use crate::math;
use crate::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh and checks that every edge is shared by exactly two triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        if triangles.is_empty() {
            return Err(GeometryError::NoSolids);
        }
        if triangles.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(GeometryError::BadMeshIndex);
        }
        let mesh = Self { vertices, triangles };
        let open = mesh.non_manifold_edges();
        if open > 0 {
            return Err(GeometryError::NotWatertight { bad_edges: open });
        }
        Ok(mesh)
    }

    /// Merges vertices that share identical coordinates (as produced by STL files).
    pub fn welded(vertices: &[Vec3], triangles: &[[usize; 3]]) -> Result<Self, GeometryError> {
        let mut index: BTreeMap<[u64; 3], usize> = BTreeMap::new();
        let mut out = Vec::new();
        let mut remap = Vec::with_capacity(vertices.len());
        for v in vertices {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            let id = *index.entry(key).or_insert_with(|| {
                out.push(*v);
                out.len() - 1
            });
            remap.push(id);
        }
        let tris = triangles
            .iter()
            .map(|t| {
                let get = |i: usize| remap.get(i).copied().ok_or(GeometryError::BadMeshIndex);
                Ok([get(t[0])?, get(t[1])?, get(t[2])?])
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Self::new(out, tris)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    fn non_manifold_edges(&self) -> usize {
        let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts.values().filter(|&&c| c != 2).count()
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let t = self.triangles[tri];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit normal following the triangle winding, flipped when the mesh is wound inward.
    pub fn triangle_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        let n = (b - a).cross(&(c - a)).normalize();
        if self.signed_volume() < 0.0 {
            -n
        } else {
            n
        }
    }

    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn aabb(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.include(v);
        }
        b
    }

    /// Unsigned distance to the closest point of the surface.
    pub fn unsigned_distance(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            let d2 = (closest_point_on_triangle(p, &a, &b, &c) - p).norm_squared();
            if d2 < best {
                best = d2;
            }
        }
        math::sqrt(best)
    }

    /// Generalized winding number: ≈1 inside a closed surface, ≈0 outside.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.corners(t);
            total += solid_angle(&(a - p), &(b - p), &(c - p));
        }
        (total / (4.0 * math::PI)).abs()
    }

    /// Exact signed distance: unsigned distance with the sign from the winding number.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let d = self.unsigned_distance(p);
        if self.winding_number(p) > 0.5 {
            -d
        } else {
            d
        }
    }
}

/// Signed solid angle subtended by triangle `(a, b, c)` seen from the origin.
fn solid_angle(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let det = a.dot(&b.cross(c));
    let den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    2.0 * math::atan2(det, den)
}

/// Closest point on a triangle (region-based, after Ericson's "Real-Time Collision Detection").
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Axis-aligned box as a closed 12-triangle mesh (outward winding).
pub fn box_mesh(center: Vec3, size: Vec3) -> TriangleMesh {
    let h = size * 0.5;
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
        v.push(center + Vec3::new(sx * h.x, sy * h.y, sz * h.z));
    }
    let t = alloc::vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(v, t).expect("box mesh is closed")
}

//! Environment and end-effector geometry.
//!
//! The environment is either a union of convex primitives or a closed
//! triangle mesh, split into segments that group surface for action
//! selection. It is voxelized into an [`SdfGrid`] for fast signed-distance
//! lookups; the end-effector is represented by a point cloud in its body
//! frame.

mod cloud;
mod mesh;
mod sdf;
mod shapes;
mod surface;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use cloud::{closest_cloud_point, cloud_distance, hypothesized_distance, sample_cloud, EndEffectorCloud};
pub use mesh::{box_mesh, closest_point_on_triangle, TriangleMesh};
pub use sdf::{build_sdf, GridHeader, Interpolation, SdfGrid, MAX_VOXELS};
pub use shapes::{Aabb, Shape, Solid};

pub(crate) use surface::{apportion, sample_patches, solid_patches, Patch, PatchSource};

use crate::Vec3;

/// Tolerance under which a surface point counts as covered by another solid.
pub(crate) const HIDDEN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("environment has no solids")]
    NoSolids,
    #[error("invalid primitive {0}: sizes must be positive and finite")]
    InvalidShape(usize),
    #[error("mesh is not watertight: {bad_edges} edges are not shared by exactly two triangles")]
    NotWatertight { bad_edges: usize },
    #[error("mesh triangle references a missing vertex")]
    BadMeshIndex,
    #[error("resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("padding must be non-negative, got {0}")]
    NegativePadding(f64),
    #[error("resolution {resolution} m exceeds the smallest solid extent {min_extent} m")]
    ResolutionTooCoarse { resolution: f64, min_extent: f64 },
    #[error("grid of {0} voxels is too large")]
    GridTooLarge(u128),
    #[error("grid data does not match its header: {0}")]
    BadGridData(String),
    #[error("point cloud needs at least one point")]
    EmptyCloud,
    #[error("segment {segment} references missing part {part}")]
    BadSegment { segment: usize, part: usize },
    #[error("segment {0} has no samplable surface area")]
    ZeroSamplableArea(usize),
    #[error("could not place enough surface samples (too much of the surface is hidden)")]
    SamplingFailed,
}

/// Anything that can report a signed distance (m, negative inside).
pub trait DistanceField {
    fn distance(&self, p: &Vec3) -> f64;

    /// Unit gradient by central differences with step `h`.
    fn gradient(&self, p: &Vec3, h: f64) -> Vec3 {
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut a = *p;
            let mut b = *p;
            a[k] += h;
            b[k] -= h;
            g[k] = self.distance(&a) - self.distance(&b);
        }
        let n = g.norm();
        if n > 0.0 {
            g / n
        } else {
            Vec3::z()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    Primitives(Vec<Solid>),
    Mesh(TriangleMesh),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SegmentParts {
    /// Indices into the primitive list.
    Solids(Vec<usize>),
    /// Triangle indices of a convex sub-mesh.
    Triangles(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub name: String,
    pub parts: SegmentParts,
}

/// Static environment in the world frame, with its segment decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentModel {
    geometry: Geometry,
    segments: Vec<Segment>,
}

impl EnvironmentModel {
    /// Primitive union with one segment per solid.
    pub fn from_solids(solids: Vec<Solid>) -> Result<Self, GeometryError> {
        let segments = (0..solids.len())
            .map(|i| Segment { name: format!("solid-{i}"), parts: SegmentParts::Solids(alloc::vec![i]) })
            .collect();
        Self::new(Geometry::Primitives(solids), segments)
    }

    /// Closed mesh; a single segment covering all triangles when `segments` is empty.
    pub fn from_mesh(mesh: TriangleMesh, mut segments: Vec<Segment>) -> Result<Self, GeometryError> {
        if segments.is_empty() {
            segments.push(Segment {
                name: String::from("mesh"),
                parts: SegmentParts::Triangles((0..mesh.triangles().len()).collect()),
            });
        }
        Self::new(Geometry::Mesh(mesh), segments)
    }

    pub fn new(geometry: Geometry, segments: Vec<Segment>) -> Result<Self, GeometryError> {
        let parts = match &geometry {
            Geometry::Primitives(solids) => {
                if solids.is_empty() {
                    return Err(GeometryError::NoSolids);
                }
                if let Some(i) = solids.iter().position(|s| !s.shape.is_valid()) {
                    return Err(GeometryError::InvalidShape(i));
                }
                solids.len()
            }
            Geometry::Mesh(m) => m.triangles().len(),
        };
        for (si, seg) in segments.iter().enumerate() {
            let ids = match (&seg.parts, &geometry) {
                (SegmentParts::Solids(ids), Geometry::Primitives(_)) => ids,
                (SegmentParts::Triangles(ids), Geometry::Mesh(_)) => ids,
                _ => return Err(GeometryError::BadSegment { segment: si, part: usize::MAX }),
            };
            if let Some(&bad) = ids.iter().find(|&&i| i >= parts) {
                return Err(GeometryError::BadSegment { segment: si, part: bad });
            }
        }
        Ok(Self { geometry, segments })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn solids(&self) -> &[Solid] {
        match &self.geometry {
            Geometry::Primitives(s) => s,
            Geometry::Mesh(_) => &[],
        }
    }

    pub fn aabb(&self) -> Aabb {
        match &self.geometry {
            Geometry::Primitives(s) => s.iter().fold(Aabb::empty(), |b, s| b.union(&s.aabb())),
            Geometry::Mesh(m) => m.aabb(),
        }
    }

    /// Smallest thickness among the solids (mesh: smallest AABB side).
    pub fn min_extent(&self) -> f64 {
        match &self.geometry {
            Geometry::Primitives(s) => s.iter().map(|s| s.shape.min_extent()).fold(f64::INFINITY, f64::min),
            Geometry::Mesh(m) => {
                let e = m.aabb().extent();
                e.x.min(e.y).min(e.z)
            }
        }
    }

    /// True when a point on one solid's surface lies on or inside another solid.
    pub(crate) fn is_hidden(&self, p: &Vec3) -> bool {
        match &self.geometry {
            Geometry::Primitives(solids) => {
                let mut touching = 0;
                for s in solids {
                    let d = s.sdf(p);
                    if d < -HIDDEN_TOL {
                        return true;
                    }
                    if d <= HIDDEN_TOL {
                        touching += 1;
                    }
                }
                touching >= 2
            }
            Geometry::Mesh(_) => false,
        }
    }

    pub(crate) fn patch_source(&self) -> PatchSource<'_> {
        match &self.geometry {
            Geometry::Primitives(s) => PatchSource::Solids(s),
            Geometry::Mesh(m) => PatchSource::Mesh(m),
        }
    }

    pub(crate) fn segment_patches(&self, segment: usize) -> Vec<Patch> {
        let mut out = Vec::new();
        match (&self.segments[segment].parts, &self.geometry) {
            (SegmentParts::Solids(ids), Geometry::Primitives(solids)) => {
                for &i in ids {
                    solid_patches(i, &solids[i], &mut out);
                }
            }
            (SegmentParts::Triangles(ids), Geometry::Mesh(_)) => {
                out.extend(ids.iter().map(|&index| Patch::Triangle { index }));
            }
            _ => {}
        }
        out
    }
}

impl DistanceField for EnvironmentModel {
    /// Exact for primitive unions (minimum over solids) and meshes.
    fn distance(&self, p: &Vec3) -> f64 {
        match &self.geometry {
            Geometry::Primitives(solids) => solids.iter().map(|s| s.sdf(p)).fold(f64::INFINITY, f64::min),
            Geometry::Mesh(m) => m.signed_distance(p),
        }
    }
}

impl DistanceField for [Solid] {
    fn distance(&self, p: &Vec3) -> f64 {
        self.iter().map(|s| s.sdf(p)).fold(f64::INFINITY, f64::min)
    }
}

impl<T: DistanceField + ?Sized> DistanceField for &T {
    fn distance(&self, p: &Vec3) -> f64 {
        (**self).distance(p)
    }
}

use alloc::format;
use alloc::vec::Vec;

use super::shapes::Aabb;
use super::{DistanceField, EnvironmentModel, GeometryError};
use crate::math;
use crate::Vec3;

/// Upper bound on the voxel count of a grid.
pub const MAX_VOXELS: u128 = 1 << 31;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum Interpolation {
    /// Value of the voxel containing the point.
    #[default]
    Nearest,
    /// Trilinear blend of the eight surrounding voxel centers.
    Trilinear,
}

/// Geometry of a grid without its values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHeader {
    /// Minimum corner of voxel (0, 0, 0).
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

/// Voxelized signed distance field.
///
/// Voxel `(i, j, k)` covers `origin + [i, i+1) × [j, j+1) × [k, k+1) · resolution`
/// and stores the signed distance at its center. Values are laid out
/// row-major with `k` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfGrid {
    header: GridHeader,
    values: Vec<f32>,
    interpolation: Interpolation,
    inv_res: f64,
    bounds: Aabb,
}

/// Voxelizes `env` at `resolution` over its bounding box inflated by `padding`.
pub fn build_sdf(env: &EnvironmentModel, resolution: f64, padding: f64) -> Result<SdfGrid, GeometryError> {
    SdfGrid::build(env, resolution, padding)
}

impl SdfGrid {
    pub fn build(env: &EnvironmentModel, resolution: f64, padding: f64) -> Result<Self, GeometryError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(GeometryError::NonPositiveResolution(resolution));
        }
        if !(padding >= 0.0) {
            return Err(GeometryError::NegativePadding(padding));
        }
        let min_extent = env.min_extent();
        if resolution > min_extent {
            return Err(GeometryError::ResolutionTooCoarse { resolution, min_extent });
        }
        let region = env.aabb().inflate(padding);
        let ext = region.extent();
        let dims = [
            math::floor(ext.x / resolution) as usize + 1,
            math::floor(ext.y / resolution) as usize + 1,
            math::floor(ext.z / resolution) as usize + 1,
        ];
        let header = GridHeader { origin: region.min, resolution, dims };
        check_size(&dims)?;
        let values = voxelize(env, &header);
        Self::from_parts(header, values)
    }

    /// Grid from a header and values (e.g. read back from a cache file).
    pub fn from_parts(header: GridHeader, values: Vec<f32>) -> Result<Self, GeometryError> {
        if !(header.resolution > 0.0) || !header.resolution.is_finite() {
            return Err(GeometryError::NonPositiveResolution(header.resolution));
        }
        if header.dims.contains(&0) {
            return Err(GeometryError::BadGridData(format!("zero dimension in {:?}", header.dims)));
        }
        check_size(&header.dims)?;
        let expected = header.dims[0] * header.dims[1] * header.dims[2];
        if values.len() != expected {
            return Err(GeometryError::BadGridData(format!("expected {expected} values, got {}", values.len())));
        }
        let size = Vec3::new(header.dims[0] as f64, header.dims[1] as f64, header.dims[2] as f64) * header.resolution;
        Ok(Self {
            bounds: Aabb { min: header.origin, max: header.origin + size },
            inv_res: 1.0 / header.resolution,
            header,
            values,
            interpolation: Interpolation::Nearest,
        })
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn origin(&self) -> Vec3 {
        self.header.origin
    }

    pub fn resolution(&self) -> f64 {
        self.header.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.header.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, ny, nz] = self.header.dims;
        (i * ny + j) * nz + k
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        voxel_center(&self.header, i, j, k)
    }

    /// Signed distance lookup. Outside the grid the boundary voxel value plus
    /// the distance to the grid box is returned.
    #[inline]
    pub fn query(&self, p: &Vec3) -> f64 {
        match self.interpolation {
            Interpolation::Nearest => self.query_nearest(p),
            Interpolation::Trilinear => self.query_trilinear(p),
        }
    }

    #[inline]
    fn query_nearest(&self, p: &Vec3) -> f64 {
        let o = &self.header.origin;
        let [nx, ny, nz] = self.header.dims;
        let fx = (p.x - o.x) * self.inv_res;
        let fy = (p.y - o.y) * self.inv_res;
        let fz = (p.z - o.z) * self.inv_res;
        if fx >= 0.0 && fy >= 0.0 && fz >= 0.0 {
            let (i, j, k) = (fx as usize, fy as usize, fz as usize);
            if i < nx && j < ny && k < nz {
                return self.values[(i * ny + j) * nz + k] as f64;
            }
        }
        let i = clamp_index(fx, nx);
        let j = clamp_index(fy, ny);
        let k = clamp_index(fz, nz);
        self.values[(i * ny + j) * nz + k] as f64 + self.bounds.distance(p)
    }

    fn query_trilinear(&self, p: &Vec3) -> f64 {
        let o = &self.header.origin;
        let dims = self.header.dims;
        let u = [(p.x - o.x) * self.inv_res - 0.5, (p.y - o.y) * self.inv_res - 0.5, (p.z - o.z) * self.inv_res - 0.5];
        let mut base = [0usize; 3];
        let mut t = [0.0f64; 3];
        for a in 0..3 {
            if dims[a] == 1 {
                continue;
            }
            let f = math::floor(u[a]).clamp(0.0, (dims[a] - 2) as f64);
            base[a] = f as usize;
            t[a] = (u[a] - f).clamp(0.0, 1.0);
        }
        let step = |a: usize| usize::from(dims[a] > 1);
        let mut acc = 0.0;
        for c in 0..8 {
            let (di, dj, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if di == 1 { t[0] } else { 1.0 - t[0] })
                * (if dj == 1 { t[1] } else { 1.0 - t[1] })
                * (if dk == 1 { t[2] } else { 1.0 - t[2] });
            if w == 0.0 {
                continue;
            }
            let v = self.value(base[0] + di * step(0), base[1] + dj * step(1), base[2] + dk * step(2));
            acc += w * v as f64;
        }
        acc + self.bounds.distance(p)
    }
}

impl DistanceField for SdfGrid {
    #[inline]
    fn distance(&self, p: &Vec3) -> f64 {
        self.query(p)
    }
}

#[inline]
fn clamp_index(f: f64, n: usize) -> usize {
    if f >= 0.0 {
        (f as usize).min(n - 1)
    } else {
        0
    }
}

fn check_size(dims: &[usize; 3]) -> Result<(), GeometryError> {
    let count = dims.iter().map(|&d| d as u128).product::<u128>();
    if count > MAX_VOXELS {
        return Err(GeometryError::GridTooLarge(count));
    }
    Ok(())
}

fn voxel_center(h: &GridHeader, i: usize, j: usize, k: usize) -> Vec3 {
    h.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h.resolution
}

fn fill_slab(env: &EnvironmentModel, h: &GridHeader, i: usize, slab: &mut [f32]) {
    let [_, ny, nz] = h.dims;
    for j in 0..ny {
        for k in 0..nz {
            slab[j * nz + k] = env.distance(&voxel_center(h, i, j, k)) as f32;
        }
    }
}

#[cfg(feature = "std")]
fn voxelize(env: &EnvironmentModel, h: &GridHeader) -> Vec<f32> {
    use rayon::prelude::*;
    let [nx, ny, nz] = h.dims;
    let mut values = alloc::vec![0.0f32; nx * ny * nz];
    values.par_chunks_mut(ny * nz).enumerate().for_each(|(i, slab)| fill_slab(env, h, i, slab));
    values
}

#[cfg(not(feature = "std"))]
fn voxelize(env: &EnvironmentModel, h: &GridHeader) -> Vec<f32> {
    let [nx, ny, nz] = h.dims;
    let mut values = alloc::vec![0.0f32; nx * ny * nz];
    for (i, slab) in values.chunks_mut(ny * nz).enumerate() {
        fill_slab(env, h, i, slab);
    }
    values
}

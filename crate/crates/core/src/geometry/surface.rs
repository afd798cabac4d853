//! Area-weighted surface sampling over primitive faces and mesh triangles.

use alloc::vec::Vec;

use rand::RngCore;

use super::mesh::TriangleMesh;
use super::shapes::{Shape, Solid};
use crate::math::{self, PI};
use crate::rng::uniform;
use crate::Vec3;

/// A piece of surface that can be sampled uniformly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Patch {
    /// Box face `face` (axis = face / 2, sign from face % 2) of solid `solid`.
    BoxFace {
        solid: usize,
        face: u8,
    },
    Sphere {
        solid: usize,
    },
    CylinderSide {
        solid: usize,
    },
    /// Top cap when `top`, else bottom cap.
    CylinderCap {
        solid: usize,
        top: bool,
    },
    Triangle {
        index: usize,
    },
}

/// Where patch indices point.
pub(crate) enum PatchSource<'a> {
    Solids(&'a [Solid]),
    Mesh(&'a TriangleMesh),
}

pub(crate) fn solid_patches(index: usize, solid: &Solid, out: &mut Vec<Patch>) {
    match solid.shape {
        Shape::Box { .. } => {
            for face in 0..6 {
                out.push(Patch::BoxFace { solid: index, face });
            }
        }
        Shape::Sphere { .. } => out.push(Patch::Sphere { solid: index }),
        Shape::Cylinder { .. } => {
            out.push(Patch::CylinderSide { solid: index });
            out.push(Patch::CylinderCap { solid: index, top: true });
            out.push(Patch::CylinderCap { solid: index, top: false });
        }
    }
}

impl PatchSource<'_> {
    pub fn area(&self, patch: &Patch) -> f64 {
        match (self, patch) {
            (PatchSource::Solids(s), Patch::BoxFace { solid, face }) => {
                let Shape::Box { half_extents: h } = s[*solid].shape else { return 0.0 };
                let axis = (*face / 2) as usize;
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                4.0 * h[u] * h[v]
            }
            (PatchSource::Solids(s), Patch::Sphere { solid }) => s[*solid].shape.surface_area(),
            (PatchSource::Solids(s), Patch::CylinderSide { solid }) => match s[*solid].shape {
                Shape::Cylinder { radius, half_height } => 4.0 * PI * radius * half_height,
                _ => 0.0,
            },
            (PatchSource::Solids(s), Patch::CylinderCap { solid, .. }) => match s[*solid].shape {
                Shape::Cylinder { radius, .. } => PI * radius * radius,
                _ => 0.0,
            },
            (PatchSource::Mesh(m), Patch::Triangle { index }) => m.triangle_area(*index),
            _ => 0.0,
        }
    }

    /// Outward normal when it is constant over the patch.
    pub fn constant_normal(&self, patch: &Patch) -> Option<Vec3> {
        match (self, patch) {
            (PatchSource::Solids(s), Patch::BoxFace { solid, face }) => {
                Some(s[*solid].pose().transform_vector(&box_face_normal(*face)))
            }
            (PatchSource::Solids(s), Patch::CylinderCap { solid, top }) => {
                let n = if *top { Vec3::z() } else { -Vec3::z() };
                Some(s[*solid].pose().transform_vector(&n))
            }
            (PatchSource::Mesh(m), Patch::Triangle { index }) => Some(m.triangle_normal(*index)),
            _ => None,
        }
    }

    /// Uniform point and outward unit normal on the patch, in the parent frame.
    pub fn sample<R: RngCore + ?Sized>(&self, patch: &Patch, rng: &mut R) -> (Vec3, Vec3) {
        match (self, patch) {
            (PatchSource::Solids(s), p) => {
                let solid = &s[patch_solid(p)];
                let (lp, ln) = sample_local(&solid.shape, p, rng);
                (solid.pose().transform_point(&lp), solid.pose().transform_vector(&ln))
            }
            (PatchSource::Mesh(m), Patch::Triangle { index }) => {
                let [a, b, c] = m.corners(*index);
                let (mut u, mut v) = (uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0));
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                (a + (b - a) * u + (c - a) * v, m.triangle_normal(*index))
            }
            (PatchSource::Mesh(_), _) => unreachable!("mesh sources only hold triangles"),
        }
    }
}

fn patch_solid(p: &Patch) -> usize {
    match *p {
        Patch::BoxFace { solid, .. }
        | Patch::Sphere { solid }
        | Patch::CylinderSide { solid }
        | Patch::CylinderCap { solid, .. } => solid,
        Patch::Triangle { .. } => unreachable!("triangles are not solids"),
    }
}

fn box_face_normal(face: u8) -> Vec3 {
    let mut n = Vec3::zeros();
    n[(face / 2) as usize] = if face.is_multiple_of(2) { -1.0 } else { 1.0 };
    n
}

fn sample_local<R: RngCore + ?Sized>(shape: &Shape, patch: &Patch, rng: &mut R) -> (Vec3, Vec3) {
    match (*shape, *patch) {
        (Shape::Box { half_extents: h }, Patch::BoxFace { face, .. }) => {
            let n = box_face_normal(face);
            let axis = (face / 2) as usize;
            let mut p = Vec3::zeros();
            for k in 0..3 {
                p[k] = if k == axis { n[k] * h[k] } else { uniform(rng, -h[k], h[k]) };
            }
            (p, n)
        }
        (Shape::Sphere { radius }, _) => {
            let z = uniform(rng, -1.0, 1.0);
            let phi = uniform(rng, 0.0, 2.0 * PI);
            let r = math::sqrt((1.0 - z * z).max(0.0));
            let n = Vec3::new(r * math::cos(phi), r * math::sin(phi), z);
            (n * radius, n)
        }
        (Shape::Cylinder { radius, half_height }, Patch::CylinderSide { .. }) => {
            let phi = uniform(rng, 0.0, 2.0 * PI);
            let n = Vec3::new(math::cos(phi), math::sin(phi), 0.0);
            let z = uniform(rng, -half_height, half_height);
            (Vec3::new(radius * n.x, radius * n.y, z), n)
        }
        (Shape::Cylinder { radius, half_height }, Patch::CylinderCap { top, .. }) => {
            let r = radius * math::sqrt(uniform(rng, 0.0, 1.0));
            let phi = uniform(rng, 0.0, 2.0 * PI);
            let z = if top { half_height } else { -half_height };
            (Vec3::new(r * math::cos(phi), r * math::sin(phi), z), Vec3::new(0.0, 0.0, z.signum()))
        }
        _ => unreachable!("patch does not belong to shape"),
    }
}

/// Splits `total` into integer counts proportional to `weights` (largest remainder).
pub(crate) fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || weights.is_empty() {
        return alloc::vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| math::floor(*e) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // Stable sort keeps lower indices first among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws `count` area-uniform samples over `patches`, keeping only those
/// accepted by `accept`.
///
/// The first pass is stratified: each patch receives its area share of the
/// samples. Rejected draws are then replaced with plain area-weighted draws.
/// Returns `None` when the acceptance rate is too low to finish.
pub(crate) fn sample_patches<R, F>(
    source: &PatchSource<'_>,
    patches: &[Patch],
    count: usize,
    rng: &mut R,
    mut accept: F,
) -> Option<Vec<(Vec3, Vec3)>>
where
    R: RngCore + ?Sized,
    F: FnMut(&Vec3, &Vec3) -> bool,
{
    let areas: Vec<f64> = patches.iter().map(|p| source.area(p)).collect();
    let total_area: f64 = areas.iter().sum();
    if count == 0 {
        return Some(Vec::new());
    }
    if !(total_area > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(count);
    for (patch, n) in patches.iter().zip(apportion(&areas, count)) {
        for _ in 0..n {
            let (p, nrm) = source.sample(patch, rng);
            if accept(&p, &nrm) {
                out.push((p, nrm));
            }
        }
    }
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cumulative.push(acc);
    }
    let budget = 1000 * count + 10_000;
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > budget {
            return None;
        }
        let u = uniform(rng, 0.0, total_area);
        let k = cumulative.partition_point(|c| *c <= u).min(patches.len() - 1);
        let (p, nrm) = source.sample(&patches[k], rng);
        if accept(&p, &nrm) {
            out.push((p, nrm));
        }
    }
    Some(out)
}

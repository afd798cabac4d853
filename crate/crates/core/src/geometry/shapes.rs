use crate::math;
use crate::se3::PoseSE3;
use crate::Vec3;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn include(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn inflate(&self, pad: f64) -> Aabb {
        Aabb { min: self.min.add_scalar(-pad), max: self.max.add_scalar(pad) }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        let d = (self.min - p).sup(&(p - self.max)).sup(&Vec3::zeros());
        d.norm()
    }
}

/// Convex primitive in its local frame. Boxes and spheres are centered at the
/// origin; cylinders are centered with their axis along local z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Box { half_extents: Vec3 },
    Sphere { radius: f64 },
    Cylinder { radius: f64, half_height: f64 },
}

impl Shape {
    /// Exact signed distance in the local frame.
    #[inline]
    pub fn local_sdf(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Box { half_extents } => {
                let q = p.abs() - half_extents;
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
            Shape::Sphere { radius } => p.norm() - radius,
            Shape::Cylinder { radius, half_height } => {
                let dr = math::sqrt(p.x * p.x + p.y * p.y) - radius;
                let dz = p.z.abs() - half_height;
                let ox = dr.max(0.0);
                let oz = dz.max(0.0);
                math::sqrt(ox * ox + oz * oz) + dr.max(dz).min(0.0)
            }
        }
    }

    pub fn local_half_extents(&self) -> Vec3 {
        match *self {
            Shape::Box { half_extents } => half_extents,
            Shape::Sphere { radius } => Vec3::repeat(radius),
            Shape::Cylinder { radius, half_height } => Vec3::new(radius, radius, half_height),
        }
    }

    /// Smallest full extent (thickness) of the shape.
    pub fn min_extent(&self) -> f64 {
        let h = self.local_half_extents();
        2.0 * h.x.min(h.y).min(h.z)
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Shape::Box { half_extents: h } => 8.0 * (h.x * h.y + h.y * h.z + h.x * h.z),
            Shape::Sphere { radius } => 4.0 * math::PI * radius * radius,
            Shape::Cylinder { radius, half_height } => {
                2.0 * math::PI * radius * (2.0 * half_height) + 2.0 * math::PI * radius * radius
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        let h = self.local_half_extents();
        h.iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

/// A primitive placed in a parent frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solid {
    pub shape: Shape,
    pose: PoseSE3,
    inv: PoseSE3,
}

impl Solid {
    pub fn new(shape: Shape, pose: PoseSE3) -> Self {
        Self { shape, pose, inv: pose.inverse() }
    }

    pub fn cuboid(size: Vec3, pose: PoseSE3) -> Self {
        Self::new(Shape::Box { half_extents: size * 0.5 }, pose)
    }

    pub fn sphere(radius: f64, pose: PoseSE3) -> Self {
        Self::new(Shape::Sphere { radius }, pose)
    }

    pub fn cylinder(radius: f64, height: f64, pose: PoseSE3) -> Self {
        Self::new(Shape::Cylinder { radius, half_height: 0.5 * height }, pose)
    }

    pub fn pose(&self) -> &PoseSE3 {
        &self.pose
    }

    #[inline]
    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.shape.local_sdf(&self.inv.transform_point(p))
    }

    pub fn aabb(&self) -> Aabb {
        let h = self.shape.local_half_extents();
        let mut b = Aabb::empty();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    b.include(&self.pose.transform_point(&Vec3::new(sx * h.x, sy * h.y, sz * h.z)));
                }
            }
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn box_sdf_examples() {
        let b = Shape::Box { half_extents: Vec3::repeat(0.5) };
        assert_abs_diff_eq!(b.local_sdf(&Vec3::zeros()), -0.5);
        assert_abs_diff_eq!(b.local_sdf(&Vec3::new(1.0, 0.0, 0.0)), 0.5);
        assert_abs_diff_eq!(b.local_sdf(&Vec3::new(1.5, 1.5, 0.0)), 2.0f64.sqrt());
        assert_abs_diff_eq!(b.local_sdf(&Vec3::new(0.5, 0.1, 0.0)), 0.0);
    }

    #[test]
    fn cylinder_sdf_examples() {
        let c = Shape::Cylinder { radius: 0.2, half_height: 0.5 };
        assert_abs_diff_eq!(c.local_sdf(&Vec3::zeros()), -0.2);
        assert_abs_diff_eq!(c.local_sdf(&Vec3::new(0.5, 0.0, 0.0)), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(c.local_sdf(&Vec3::new(0.0, 0.0, 0.9)), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(c.local_sdf(&Vec3::new(0.5, 0.0, 0.9)), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn posed_solid() {
        let s = Solid::sphere(0.1, PoseSE3::from_translation(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(s.sdf(&Vec3::new(1.0, 0.0, 0.0)), -0.1);
        let b = s.aabb();
        assert_abs_diff_eq!(b.min.x, 0.9);
        assert_abs_diff_eq!(b.max.x, 1.1);
    }
}

//! Ray intersections with the scene primitives. Rays are `origin + t * dir`
//! with `t > 0`; returned values are the nearest `t`.

use super::{Primitive, Shape};

const EPS: f64 = 1e-9;

/// Hit with the plane `z = 0`.
pub fn ray_ground(origin: [f64; 3], dir: [f64; 3]) -> Option<f64> {
    (dir[2] < -EPS && origin[2] > 0.0).then(|| -origin[2] / dir[2])
}

/// Slab test against an axis-aligned box.
pub fn ray_box(origin: [f64; 3], dir: [f64; 3], min: [f64; 3], max: [f64; 3]) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if dir[a].abs() < EPS {
            if origin[a] < min[a] || origin[a] > max[a] {
                return None;
            }
            continue;
        }
        let (mut near, mut far) = ((min[a] - origin[a]) / dir[a], (max[a] - origin[a]) / dir[a]);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
    }
    (t0 <= t1 && t0 > EPS).then_some(t0)
}

/// Vertical cylinder with axis through `(cx, cy)` spanning `z0..z1`.
pub fn ray_cylinder(origin: [f64; 3], dir: [f64; 3], center: [f64; 2], radius: f64, z0: f64, z1: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if t > EPS && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let (ox, oy) = (origin[0] - center[0], origin[1] - center[1]);
    let a = dir[0] * dir[0] + dir[1] * dir[1];
    if a > EPS * EPS {
        let b = 2.0 * (ox * dir[0] + oy * dir[1]);
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let z = origin[2] + t * dir[2];
                if (z0..=z1).contains(&z) {
                    keep(t);
                }
            }
        }
    }
    if dir[2].abs() > EPS {
        for z in [z0, z1] {
            let t = (z - origin[2]) / dir[2];
            let (x, y) = (ox + t * dir[0], oy + t * dir[1]);
            if x * x + y * y <= radius * radius {
                keep(t);
            }
        }
    }
    best
}

pub fn ray_primitive(origin: [f64; 3], dir: [f64; 3], p: &Primitive) -> Option<f64> {
    match p.shape {
        Shape::Box { min, max } => ray_box(origin, dir, min, max),
        Shape::Cylinder {
            center,
            radius,
            z0,
            z1,
        } => ray_cylinder(origin, dir, center, radius, z0, z1),
    }
}

/// What a ray sees first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hit {
    Ground(f64),
    /// Index into the scene's primitives.
    Object(usize, f64),
}

impl Hit {
    pub fn t(&self) -> f64 {
        match *self {
            Hit::Ground(t) | Hit::Object(_, t) => t,
        }
    }
}

/// Nearest hit among the ground plane and `primitives`; ties favour objects
/// in list order.
pub fn cast(origin: [f64; 3], dir: [f64; 3], primitives: &[Primitive]) -> Option<Hit> {
    let mut best = ray_ground(origin, dir).map(Hit::Ground);
    for (i, p) in primitives.iter().enumerate() {
        if let Some(t) = ray_primitive(origin, dir, p) {
            if best.is_none_or(|b| t < b.t() || (t == b.t() && matches!(b, Hit::Ground(_)))) {
                best = Some(Hit::Object(i, t));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_hit_distance() {
        let t = ray_ground([0.0, 0.0, 2.0], [0.6, 0.0, -0.8]).unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        assert!(ray_ground([0.0, 0.0, 2.0], [1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn box_front_face() {
        let t = ray_box([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [5.0, -1.0, 0.0], [7.0, 1.0, 2.0]).unwrap();
        assert!((t - 5.0).abs() < 1e-12);
        assert!(ray_box([0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [5.0, -1.0, 0.0], [7.0, 1.0, 2.0]).is_none());
        assert!(ray_box([0.0, 0.0, 3.0], [1.0, 0.0, 0.0], [5.0, -1.0, 0.0], [7.0, 1.0, 2.0]).is_none());
    }

    #[test]
    fn cylinder_side_and_cap() {
        let t = ray_cylinder([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [10.0, 0.0], 0.5, 0.0, 2.0).unwrap();
        assert!((t - 9.5).abs() < 1e-12);
        // straight down onto the top cap
        let t = ray_cylinder([10.0, 0.1, 5.0], [0.0, 0.0, -1.0], [10.0, 0.0], 0.5, 0.0, 2.0).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        assert!(ray_cylinder([0.0, 0.0, 3.0], [1.0, 0.0, 0.0], [10.0, 0.0], 0.5, 0.0, 2.0).is_none());
    }
}

//! Small 3D helpers shared by the feature extractor, the deictic resolver and
//! the simulator.

pub use nalgebra::{Rotation3, Unit, Vector2, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Angle between two vectors in `[0, π]`. Zero-length inputs give 0.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let cross = a.cross(b).norm();
    let dot = a.dot(b);
    if cross == 0.0 && dot == 0.0 {
        return 0.0;
    }
    cross.atan2(dot)
}

/// Unit vector along `v`, or zero if `v` has (near) zero length.
pub fn normalize_or_zero(v: &Vec3) -> Vec3 {
    let n = v.norm();
    if n > 1e-12 {
        v / n
    } else {
        Vec3::zeros()
    }
}

/// Heading of `v` projected on the horizontal (x, y) plane.
pub fn yaw_of(v: &Vec3) -> f64 {
    v.y.atan2(v.x)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}


#[cfg(test)]
mod serde_shape {
    #[test]
    fn vec3_is_flat_array() {
        let s = serde_json::to_string(&super::Vec3::new(1.0, 2.0, 3.5)).unwrap();
        assert_eq!(s, "[1.0,2.0,3.5]");
    }
}

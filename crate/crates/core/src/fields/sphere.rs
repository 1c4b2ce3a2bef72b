use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

/// Smallest norm accepted by the radial projection onto the sphere.
pub const DEFAULT_DELTA_FLOOR: f64 = 0.5;

/// Nearest-point projection `v ↦ v/|v|` from the tubular neighborhood onto S².
pub fn project_sphere(v: &Vec3, delta_floor: f64) -> Result<Vec3> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    let norm = v.norm();
    if norm < delta_floor {
        return Err(Error::DegenerateProjection {
            norm,
            floor: delta_floor,
        });
    }
    Ok(v / norm)
}

/// Jacobian of the projection, `(Id - v̂ v̂ᵀ) / |v|`.
pub fn projection_jacobian(v: &Vec3) -> Mat3 {
    let norm = v.norm();
    let hat = v / norm;
    (Mat3::identity() - hat * hat.transpose()) / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn radial_examples() {
        let p = project_sphere(&Vec3::new(0.0, 0.0, 2.0), DEFAULT_DELTA_FLOOR).unwrap();
        assert_eq!(p, Vec3::new(0.0, 0.0, 1.0));
        let q = project_sphere(&(Vec3::new(0.6, 0.8, 0.0) * 1.05), DEFAULT_DELTA_FLOOR).unwrap();
        assert!((q - Vec3::new(0.6, 0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_points_near_origin() {
        let err = project_sphere(&Vec3::new(0.1, 0.0, 0.0), DEFAULT_DELTA_FLOOR).unwrap_err();
        assert!(matches!(err, Error::DegenerateProjection { .. }));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let v = Vec3::new(0.3, -0.9, 0.4);
        let jac = projection_jacobian(&v);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let d = (project_sphere(&(v + e), 0.1).unwrap()
                - project_sphere(&(v - e), 0.1).unwrap())
                / (2.0 * h);
            for i in 0..3 {
                assert!((d[i] - jac[(i, k)]).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn unit_length_and_scale_invariance(
            x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64, lambda in 0.01..50.0f64
        ) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm() >= DEFAULT_DELTA_FLOOR && (v * lambda).norm() >= DEFAULT_DELTA_FLOOR);
            let p = project_sphere(&v, DEFAULT_DELTA_FLOOR).unwrap();
            prop_assert!((p.norm() - 1.0).abs() < 1e-12);
            let q = project_sphere(&(v * lambda), DEFAULT_DELTA_FLOOR).unwrap();
            prop_assert!((p - q).norm() < 1e-12);
            let fixed = project_sphere(&p, DEFAULT_DELTA_FLOOR).unwrap();
            prop_assert!((fixed - p).norm() < 1e-15);
        }
    }
}

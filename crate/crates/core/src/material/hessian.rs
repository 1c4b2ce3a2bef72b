use super::density::MaterialLaw;
use crate::error::{Error, Result};
use crate::linalg::{basis, Mat3, Mat9, Vec3};

/// Quadratic form recovered from second differences of `F ↦ W(y, Id + F, ν)`.
#[derive(Debug, Clone)]
pub struct HessianExtraction {
    /// Matrix of `Q` on row-major flattened matrices.
    pub matrix: Mat9,
    /// Same extraction at half the step.
    pub matrix_half_step: Mat9,
    /// `|M_h| / |M_{h/2}|` in the Frobenius norm.
    pub richardson_ratio: f64,
    /// `|M_h - M_{h/2}| / |M_{h/2}|`.
    pub relative_change: f64,
    /// Set when the relative change exceeds `1e-3`.
    pub warning: bool,
}

pub fn extract_q_by_hessian(
    law: &dyn MaterialLaw,
    y: [f64; 3],
    nu: &Vec3,
    step: f64,
) -> Result<HessianExtraction> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(Error::InvalidArgument(format!(
            "hessian step must lie in [1e-6, 1e-3], got {step}"
        )));
    }
    let matrix = second_differences(law, y, nu, step);
    let matrix_half_step = second_differences(law, y, nu, 0.5 * step);
    let base = matrix_half_step.norm();
    let relative_change = (matrix - matrix_half_step).norm() / base.max(f64::MIN_POSITIVE);
    let richardson_ratio = matrix.norm() / base.max(f64::MIN_POSITIVE);
    Ok(HessianExtraction {
        matrix,
        matrix_half_step,
        richardson_ratio,
        relative_change,
        warning: relative_change > 1e-3,
    })
}

fn second_differences(law: &dyn MaterialLaw, y: [f64; 3], nu: &Vec3, h: f64) -> Mat9 {
    let w = |g: Mat3| law.w(y, &(Mat3::identity() + g), nu);
    let w0 = w(Mat3::zeros());
    let mut m = Mat9::zeros();
    for a in 0..9 {
        let ea = basis(a) * h;
        m[(a, a)] = (w(ea) - 2.0 * w0 + w(-ea)) / (h * h);
        for b in 0..a {
            let eb = basis(b) * h;
            let v = (w(ea + eb) - w(ea - eb) - w(-ea + eb) + w(-ea - eb)) / (4.0 * h * h);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

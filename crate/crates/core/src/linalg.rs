//! Small dense helpers shared by the material and energy code.

use nalgebra::{Matrix3, SMatrix, Vector3};
use rand::Rng;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat9 = SMatrix<f64, 9, 9>;

/// Row-major flattening, `G[(i, j)] -> v[3 i + j]`.
pub fn flatten(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}

pub fn unflatten(v: &[f64]) -> Mat3 {
    debug_assert!(v.len() >= 9);
    Mat3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8])
}

/// Basis matrix `e_i ⊗ e_j` for flat index `3 i + j`.
pub fn basis(flat: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(flat / 3, flat % 3)] = 1.0;
    m
}

pub fn sym(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Transposed cofactor matrix, `adj(F) F = det(F) Id`.
pub fn adjugate(f: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
        f[(r0, c0)] * f[(r1, c1)] - f[(r0, c1)] * f[(r1, c0)]
    };
    Mat3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

/// Compensated (Neumaier) sum; cell averages run over up to ~10⁶ terms.
pub fn sum_compensated<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Evaluate `<G, M G>` for a flattened quadratic form.
pub fn quad9(m: &Mat9, g: &Mat3) -> f64 {
    let v = flatten(g);
    let mut acc = 0.0;
    for a in 0..9 {
        if v[a] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for b in 0..9 {
            row += m[(a, b)] * v[b];
        }
        acc += v[a] * row;
    }
    acc
}

/// `M G` reshaped back into a matrix.
pub fn apply9(m: &Mat9, g: &Mat3) -> Mat3 {
    let v = flatten(g);
    let mut out = [0.0; 9];
    for a in 0..9 {
        let mut s = 0.0;
        for b in 0..9 {
            s += m[(a, b)] * v[b];
        }
        out[a] = s;
    }
    unflatten(&out)
}

/// Uniformly distributed rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| gaussian(rng));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-8 {
            continue;
        }
        let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        return Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
    }
}

/// Standard normal sample (Box–Muller).
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Mat3 {
    Mat3::from_fn(|_, _| scale * gaussian(rng))
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(gaussian(rng), gaussian(rng), gaussian(rng));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        assert_eq!(sum_compensated([1.0, 1e100, 1.0, -1e100]), 2.0);
        let n = 1 << 20;
        let s = sum_compensated(std::iter::repeat_n(0.1, n));
        assert!((s - 0.1 * n as f64).abs() <= 1e-16 * n as f64);
    }
    use rand::SeedableRng;

    #[test]
    fn adjugate_matches_inverse_times_det() {
        let f = Mat3::new(1.2, 0.1, -0.3, 0.4, 0.9, 0.2, -0.1, 0.05, 1.1);
        let adj = adjugate(&f);
        let prod = adj * f;
        let d = f.determinant();
        assert!((prod - Mat3::identity() * d).norm() < 1e-14);
    }

    #[test]
    fn random_rotations_are_proper() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-14);
            assert!((r.determinant() - 1.0).abs() < 1e-14);
        }
    }
}

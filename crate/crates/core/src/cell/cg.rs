use crate::error::{Error, Result};

pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Values of `½ xᵀAx - bᵀx` after each iteration.
    #[cfg_attr(not(test), allow(dead_code))]
    pub energies: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for a symmetric positive semidefinite
/// operator whose kernel is removed by `precond`. Stops on relative residual.
pub(crate) fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            residual: 0.0,
            iterations: 0,
            energies: vec![0.0],
        });
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = 1.0;
    let mut energies = vec![0.0];
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            // search direction in the kernel: nothing left to minimize
            return Ok(CgOutcome {
                x,
                residual,
                iterations: it - 1,
                energies,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        energies.push(-0.5 * (dot(&x, b) + dot(&x, &r)));
        residual = dot(&r, &r).sqrt() / b_norm;
        if residual <= tol {
            return Ok(CgOutcome {
                x,
                residual,
                iterations: it,
                energies,
            });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let apply = |v: &[f64]| {
            (0..3)
                .map(|i| (0..3).map(|j| a[i][j] * v[j]).sum())
                .collect()
        };
        let out = pcg(apply, |r: &[f64]| r.to_vec(), &[1.0, 2.0, 3.0], 1e-14, 10).unwrap();
        let ax: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i][j] * out.x[j]).sum())
            .collect();
        for (l, r) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((l - r).abs() < 1e-12);
        }
        assert!(out.energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reports_non_convergence() {
        let apply = |v: &[f64]| {
            v.iter()
                .enumerate()
                .map(|(i, x)| (1.0 + i as f64) * x)
                .collect()
        };
        let err = pcg(apply, |r: &[f64]| r.to_vec(), &[1.0; 8], 1e-14, 2)
            .err()
            .unwrap();
        assert!(matches!(
            err,
            Error::ConvergenceFailure { iterations: 2, .. }
        ));
    }
}

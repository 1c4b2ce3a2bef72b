//! Monte-Carlo validation of the structural hypotheses on a material law.

use super::density::{compression_barrier, dist_so3_sq, MaterialLaw};
use crate::error::{Error, Result};
use crate::linalg::{random_matrix, random_rotation, random_unit, Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<CheckResult>,
    /// Empirical coercivity constant (smaller of the two branches).
    pub coercivity_constant: f64,
    /// Empirical bound `Q <= C |G|²`.
    pub form_bound: f64,
    pub exchange_range: (f64, f64),
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    samples: usize,
    failed: bool,
    witness: Option<String>,
    higher_is_worse: bool,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64, higher_is_worse: bool) -> Self {
        Self {
            name,
            tolerance,
            worst: if higher_is_worse { 0.0 } else { f64::INFINITY },
            samples: 0,
            failed: false,
            witness: None,
            higher_is_worse,
        }
    }

    fn record(&mut self, value: f64, ok: bool, witness: impl FnOnce() -> String) {
        self.samples += 1;
        let worse = if self.higher_is_worse {
            value > self.worst || value.is_nan()
        } else {
            value < self.worst || value.is_nan()
        };
        if worse {
            self.worst = value;
        }
        if !ok && !self.failed {
            self.failed = true;
            self.witness = Some(witness());
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name,
            passed: !self.failed,
            worst: self.worst,
            tolerance: self.tolerance,
            samples: self.samples,
            witness: self.witness,
        }
    }
}

fn random_y(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn same_energy(a: f64, b: f64, rel: f64) -> (bool, f64) {
    if a.is_infinite() || b.is_infinite() {
        return (a == b, if a == b { 0.0 } else { f64::INFINITY });
    }
    let diff = (a - b).abs();
    (diff <= rel * a.abs().max(1.0), diff / a.abs().max(1.0))
}

/// Samples `(y, F, ν, R)` and checks periodicity, coercivity, frame
/// indifference, normalization, the Taylor expansion with its quadratic
/// form, and the exchange bounds. Failures carry a witness; sampling never
/// aborts early.
pub fn validate_hypotheses(
    law: &dyn MaterialLaw,
    n_samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "validator needs at least 100 samples, got {n_samples}"
        )));
    }
    let params = law.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut h1 = Tracker::new("H1", 1e-12, true);
    let mut h2_quad = Tracker::new("H2.quadratic", 0.0, false);
    let mut h2_growth = Tracker::new("H2.growth", 1e-2, false);
    let mut h2_barrier = Tracker::new("H2.barrier", 1e-12, true);
    let mut h3 = Tracker::new("H3", 1e-10, true);
    let mut h4 = Tracker::new("H4", 1e-14, true);
    let mut h5_taylor = Tracker::new("H5.taylor", 1e-3, true);
    let mut h5_form = Tracker::new("H5.form", 1e-9, true);
    let mut grw_a = Tracker::new("grw-a", 0.0, false);

    let mut quad_samples = Vec::new();
    let mut growth_samples = Vec::new();
    let mut form_bound: f64 = 0.0;
    let (c1, c2) = law.exchange_bounds();
    let mut a_min = f64::INFINITY;
    let mut a_max = f64::NEG_INFINITY;

    for i in 0..n_samples {
        let y = random_y(&mut rng);
        let nu = random_unit(&mut rng);
        // alternate small strains around a random rotation with large, arbitrary matrices
        let f = match i % 4 {
            0 | 1 => {
                let scale = [0.05, 0.3][i % 2];
                random_rotation(&mut rng) * (Mat3::identity() + random_matrix(&mut rng, scale))
            }
            2 => random_matrix(&mut rng, 1.0),
            _ => {
                let mag = [3.0, 10.0, 30.0, 100.0][(i / 4) % 4];
                random_rotation(&mut rng)
                    * (Mat3::identity() * mag + random_matrix(&mut rng, 0.2 * mag))
            }
        };
        let w = law.w(y, &f, &nu);

        // H1
        let shift = [
            rng.random_range(-3..=3) as f64,
            rng.random_range(-3..=3) as f64,
            rng.random_range(-3..=3) as f64,
        ];
        let ys = [y[0] + shift[0], y[1] + shift[1], y[2] + shift[2]];
        let (ok_w, dev) = same_energy(w, law.w(ys, &f, &nu), 1e-12);
        let ok_a = law.a(ys) == law.a(y);
        h1.record(dev, ok_w && ok_a, || {
            format!("y={y:?} shifted by {shift:?}: W differs by {dev:.3e} or a(y) changes")
        });

        // H2
        let d2 = dist_so3_sq(&f);
        let det = f.determinant();
        if det > 0.0 && d2 > 1e-12 {
            if d2 <= 1.0 {
                quad_samples.push((w / d2, y, f, nu));
            } else {
                growth_samples.push((w / d2.powf(0.5 * params.p), y, f, nu));
            }
        }
        let h = compression_barrier(det, params.s);
        let gap = if h.is_infinite() {
            if w.is_infinite() {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (h - w).max(0.0) / h.max(1.0)
        };
        h2_barrier.record(gap, gap <= 1e-12, || {
            format!("W={w:.6e} below h(det F)={h:.6e} at det F={det:.6e}")
        });

        // H3
        let r = random_rotation(&mut rng);
        let (ok, dev) = same_energy(w, law.w(y, &(r * f), &(r * nu)), 1e-10);
        h3.record(dev, ok, || {
            format!("W(RF,Rν)-W(F,ν) relative {dev:.3e} at F={f:?}")
        });

        // H4
        let w_id = law.w(y, &Mat3::identity(), &(nu * rng.random_range(0.1..3.0)));
        h4.record(w_id.abs(), w_id.abs() <= 1e-14, || {
            format!("W(y, Id, ν) = {w_id:.3e} at y={y:?}")
        });

        // H5: remainder decay along t and the quadratic-form structure of Q
        let g = {
            let g = random_matrix(&mut rng, 1.0);
            g / g.norm()
        };
        let q = law.q(y, &g, &nu);
        let rem: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| {
                (law.w(y, &(Mat3::identity() + g * t), &nu) - 0.5 * t * t * q).abs() / (t * t)
            })
            .collect();
        let scale = 1.0 + q.abs();
        // cubic and quartic terms may cancel at one step, so require decay over the whole range
        let decays = rem[2] <= 0.5 * rem[0].max(rem[1]) + 1e-9 * scale;
        let final_rel = rem[2] / scale;
        h5_taylor.record(final_rel, decays && final_rel <= 1e-3, || {
            format!("remainders {rem:?} for G={g:?} do not vanish")
        });

        let g1 = random_matrix(&mut rng, 1.0);
        let g2 = random_matrix(&mut rng, 1.0);
        let lhs = law.q(y, &(g1 + g2), &nu) + law.q(y, &(g1 - g2), &nu);
        let rhs = 2.0 * law.q(y, &g1, &nu) + 2.0 * law.q(y, &g2, &nu);
        let pol = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300);
        let nonneg = q >= -1e-12;
        form_bound = form_bound.max(q / g.norm_squared());
        h5_form.record(pol, pol <= 1e-9 && nonneg && q.is_finite(), || {
            format!("polarization defect {pol:.3e} or Q={q:.3e} < 0 at y={y:?}")
        });

        // grw-a
        let a = law.a(y);
        a_min = a_min.min(a);
        a_max = a_max.max(a);
        let ok = c1 > 0.0 && a >= c1 && a <= c2;
        grw_a.record(a, ok, || {
            format!("a(y)={a} at y={y:?} violates 0 < C1={c1} <= a <= C2={c2}")
        });
    }

    let min_of = |v: &[(f64, [f64; 3], Mat3, Vec3)]| {
        v.iter()
            .copied()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(c, y, f, nu)| (c, format!("y={y:?}, F={f:?}, ν={nu:?}")))
    };
    let quad_min = min_of(&quad_samples);
    let growth_min = min_of(&growth_samples);
    let c_quad = quad_min.as_ref().map_or(f64::INFINITY, |m| m.0);
    let c_growth = growth_min.as_ref().map_or(f64::INFINITY, |m| m.0);
    h2_quad.record(c_quad, c_quad > 0.0, || {
        format!(
            "W/dist² = {c_quad:.3e} at {}",
            quad_min.as_ref().map_or("", |m| &m.1)
        )
    });
    h2_quad.samples = quad_samples.len();
    // the p-branch constant may not collapse relative to the quadratic one
    let ratio = c_growth / c_quad;
    h2_growth.record(ratio, c_growth > 0.0 && ratio >= 1e-2, || {
        format!(
            "W/dist^p = {c_growth:.3e} (ratio {ratio:.3e} to quadratic branch) at {}",
            growth_min.as_ref().map_or("", |m| &m.1)
        )
    });
    h2_growth.samples = growth_samples.len();

    Ok(HypothesisReport {
        checks: vec![
            h1.finish(),
            h2_quad.finish(),
            h2_growth.finish(),
            h2_barrier.finish(),
            h3.finish(),
            h4.finish(),
            h5_taylor.finish(),
            h5_form.finish(),
            grw_a.finish(),
        ],
        coercivity_constant: c_quad.min(c_growth),
        form_bound,
        exchange_range: (a_min, a_max),
    })
}

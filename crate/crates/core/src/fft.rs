//! Three-dimensional complex FFT over x-fastest row-major arrays.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub struct Fft3 {
    dims: [usize; 3],
    forward: [Option<Arc<dyn Fft<f64>>>; 3],
    inverse: [Option<Arc<dyn Fft<f64>>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| (n > 1).then(|| planner.plan_fft_forward(n)));
        let inverse = dims.map(|n| (n > 1).then(|| planner.plan_fft_inverse(n)));
        Self {
            dims,
            forward,
            inverse,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward, self.dims);
    }

    /// Forward transform of data that vanishes outside the index block
    /// `[0, support)`; lines known to be zero are skipped.
    pub fn forward_supported(&self, data: &mut [Complex64], support: [usize; 3]) {
        let support = std::array::from_fn(|d| support[d].min(self.dims[d]));
        self.run(data, &self.forward, support);
    }

    /// Inverse transform in place, normalized by `1/N`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse, self.dims);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn run(
        &self,
        data: &mut [Complex64],
        plans: &[Option<Arc<dyn Fft<f64>>>; 3],
        support: [usize; 3],
    ) {
        assert_eq!(data.len(), self.len());
        let [n0, n1, n2] = self.dims;
        if let Some(plan) = &plans[0] {
            if support[1] == n1 && support[2] == n2 {
                plan.process(data);
            } else {
                for k in 0..support[2] {
                    for j in 0..support[1] {
                        let base = n0 * (j + n1 * k);
                        plan.process(&mut data[base..base + n0]);
                    }
                }
            }
        }
        if let Some(plan) = &plans[1] {
            // one xz-plane slab at a time: lines along y for every x
            let mut buf = vec![Complex64::default(); n0 * n1];
            for k in 0..support[2] {
                let base = n0 * n1 * k;
                for j in 0..n1 {
                    for i in 0..n0 {
                        buf[i * n1 + j] = data[base + i + n0 * j];
                    }
                }
                plan.process(&mut buf);
                for j in 0..n1 {
                    for i in 0..n0 {
                        data[base + i + n0 * j] = buf[i * n1 + j];
                    }
                }
            }
        }
        if let Some(plan) = &plans[2] {
            let mut buf = vec![Complex64::default(); n0 * n2];
            for j in 0..n1 {
                for k in 0..n2 {
                    let base = n0 * (j + n1 * k);
                    for i in 0..n0 {
                        buf[i * n2 + k] = data[base + i];
                    }
                }
                plan.process(&mut buf);
                for k in 0..n2 {
                    let base = n0 * (j + n1 * k);
                    for i in 0..n0 {
                        data[base + i] = buf[i * n2 + k];
                    }
                }
            }
        }
    }
}

/// Angular wavenumber for index `m` on an axis of `n` samples and period `length`.
/// The Nyquist index of an even axis maps to zero so derivatives stay real.
pub fn wavenumber(m: usize, n: usize, length: f64) -> f64 {
    let signed = if 2 * m < n {
        m as f64
    } else if 2 * m == n {
        0.0
    } else {
        m as f64 - n as f64
    };
    2.0 * PI * signed / length
}

pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n).map(|m| wavenumber(m, n, length)).collect()
}

pub fn to_complex(real: &[f64]) -> Vec<Complex64> {
    real.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Spectral differentiation on a periodic box.
pub struct Spectral {
    fft: Fft3,
    k: [Vec<f64>; 3],
}

impl Spectral {
    pub fn new(dims: [usize; 3], lengths: [f64; 3]) -> Self {
        Self {
            fft: Fft3::new(dims),
            k: std::array::from_fn(|d| wavenumbers(dims[d], lengths[d])),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.fft.dims()
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.is_empty()
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    /// Wavenumbers along `axis`.
    pub fn axis_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    /// Calls `f(p, k)` for every linear index in storage order.
    pub fn for_each_k(&self, mut f: impl FnMut(usize, [f64; 3])) {
        let [n0, n1, n2] = self.dims();
        let mut p = 0;
        for i2 in 0..n2 {
            for i1 in 0..n1 {
                for i0 in 0..n0 {
                    f(p, [self.k[0][i0], self.k[1][i1], self.k[2][i2]]);
                    p += 1;
                }
            }
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut hat = to_complex(values);
        self.fft.forward(&mut hat);
        hat
    }

    pub fn inverse_real(&self, mut hat: Vec<Complex64>) -> Vec<f64> {
        self.fft.inverse(&mut hat);
        hat.into_iter().map(|z| z.re).collect()
    }

    pub fn gradient(&self, values: &[f64]) -> [Vec<f64>; 3] {
        let hat = self.forward_real(values);
        std::array::from_fn(|d| {
            if self.dims()[d] == 1 {
                return vec![0.0; values.len()];
            }
            let mut work = hat.clone();
            self.for_each_k(|p, k| work[p] *= Complex64::new(0.0, k[d]));
            self.inverse_real(work)
        })
    }

    pub fn divergence(&self, v: [&[f64]; 3]) -> Vec<f64> {
        let mut acc = vec![Complex64::default(); self.len()];
        for (d, comp) in v.iter().enumerate() {
            if self.dims()[d] == 1 {
                continue;
            }
            let hat = self.forward_real(comp);
            self.for_each_k(|p, k| acc[p] += hat[p] * Complex64::new(0.0, k[d]));
        }
        self.inverse_real(acc)
    }
}

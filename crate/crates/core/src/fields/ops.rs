use super::field::{Field, Rank};
use super::grid::{ravel, Grid};
use crate::error::{Error, Result};
use crate::fft::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientScheme {
    /// Fourier collocation; periodic grids only.
    Spectral,
    /// Second-order central differences, one-sided second-order closures on boxes.
    CentralDifference,
}

/// Gradient of a scalar (→ vector) or vector (→ matrix, `∂_j u_i` at `3 i + j`) field.
pub fn gradient(field: &Field, scheme: GradientScheme) -> Result<Field> {
    let out_rank = match field.rank() {
        Rank::Scalar => Rank::Vector3,
        Rank::Vector3 => Rank::Matrix3,
        Rank::Matrix3 => {
            return Err(Error::InvalidArgument("gradient of a matrix field".into()));
        }
    };
    if field.samples().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient input"));
    }
    let grid = *field.grid();
    let ncomp = field.rank().components();
    let mut comps = Vec::with_capacity(3 * ncomp);
    match scheme {
        GradientScheme::Spectral => {
            if !grid.is_periodic() {
                return Err(Error::InvalidArgument(
                    "spectral gradient needs a periodic cell grid".into(),
                ));
            }
            let spectral = Spectral::new(grid.dims(), grid.lengths());
            for c in 0..ncomp {
                comps.extend(spectral.gradient(field.component(c)));
            }
        }
        GradientScheme::CentralDifference => {
            for c in 0..ncomp {
                for d in 0..3 {
                    comps.push(central_difference(&grid, field.component(c), d));
                }
            }
        }
    }
    Field::from_components(grid, out_rank, comps)
}

fn central_difference(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let dims = grid.dims();
    let n = dims[axis];
    let h = grid.spacing(axis);
    let mut out = vec![0.0; values.len()];
    if n == 1 {
        return out;
    }
    let periodic = grid.is_periodic();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let idx = [i, j, k];
                let at = |m: usize| {
                    let mut q = idx;
                    q[axis] = m;
                    values[ravel(q, dims)]
                };
                let m = idx[axis];
                let v = if periodic {
                    (at((m + 1) % n) - at((m + n - 1) % n)) / (2.0 * h)
                } else if n == 2 {
                    (at(1) - at(0)) / h
                } else if m == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if m == n - 1 {
                    (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
                } else {
                    (at(m + 1) - at(m - 1)) / (2.0 * h)
                };
                out[ravel(idx, dims)] = v;
            }
        }
    }
    out
}

/// Trilinear interpolation on a box grid.
///
/// Points may sit up to one cell outside the box; inside that margin the
/// boundary cell's trilinear function is extended linearly. Returns one
/// vector of components per point.
pub fn interpolate(field: &Field, points: &[[f64; 3]]) -> Result<Vec<Vec<f64>>> {
    let Grid::Box(grid) = *field.grid() else {
        return Err(Error::InvalidArgument(
            "interpolation needs a box grid".into(),
        ));
    };
    let dims = grid.dims();
    let ncomp = field.rank().components();
    let npts = field.n_points();
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for d in 0..3 {
            let h = grid.spacing(d);
            let lo = grid.origin()[d] - h;
            let hi = grid.origin()[d] + grid.side_lengths()[d] + h;
            if !x[d].is_finite() || x[d] < lo || x[d] > hi {
                return Err(Error::OutOfDomain { point: *x });
            }
            if dims[d] == 1 {
                continue;
            }
            let s = (x[d] - grid.origin()[d]) / h - 0.5;
            let cell = s.floor().clamp(0.0, (dims[d] - 2) as f64) as usize;
            base[d] = cell;
            t[d] = s - cell as f64;
        }
        let mut vals = vec![0.0; ncomp];
        for corner in 0..8 {
            let offs = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut skip = false;
            for d in 0..3 {
                if dims[d] == 1 {
                    if offs[d] == 1 {
                        skip = true;
                    }
                    continue;
                }
                idx[d] = base[d] + offs[d];
                w *= if offs[d] == 1 { t[d] } else { 1.0 - t[d] };
            }
            if skip || w == 0.0 {
                continue;
            }
            let p = ravel(idx, dims);
            for (c, v) in vals.iter_mut().enumerate() {
                *v += w * field.samples()[c * npts + p];
            }
        }
        out.push(vals);
    }
    Ok(out)
}

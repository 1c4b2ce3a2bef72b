//! C interface to the mehom toolkit.
//!
//! Every fallible call returns a `MehomStatus`; on failure the message is kept
//! per thread and read back with `mehom_last_error`. Handles are opaque and
//! must be released with their matching `_free` function.

use mehom::cell::{ExchangeCorrectors, HomogenizedElastic, NuKey};
use mehom::cli::{run, RunConfig, RunError};
use mehom::fields::{extend_by_zero, BoxGrid, CellGrid, DomainMask, Field, Grid, Rank};
use mehom::linalg::{Mat3, Vec3};
use mehom::material::{
    reference_density_d1, reference_density_d2, validate_hypotheses, DensitySpec, MaterialLaw,
    PhaseLayout,
};
use mehom::strayfield::stray_energy_of_field;
use mehom::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MehomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Inadmissible = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MehomDensityKind {
    D1 = 1,
    D2 = 2,
}

/// A material law.
pub struct MehomDensity {
    spec: Arc<DensitySpec>,
}

/// Homogenized elastic form with a per-direction tensor cache.
pub struct MehomElastic {
    inner: HomogenizedElastic,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MehomStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ConvergenceFailure { .. }
            | Error::IndefiniteForm { .. }
            | Error::StabilityBound { .. }
            | Error::MissingTensor { .. } => MehomStatus::Solver,
            Error::Inadmissible(_) | Error::TubularNeighborhood { .. } => MehomStatus::Inadmissible,
            Error::Config(_) => MehomStatus::Config,
            Error::Io(_) | Error::Format(_) => MehomStatus::Io,
            _ => MehomStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MehomStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and returns the status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MehomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MehomStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MehomStatus::Panic
        }
    }
}

unsafe fn read<const N: usize>(ptr: *const f64, what: &str) -> Result<[f64; N], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(std::slice::from_raw_parts(ptr, N));
    Ok(out)
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(MehomStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(ptr: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

fn mat3(v: [f64; 9]) -> Mat3 {
    Mat3::from_row_slice(&v)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mehom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn mehom_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Builds a reference density. Layouts use the CLI syntax, e.g. `2.5` or
/// `laminate(axis=1, fraction=0.5, values=[1, 10])`. `kappa` is ignored for
/// `D1`; `exchange` may be NULL for a unit coefficient.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mehom_density_new(
    kind: MehomDensityKind,
    stiffness: *const c_char,
    kappa: *const c_char,
    exchange: *const c_char,
    p: f64,
    s: f64,
    out: *mut *mut MehomDensity,
) -> MehomStatus {
    guard(|| {
        let stiffness = PhaseLayout::parse(text(stiffness, "stiffness")?)?;
        let mut spec = match kind {
            MehomDensityKind::D1 => reference_density_d1(stiffness, p, s)?,
            MehomDensityKind::D2 => {
                let kappa = PhaseLayout::parse(text(kappa, "kappa")?)?;
                reference_density_d2(stiffness, kappa, p, s)?
            }
        };
        if !exchange.is_null() {
            spec = spec.with_exchange(PhaseLayout::parse(text(exchange, "exchange")?)?);
        }
        let boxed = Box::new(MehomDensity {
            spec: Arc::new(spec),
        });
        write(out, Box::into_raw(boxed), "out")
    })
}

/// # Safety
/// `density` must come from `mehom_density_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mehom_density_free(density: *mut MehomDensity) {
    if !density.is_null() {
        drop(Box::from_raw(density));
    }
}

/// Stored energy `W(y, F, ν)`; `f` is row-major 3x3. Infinite when `det F <= 0`.
///
/// # Safety
/// `y` and `nu` point to 3 doubles, `f` to 9, `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn mehom_density_w(
    density: *const MehomDensity,
    y: *const f64,
    f: *const f64,
    nu: *const f64,
    out: *mut f64,
) -> MehomStatus {
    guard(|| {
        let d = handle(density, "density")?;
        let v = d.spec.w(
            read::<3>(y, "y")?,
            &mat3(read::<9>(f, "f")?),
            &Vec3::from(read::<3>(nu, "nu")?),
        );
        write(out, v, "out")
    })
}

/// Quadratic form `Q(y, G, ν)` at the identity.
///
/// # Safety
/// As for `mehom_density_w`.
#[no_mangle]
pub unsafe extern "C" fn mehom_density_q(
    density: *const MehomDensity,
    y: *const f64,
    g: *const f64,
    nu: *const f64,
    out: *mut f64,
) -> MehomStatus {
    guard(|| {
        let d = handle(density, "density")?;
        let v = d.spec.q(
            read::<3>(y, "y")?,
            &mat3(read::<9>(g, "g")?),
            &Vec3::from(read::<3>(nu, "nu")?),
        );
        write(out, v, "out")
    })
}

/// Runs the hypothesis validator and reports whether every check passed.
///
/// # Safety
/// `density` must be a live handle; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mehom_density_validate(
    density: *const MehomDensity,
    samples: usize,
    seed: u64,
    passed: *mut bool,
) -> MehomStatus {
    guard(|| {
        let d = handle(density, "density")?;
        let report = validate_hypotheses(d.spec.as_ref(), samples, seed)?;
        write(passed, report.all_passed(), "passed")
    })
}

/// Homogenized exchange tensor on an `n³` cell, written row-major to `out[9]`.
///
/// # Safety
/// `density` must be a live handle; `out` must hold 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn mehom_exchange_tensor(
    density: *const MehomDensity,
    cell_n: usize,
    tol: f64,
    out: *mut f64,
) -> MehomStatus {
    guard(|| {
        let d = handle(density, "density")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = CellGrid::new(cell_n)?;
        let a = Field::from_scalar_fn(Grid::Cell(grid), |y| d.spec.a(y))?;
        let t = ExchangeCorrectors::solve(&a, tol, None)?
            .homogenized()
            .tensor();
        let out = std::slice::from_raw_parts_mut(out, 9);
        for (k, v) in out.iter_mut().enumerate() {
            *v = t[(k / 3, k % 3)];
        }
        Ok(())
    })
}

/// Homogenized elastic form on an `n³` cell; tensors are solved per direction
/// on first use and cached.
///
/// # Safety
/// `density` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mehom_elastic_new(
    density: *const MehomDensity,
    cell_n: usize,
    tol: f64,
    out: *mut *mut MehomElastic,
) -> MehomStatus {
    guard(|| {
        let d = handle(density, "density")?;
        if tol.is_nan() || tol <= 0.0 {
            return Err(Failure(
                MehomStatus::InvalidArgument,
                format!("tol must be positive, got {tol}"),
            ));
        }
        let law: Arc<dyn MaterialLaw> = d.spec.clone();
        let inner = HomogenizedElastic::new(law, CellGrid::new(cell_n)?, tol, NuKey::Exact);
        write(out, Box::into_raw(Box::new(MehomElastic { inner })), "out")
    })
}

/// # Safety
/// `elastic` must come from `mehom_elastic_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mehom_elastic_free(elastic: *mut MehomElastic) {
    if !elastic.is_null() {
        drop(Box::from_raw(elastic));
    }
}

/// 9x9 matrix of `A ↦ Q_hom(A, ν)` on row-major flattened `A`, row-major in `out[81]`.
///
/// # Safety
/// `nu` points to 3 doubles and `out` to 81.
#[no_mangle]
pub unsafe extern "C" fn mehom_elastic_tensor(
    elastic: *const MehomElastic,
    nu: *const f64,
    out: *mut f64,
) -> MehomStatus {
    guard(|| {
        let h = handle(elastic, "elastic")?;
        let t = h.inner.tensor(&Vec3::from(read::<3>(nu, "nu")?))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let out = std::slice::from_raw_parts_mut(out, 81);
        for (k, v) in out.iter_mut().enumerate() {
            *v = t[(k / 9, k % 9)];
        }
        Ok(())
    })
}

/// `Q_hom(A, ν)` for row-major `a[9]`.
///
/// # Safety
/// `a` points to 9 doubles, `nu` to 3, `out` to one.
#[no_mangle]
pub unsafe extern "C" fn mehom_elastic_value(
    elastic: *const MehomElastic,
    a: *const f64,
    nu: *const f64,
    out: *mut f64,
) -> MehomStatus {
    guard(|| {
        let h = handle(elastic, "elastic")?;
        let v = h
            .inner
            .value(&mat3(read::<9>(a, "a")?), &Vec3::from(read::<3>(nu, "nu")?))?;
        write(out, v, "out")
    })
}

/// Stray-field energy of `m` on the unit box with `dims` cells.
///
/// `m` holds `3·N` doubles, component-major with x fastest within each
/// component. `mask` holds `N` bytes (nonzero = inside) or is NULL to use `m`
/// as given.
///
/// # Safety
/// Buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mehom_stray_energy(
    dims: *const usize,
    m: *const f64,
    mask: *const u8,
    mu0: f64,
    pad_factor: f64,
    out: *mut f64,
) -> MehomStatus {
    guard(|| {
        if dims.is_null() || m.is_null() {
            return Err(null("dims or m"));
        }
        let dims: [usize; 3] = std::slice::from_raw_parts(dims, 3).try_into().unwrap();
        let grid = BoxGrid::unit(dims)?;
        let n = grid.n_points();
        let field = Field::new(
            Grid::Box(grid),
            Rank::Vector3,
            std::slice::from_raw_parts(m, 3 * n).to_vec(),
        )?;
        let source = if mask.is_null() {
            field
        } else {
            let inside = std::slice::from_raw_parts(mask, n)
                .iter()
                .map(|&b| b != 0)
                .collect();
            extend_by_zero(&field, &DomainMask::new(grid, inside)?)?
        };
        write(out, stray_energy_of_field(&source, mu0, pad_factor)?, "out")
    })
}

/// Runs a TOML configuration (the CLI file format, `subcommand` required) and
/// writes its outputs under `out_dir`. `exit_code` receives the CLI exit code:
/// 0 pass, 1 check failure, 2 configuration error, 3 solver failure. The
/// returned status is `Ok` whenever a run completed, passed or not.
///
/// # Safety
/// Strings must be NUL-terminated; `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mehom_run_toml(
    config: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> MehomStatus {
    guard(|| {
        if exit_code.is_null() {
            return Err(null("exit_code"));
        }
        let mut cfg = RunConfig::from_toml(text(config, "config")?)?;
        cfg.out = PathBuf::from(text(out_dir, "out_dir")?);
        match run(&cfg) {
            Ok(summary) => write(exit_code, if summary.passed { 0 } else { 1 }, "exit_code"),
            Err(e) => {
                exit_code.write(e.exit_code());
                let status = match e {
                    RunError::Config(_) => MehomStatus::Config,
                    RunError::Stage { .. } => MehomStatus::Solver,
                };
                Err(Failure(status, e.to_string()))
            }
        }
    })
}

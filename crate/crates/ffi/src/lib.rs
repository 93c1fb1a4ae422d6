//! C interface to `blochsum`.
//!
//! Every function returns a [`BsStatus`]; on failure the message is
//! available from [`bs_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/`*_compute` and released by the matching
//! `*_free`. Band labels are 1-based, directions 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use blochsum::delta::{delta_levels, delta_pi};
use blochsum::model::TrigTerm;
use blochsum::runner::{parse_config, run, write_outputs, Experiment};
use blochsum::trace::{default_confluence_tol, divided_difference, trace_per_unit_volume, FermiDirac};
use blochsum::{
    build_basis, build_potential, fiber_spectrum, momentum_matrix, sample_brillouin, ContourSpec,
    Error, FiberSpectrum, FourierPotential, MomentumMatrix, PotentialFamily, PotentialSpec,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Degenerate = 4,
    NotConverged = 5,
    Numerical = 6,
    Config = 7,
    Io = 8,
    Panic = 9,
}

/// A periodic potential.
pub struct BsPotential {
    inner: FourierPotential,
}

/// Eigenvalues and eigenvectors of one fiber.
pub struct BsSpectrum {
    inner: FiberSpectrum,
}

/// Momentum matrix `π̂_st` in one direction.
pub struct BsMomentum {
    inner: MomentumMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: BsStatus,
    message: String,
}

impl Failure {
    fn new(status: BsStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

fn status_of(e: &Error) -> BsStatus {
    match e {
        Error::AtKPoint { source, .. } | Error::AtTuple { source, .. } => status_of(source),
        Error::Degenerate { .. } => BsStatus::Degenerate,
        Error::Divergence { .. }
        | Error::TailTooLarge { .. }
        | Error::NotBracketed { .. }
        | Error::DegenerateFit(_) => BsStatus::NotConverged,
        Error::Eigensolver(_)
        | Error::SingularResolvent { .. }
        | Error::NonReal { .. }
        | Error::MissingCoefficients => BsStatus::Numerical,
        Error::Config(_) => BsStatus::Config,
        _ => BsStatus::InvalidArgument,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(status_of(&e), e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            BsStatus::Ok
        }
        Ok(Err(fail)) => {
            set_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            BsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(BsStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `p` must be null or point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or valid for a write of `T`.
unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` must be null or a live handle created by this library.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `p` must be null or a NUL-terminated string.
unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(BsStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn bs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn new_potential(spec: PotentialSpec, out: *mut *mut BsPotential) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let inner = build_potential(&spec)?;
    // SAFETY: checked non-null above
    unsafe { out.write(Box::into_raw(Box::new(BsPotential { inner }))) };
    Ok(())
}

/// Trigonometric polynomial `Σ cos_i cos(2π m_i·x) + sin_i sin(2π m_i·x) + shift`.
/// `freqs` holds `n * dim` integers, row by row; `sin_coeffs` may be null.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_potential_trig(
    dim: usize,
    freqs: *const i64,
    cos_coeffs: *const f64,
    sin_coeffs: *const f64,
    n: usize,
    shift: f64,
    out: *mut *mut BsPotential,
) -> BsStatus {
    guard(|| {
        if !(1..=3).contains(&dim) {
            return Err(Failure::new(BsStatus::InvalidArgument, "dim must be 1, 2 or 3"));
        }
        let f = slice(freqs, n * dim, "freqs")?;
        let c = slice(cos_coeffs, n, "cos_coeffs")?;
        let s = if sin_coeffs.is_null() { None } else { Some(slice(sin_coeffs, n, "sin_coeffs")?) };
        let terms = (0..n)
            .map(|i| {
                let mut freq = [0i64; 3];
                freq[..dim].copy_from_slice(&f[i * dim..(i + 1) * dim]);
                TrigTerm {
                    freq,
                    cos: c[i],
                    sin: s.map_or(0.0, |s| s[i]),
                }
            })
            .collect();
        new_potential(
            PotentialSpec::new(dim, PotentialFamily::TrigPolynomial { terms }, shift),
            out,
        )
    })
}

/// Real Gaussian-decay coefficients `A exp(-|m|²/2w²)` for `0 < |m|_∞ <= cutoff`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_potential_gaussian(
    dim: usize,
    amplitude: f64,
    width: f64,
    cutoff: i64,
    shift: f64,
    out: *mut *mut BsPotential,
) -> BsStatus {
    guard(|| {
        new_potential(
            PotentialSpec::gaussian(dim, amplitude, width, cutoff, shift),
            out,
        )
    })
}

/// One-dimensional delta comb truncated to `|m| <= cutoff`, `V̂(m) = strength`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bs_potential_truncated_delta(
    strength: f64,
    cutoff: i64,
    shift: f64,
    out: *mut *mut BsPotential,
) -> BsStatus {
    guard(|| new_potential(PotentialSpec::truncated_delta(strength, cutoff, shift), out))
}

/// # Safety
/// `p` must be null or a handle from a `bs_potential_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn bs_potential_free(p: *mut BsPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Diagonalizes `h(k)` in the basis `|m|_∞ <= m_cut`. `k` has the potential's
/// dimension; `n_bands = 0` keeps the trusted lower half of the spectrum.
///
/// # Safety
/// `potential` must be a live handle, `k` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_spectrum_compute(
    potential: *const BsPotential,
    m_cut: i64,
    k: *const f64,
    n_bands: usize,
    out: *mut *mut BsSpectrum,
) -> BsStatus {
    guard(|| {
        let v = &borrow(potential, "potential")?.inner;
        let k = slice(k, v.dim(), "k")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let basis = build_basis(v.dim(), m_cut)?;
        let inner = fiber_spectrum(v, &basis, k, (n_bands > 0).then_some(n_bands))?;
        out.write(Box::into_raw(Box::new(BsSpectrum { inner })));
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_spectrum_band_count(s: *const BsSpectrum, count: *mut usize) -> BsStatus {
    guard(|| write(count, borrow(s, "spectrum")?.inner.n_bands(), "count"))
}

/// Copies the eigenvalues, ascending, into `values[0..len]`; `len` must be at
/// least the band count.
///
/// # Safety
/// `s` must be a live handle and `values` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_spectrum_eigenvalues(
    s: *const BsSpectrum,
    values: *mut f64,
    len: usize,
) -> BsStatus {
    guard(|| {
        let e = borrow(s, "spectrum")?.inner.eigenvalues();
        if len < e.len() {
            return Err(Failure::new(
                BsStatus::OutOfRange,
                format!("buffer holds {len} values, spectrum has {}", e.len()),
            ));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        ptr::copy_nonoverlapping(e.as_ptr(), values, e.len());
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`bs_spectrum_compute`], freed once.
#[no_mangle]
pub unsafe extern "C" fn bs_spectrum_free(s: *mut BsSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_momentum_compute(
    s: *const BsSpectrum,
    alpha: usize,
    out: *mut *mut BsMomentum,
) -> BsStatus {
    guard(|| {
        let spec = &borrow(s, "spectrum")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = momentum_matrix(spec, alpha)?;
        out.write(Box::into_raw(Box::new(BsMomentum { inner })));
        Ok(())
    })
}

/// Entry `π̂_st` with 1-based band labels.
///
/// # Safety
/// `m` must be a live handle; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_momentum_entry(
    m: *const BsMomentum,
    s: usize,
    t: usize,
    re: *mut f64,
    im: *mut f64,
) -> BsStatus {
    guard(|| {
        let pi = &borrow(m, "momentum")?.inner;
        let n = pi.n_bands();
        if s == 0 || t == 0 || s > n || t > n {
            return Err(Failure::new(
                BsStatus::OutOfRange,
                format!("entry ({s}, {t}) outside 1..={n}"),
            ));
        }
        let z = pi.entry(s, t);
        write(re, z.re, "re")?;
        write(im, z.im, "im")
    })
}

/// # Safety
/// `m` must be null or a handle from [`bs_momentum_compute`], freed once.
#[no_mangle]
pub unsafe extern "C" fn bs_momentum_free(m: *mut BsMomentum) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Fermi–Dirac divided difference `f[x_1, ..., x_n]` with `f = 1/(1+e^{β(x-μ)})`.
///
/// # Safety
/// `nodes` readable for `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_divided_difference_fd(
    beta: f64,
    mu: f64,
    nodes: *const f64,
    n: usize,
    out: *mut f64,
) -> BsStatus {
    guard(|| {
        let nodes = slice(nodes, n, "nodes")?;
        let f = FermiDirac::new(beta, mu)?;
        write(out, divided_difference(&f, nodes, default_confluence_tol(&f))?, "out")
    })
}

/// Trace per unit volume of `f_FD(h) (p_{α1}+k)(h-z)^{-1}...` by band sums over
/// bands `1..=cutoff`, on a Monkhorst–Pack grid with `k_per_axis` points per axis.
///
/// # Safety
/// `potential` must be a live handle, `directions` readable for `n_directions`
/// values, `re`/`im` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_trace_band_sum(
    potential: *const BsPotential,
    m_cut: i64,
    beta: f64,
    mu: f64,
    directions: *const usize,
    n_directions: usize,
    cutoff: usize,
    k_per_axis: usize,
    re: *mut f64,
    im: *mut f64,
) -> BsStatus {
    guard(|| {
        let v = &borrow(potential, "potential")?.inner;
        let dirs = slice(directions, n_directions, "directions")?;
        let basis = build_basis(v.dim(), m_cut)?;
        let contour = ContourSpec::with_defaults(beta, mu, mu)?;
        let grid = sample_brillouin(v.dim(), k_per_axis)?;
        let t = trace_per_unit_volume(v, &basis, &contour, dirs, cutoff, &grid)?;
        write(re, t.value.re, "re")?;
        write(im, t.value.im, "im")
    })
}

/// Exact momentum element `π̂_j` between the ground state and odd level `j` of
/// the periodic delta model with coupling `g`.
///
/// # Safety
/// `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_delta_pi(g: f64, j: usize, re: *mut f64, im: *mut f64) -> BsStatus {
    guard(|| {
        let z = delta_pi(&delta_levels(g, 1)?, j)?.exact;
        write(re, z.re, "re")?;
        write(im, z.im, "im")
    })
}

/// Runs a named experiment from config text. Writes `report.json` and CSV files
/// to `out_dir` unless it is null. `passed` receives whether all checks held;
/// a failed check is not an error.
///
/// # Safety
/// Strings must be NUL-terminated; `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn bs_run_experiment(
    experiment: *const c_char,
    config_text: *const c_char,
    out_dir: *const c_char,
    passed: *mut bool,
) -> BsStatus {
    guard(|| {
        let ex: Experiment = string(experiment, "experiment")?.parse()?;
        let config = parse_config(string(config_text, "config_text")?, ex)?;
        if passed.is_null() {
            return Err(null("passed"));
        }
        let outcome = run(&config)?;
        if !out_dir.is_null() {
            let dir = string(out_dir, "out_dir")?;
            write_outputs(&outcome, Path::new(dir))
                .map_err(|e| Failure::new(BsStatus::Io, format!("{dir}: {e}")))?;
        }
        passed.write(outcome.report.passed);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_status_mapping() {
        assert_eq!(status_of(&Error::Config("x".into())), BsStatus::Config);
        let nested = Error::AtKPoint {
            index: 0,
            k: vec![0.0],
            source: Box::new(Error::Divergence {
                iterations: 3,
                last: 0.0,
            }),
        };
        assert_eq!(status_of(&nested), BsStatus::NotConverged);
        assert_eq!(
            status_of(&Error::InvalidParameter("x".into())),
            BsStatus::InvalidArgument
        );
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, BsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(bs_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(guard(|| Ok(())), BsStatus::Ok);
        assert!(bs_last_error().is_null());
    }
}

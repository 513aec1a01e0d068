//! C interface to the teleportation simulator.
//!
//! Every function returns a [`CvtStatus`] and writes results through out
//! pointers. Channel ensembles live behind the opaque [`CvtEnsemble`] handle,
//! created by `cvt_ensemble_sample` or `cvt_ensemble_from_samples` and
//! released with `cvt_ensemble_free`. Panics never cross the boundary; they
//! surface as `CVT_STATUS_INTERNAL`.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use cvteleport::atmosphere::{
    exceedance, sample_transmittance_ensemble, EllipticBeamParams, ThetaConvention,
    TransmittanceEnsemble,
};
use cvteleport::gaussian_teleport::{
    adaptive_fidelity, crossover_squeezing, fidelity_closed_form, fidelity_det_form,
    optimal_squeezing, Squeezing, TeleportParams,
};
use cvteleport::strategies::{
    mean_fidelity_dual, mean_fidelity_single, MeanFidelityResult, Postselection, SchemeMode,
    SchemeSpec, StrategyError,
};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvtStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was outside its domain.
    InvalidArgument = 2,
    /// A numerical routine failed or produced an inconsistent value.
    Numerical = 3,
    /// No sample survived the postselection threshold.
    EmptyAfterPostselection = 4,
    /// The caller's buffer cannot hold the result.
    BufferTooSmall = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

/// Teleportation schemes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvtScheme {
    DirectSingle = 0,
    AdaptiveSingle = 1,
    DirectDual = 2,
    AdaptiveDual = 3,
}

/// Enum inputs arrive as plain integers so an out-of-range value from C is
/// an error instead of undefined behavior.
fn scheme_mode(raw: i32) -> Result<SchemeMode, CvtStatus> {
    match raw {
        x if x == CvtScheme::DirectSingle as i32 => Ok(SchemeMode::DirectSingle),
        x if x == CvtScheme::AdaptiveSingle as i32 => Ok(SchemeMode::AdaptiveSingle),
        x if x == CvtScheme::DirectDual as i32 => Ok(SchemeMode::DirectDual),
        x if x == CvtScheme::AdaptiveDual as i32 => Ok(SchemeMode::AdaptiveDual),
        _ => Err(CvtStatus::InvalidArgument),
    }
}

/// Sign convention of the beam-shape fluctuation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvtThetaConvention {
    Broadening = 0,
    Narrowing = 1,
}

/// Channel constants in SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvtBeamParams {
    pub wavelength: f64,
    pub w0: f64,
    pub length: f64,
    pub aperture: f64,
    pub eta_m: f64,
    pub cn2: f64,
    /// A `CvtThetaConvention` value.
    pub theta_convention: i32,
}

impl TryFrom<CvtBeamParams> for EllipticBeamParams {
    type Error = CvtStatus;

    fn try_from(p: CvtBeamParams) -> Result<Self, CvtStatus> {
        let theta_convention = match p.theta_convention {
            x if x == CvtThetaConvention::Broadening as i32 => ThetaConvention::Broadening,
            x if x == CvtThetaConvention::Narrowing as i32 => ThetaConvention::Narrowing,
            _ => return Err(CvtStatus::InvalidArgument),
        };
        Ok(EllipticBeamParams {
            wavelength: p.wavelength,
            w0: p.w0,
            length: p.length,
            aperture: p.aperture,
            eta_m: p.eta_m,
            cn2: p.cn2,
            theta_convention,
        })
    }
}

/// Mean fidelity with its Monte Carlo standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvtMeanFidelity {
    pub mean_fidelity: f64,
    pub std_error: f64,
    /// Fraction of events kept by the postselection.
    pub efficiency: f64,
    pub n_used: usize,
}

impl From<MeanFidelityResult> for CvtMeanFidelity {
    fn from(m: MeanFidelityResult) -> Self {
        CvtMeanFidelity {
            mean_fidelity: m.mean_fidelity,
            std_error: m.std_error,
            efficiency: m.retained_fraction,
            n_used: m.n_used,
        }
    }
}

/// Opaque handle to a sampled transmission ensemble.
pub struct CvtEnsemble(TransmittanceEnsemble);

fn guard(f: impl FnOnce() -> Result<(), CvtStatus>) -> CvtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvtStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => CvtStatus::Internal,
    }
}

/// # Safety
/// `out` must be null or valid for writes.
unsafe fn write<T>(out: *mut T, value: T) -> Result<(), CvtStatus> {
    if out.is_null() {
        return Err(CvtStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `e` must be null or a live handle.
unsafe fn ensemble<'a>(e: *const CvtEnsemble) -> Result<&'a TransmittanceEnsemble, CvtStatus> {
    e.as_ref().map(|h| &h.0).ok_or(CvtStatus::NullPointer)
}

fn teleport_params(r: f64, t_a: f64, t_b: f64) -> Result<TeleportParams, CvtStatus> {
    TeleportParams::new(r, t_a, t_b).map_err(|_| CvtStatus::InvalidArgument)
}

fn strategy_status(e: StrategyError) -> CvtStatus {
    match e {
        StrategyError::EmptyAfterPostselection { .. } => CvtStatus::EmptyAfterPostselection,
        StrategyError::LengthMismatch { .. }
        | StrategyError::ChannelCount { .. }
        | StrategyError::Threshold(_)
        | StrategyError::Params(_)
        | StrategyError::UnknownMode(_) => CvtStatus::InvalidArgument,
    }
}

/// Writes a squeezing value; an unbounded optimum sets `*out_unbounded` and
/// writes infinity to `*out_r`.
unsafe fn write_squeezing(s: Squeezing, out_r: *mut f64, out_unbounded: *mut bool) -> Result<(), CvtStatus> {
    if out_r.is_null() || out_unbounded.is_null() {
        return Err(CvtStatus::NullPointer);
    }
    match s {
        Squeezing::Finite(r) => {
            write(out_r, r)?;
            write(out_unbounded, false)
        }
        Squeezing::Unbounded => {
            write(out_r, f64::INFINITY)?;
            write(out_unbounded, true)
        }
    }
}

/// Static, NUL-terminated description of a `CvtStatus` value.
#[no_mangle]
pub extern "C" fn cvt_status_message(status: i32) -> *const c_char {
    let known = [
        (CvtStatus::Ok, &b"ok\0"[..]),
        (CvtStatus::NullPointer, b"null pointer argument\0"),
        (CvtStatus::InvalidArgument, b"argument out of range\0"),
        (CvtStatus::Numerical, b"numerical failure\0"),
        (CvtStatus::EmptyAfterPostselection, b"no sample survives the threshold\0"),
        (CvtStatus::BufferTooSmall, b"buffer too small\0"),
        (CvtStatus::Internal, b"internal error\0"),
    ];
    let msg = known
        .iter()
        .find(|(code, _)| *code as i32 == status)
        .map_or(&b"unknown status\0"[..], |(_, m)| m);
    msg.as_ptr().cast()
}

/// Fidelity for squeezing `r` and amplitude transmissions `t_a`, `t_b`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_fidelity(r: f64, t_a: f64, t_b: f64, out: *mut f64) -> CvtStatus {
    guard(|| write(out, fidelity_closed_form(&teleport_params(r, t_a, t_b)?)))
}

/// Fidelity from the output covariance determinant; agrees with
/// `cvt_fidelity` to rounding.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_fidelity_det(r: f64, t_a: f64, t_b: f64, out: *mut f64) -> CvtStatus {
    guard(|| write(out, fidelity_det_form(&teleport_params(r, t_a, t_b)?)))
}

/// Squeezing that maximizes the fidelity. When `t_a == t_b` the fidelity
/// grows without a finite optimum: `*out_unbounded` is set and `*out_r` is
/// infinity.
///
/// # Safety
/// `out_r` and `out_unbounded` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_optimal_squeezing(
    t_a: f64,
    t_b: f64,
    out_r: *mut f64,
    out_unbounded: *mut bool,
) -> CvtStatus {
    guard(|| {
        let s = optimal_squeezing(t_a, t_b).map_err(|_| CvtStatus::InvalidArgument)?;
        write_squeezing(s, out_r, out_unbounded)
    })
}

/// Fidelity of the adaptive scheme, where both modes see transmission `t`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_adaptive_fidelity(r: f64, t: f64, out: *mut f64) -> CvtStatus {
    guard(|| {
        teleport_params(r, t, t)?;
        write(out, adaptive_fidelity(r, t))
    })
}

/// Squeezing above which the adaptive scheme beats the direct one at
/// transmission `t_b`; unbounded for `t_b == 1`.
///
/// # Safety
/// `out_r` and `out_unbounded` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_crossover_squeezing(
    t_b: f64,
    out_r: *mut f64,
    out_unbounded: *mut bool,
) -> CvtStatus {
    guard(|| {
        let s = crossover_squeezing(t_b).map_err(|_| CvtStatus::InvalidArgument)?;
        write_squeezing(s, out_r, out_unbounded)
    })
}

/// Samples `n` transmissions of the channel. The result depends only on
/// `params`, `n` and `seed`.
///
/// # Safety
/// `params` must point to a valid struct and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_sample(
    params: *const CvtBeamParams,
    n: usize,
    seed: u64,
    out: *mut *mut CvtEnsemble,
) -> CvtStatus {
    guard(|| {
        let p = EllipticBeamParams::try_from(*params.as_ref().ok_or(CvtStatus::NullPointer)?)?;
        if out.is_null() {
            return Err(CvtStatus::NullPointer);
        }
        p.validate().map_err(|_| CvtStatus::InvalidArgument)?;
        if n == 0 {
            return Err(CvtStatus::InvalidArgument);
        }
        let e = sample_transmittance_ensemble(&p, n, seed).map_err(|_| CvtStatus::Numerical)?;
        write(out, Box::into_raw(Box::new(CvtEnsemble(e))))
    })
}

/// Wraps caller-provided transmissions, each in `[0, 1]`.
///
/// # Safety
/// `samples` must point to `len` readable values and `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_from_samples(
    samples: *const f64,
    len: usize,
    seed: u64,
    out: *mut *mut CvtEnsemble,
) -> CvtStatus {
    guard(|| {
        if samples.is_null() || out.is_null() {
            return Err(CvtStatus::NullPointer);
        }
        let values = std::slice::from_raw_parts(samples, len).to_vec();
        let e = TransmittanceEnsemble::from_samples(values, seed, None)
            .map_err(|_| CvtStatus::InvalidArgument)?;
        write(out, Box::into_raw(Box::new(CvtEnsemble(e))))
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_len(e: *const CvtEnsemble) -> usize {
    ensemble(e).map_or(0, |e| e.len())
}

/// Mean and standard deviation of the transmission.
///
/// # Safety
/// `e` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_moments(
    e: *const CvtEnsemble,
    out_mean: *mut f64,
    out_std_dev: *mut f64,
) -> CvtStatus {
    guard(|| {
        let e = ensemble(e)?;
        if out_mean.is_null() || out_std_dev.is_null() {
            return Err(CvtStatus::NullPointer);
        }
        write(out_mean, e.mean())?;
        write(out_std_dev, e.std_dev())
    })
}

/// Copies the samples into `buf`, which must hold at least
/// `cvt_ensemble_len(e)` values. `*out_written` receives the count, or the
/// required size when the buffer is too small.
///
/// # Safety
/// `e` must be a live handle, `buf` valid for `cap` writes and
/// `out_written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_copy_samples(
    e: *const CvtEnsemble,
    buf: *mut f64,
    cap: usize,
    out_written: *mut usize,
) -> CvtStatus {
    guard(|| {
        let e = ensemble(e)?;
        if buf.is_null() {
            return Err(CvtStatus::NullPointer);
        }
        write(out_written, e.len())?;
        if cap < e.len() {
            return Err(CvtStatus::BufferTooSmall);
        }
        std::ptr::copy_nonoverlapping(e.samples().as_ptr(), buf, e.len());
        Ok(())
    })
}

/// Fraction of samples with transmission at or above `t_min`.
///
/// # Safety
/// `e` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_exceedance(
    e: *const CvtEnsemble,
    t_min: f64,
    out: *mut f64,
) -> CvtStatus {
    guard(|| {
        let e = ensemble(e)?;
        if !(0.0..=1.0).contains(&t_min) {
            return Err(CvtStatus::InvalidArgument);
        }
        write(out, exceedance(e, t_min))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvt_ensemble_free(e: *mut CvtEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Mean fidelity with mode B through the channel `b` for the `CvtScheme`
/// value `scheme`, keeping events with transmission at or above `t_min`
/// (0 keeps all).
///
/// # Safety
/// `b` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_mean_fidelity_single(
    r: f64,
    b: *const CvtEnsemble,
    scheme: i32,
    t_min: f64,
    out: *mut CvtMeanFidelity,
) -> CvtStatus {
    guard(|| {
        let b = ensemble(b)?;
        let spec = SchemeSpec::with_threshold(scheme_mode(scheme)?, t_min).map_err(strategy_status)?;
        let m = mean_fidelity_single(r, b, &spec).map_err(strategy_status)?;
        write(out, m.into())
    })
}

/// Mean fidelity of the `CvtScheme` value `scheme` with both modes through
/// independent channels paired by sample index, keeping pairs with `T_a >= t_min_a` and `T_b >= t_min_b`.
///
/// # Safety
/// `a` and `b` must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvt_mean_fidelity_dual(
    r: f64,
    a: *const CvtEnsemble,
    b: *const CvtEnsemble,
    scheme: i32,
    t_min_a: f64,
    t_min_b: f64,
    out: *mut CvtMeanFidelity,
) -> CvtStatus {
    guard(|| {
        let (a, b) = (ensemble(a)?, ensemble(b)?);
        let ps = Postselection::per_channel(t_min_a, t_min_b).map_err(strategy_status)?;
        let spec = SchemeSpec { mode: scheme_mode(scheme)?, postselect: Some(ps) };
        let m = mean_fidelity_dual(r, a, b, &spec).map_err(strategy_status)?;
        write(out, m.into())
    })
}

//! C ABI over the `mobile-charger` library.
//!
//! Every function returns an [`McStatus`]; results go through out-pointers.
//! Handles are opaque and must be released with their matching `_free`.
//! A human-readable message for the last failure on the calling thread is
//! available from [`mc_last_error`].
//!
//! Pointer contract: every pointer argument is either null (reported as
//! `McStatus::NullPointer`) or valid for the length the function documents,
//! and handles are used only between their constructor and `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mobile_charger::classifier::{ClassifierError, CnnModel, Tensor};
use mobile_charger::delta_kin::{self, DeltaGeometry, JointAngles, KinematicsError};
use mobile_charger::geometry::{self, Vec3};
use mobile_charger::harness::one_way_anova;
use mobile_charger::search::{run_search, OutcomeReason};
use mobile_charger::tactile::{self, MisalignmentKind, MisalignmentLabel, TactileFrame, FRAME_LEN};
use mobile_charger::world::{DetectorModel, WorldState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of force values in one tactile frame (2 × 10 × 10).
pub const MC_FRAME_LEN: usize = 200;
const _: () = assert!(MC_FRAME_LEN == FRAME_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unreachable = 3,
    NoIntersection = 4,
    ShapeMismatch = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McKind {
    Angular = 0,
    Vertical = 1,
    Horizontal = 2,
}

/// Parameters take the raw integer so out-of-range values from C are an
/// error, not undefined behavior.
fn kind_from_raw(k: u32) -> Result<MisalignmentKind, Fail> {
    match k {
        k if k == McKind::Angular as u32 => Ok(MisalignmentKind::Angular),
        k if k == McKind::Vertical as u32 => Ok(MisalignmentKind::Vertical),
        k if k == McKind::Horizontal as u32 => Ok(MisalignmentKind::Horizontal),
        other => Err(invalid(format!("unknown kind {other}"))),
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McReason {
    Reached = 0,
    NotInView = 1,
    Unreachable = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSearchOutcome {
    pub success: bool,
    pub reason: McReason,
    pub steps: u32,
    /// Simulated seconds.
    pub sim_time: f64,
    /// Whether `target` holds the final actuator-frame target.
    pub has_target: bool,
    pub target: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McAnova {
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

/// Opaque Delta mechanism geometry.
pub struct McGeometry(DeltaGeometry);

/// Opaque trained classifier.
pub struct McModel(CnnModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(McStatus, String);

impl From<KinematicsError> for Fail {
    fn from(e: KinematicsError) -> Self {
        let code = match e {
            KinematicsError::Unreachable(..) => McStatus::Unreachable,
            KinematicsError::NoIntersection => McStatus::NoIntersection,
            KinematicsError::NonFinite | KinematicsError::InvalidGeometry(_) => McStatus::InvalidArgument,
        };
        Fail(code, e.to_string())
    }
}

impl From<ClassifierError> for Fail {
    fn from(e: ClassifierError) -> Self {
        let code = match e {
            ClassifierError::ShapeMismatch { .. } => McStatus::ShapeMismatch,
            ClassifierError::Io(_) => McStatus::Io,
            ClassifierError::Json(_) | ClassifierError::UnsupportedVersion(_) | ClassifierError::InvalidModel(_) => {
                McStatus::Format
            }
            _ => McStatus::InvalidArgument,
        };
        Fail(code, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(McStatus::InvalidArgument, msg.into())
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> McStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => McStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            McStatus::Panic
        }
    }
}

fn nn<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    // SAFETY: caller guarantees a non-null pointer refers to a live value.
    unsafe { p.as_ref() }.ok_or_else(|| Fail(McStatus::NullPointer, format!("{what} is null")))
}

fn nn_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    // SAFETY: as above, plus exclusive access for the call's duration.
    unsafe { p.as_mut() }.ok_or_else(|| Fail(McStatus::NullPointer, format!("{what} is null")))
}

fn write3(out: *mut f64, v: [f64; 3]) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(McStatus::NullPointer, "out is null".into()));
    }
    // SAFETY: caller provides room for three doubles.
    unsafe { std::ptr::copy_nonoverlapping(v.as_ptr(), out, 3) };
    Ok(())
}

fn vec3(p: Vec3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller provides `len` writable bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Static description of a status code (an `McStatus` value).
#[no_mangle]
pub extern "C" fn mc_status_str(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid argument",
        3 => c"target unreachable",
        4 => c"no forward kinematics solution",
        5 => c"shape mismatch",
        6 => c"i/o error",
        7 => c"malformed data",
        8 => c"internal panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Default geometry. Release with [`mc_geometry_free`].
#[no_mangle]
pub extern "C" fn mc_geometry_new_default() -> *mut McGeometry {
    Box::into_raw(Box::new(McGeometry(DeltaGeometry::default())))
}

/// Custom link lengths (cm) with the default workspace box and joint limits.
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_geometry_new(
    base_radius: f64,
    platform_radius: f64,
    proximal_length: f64,
    distal_length: f64,
    out: *mut *mut McGeometry,
) -> McStatus {
    guard(|| {
        let out = nn_mut(out, "out")?;
        let g = DeltaGeometry { base_radius, platform_radius, proximal_length, distal_length, ..DeltaGeometry::default() };
        g.validate()?;
        *out = Box::into_raw(Box::new(McGeometry(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mc_geometry_free(g: *mut McGeometry) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Joint angles (degrees) for an actuator-frame target (cm). `out` holds 3.
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_inverse_kinematics(g: *const McGeometry, x: f64, y: f64, z: f64, out: *mut f64) -> McStatus {
    guard(|| {
        let g = nn(g, "geometry")?;
        let j = delta_kin::inverse_kinematics(&g.0, Vec3::new(x, y, z))?;
        write3(out, j.as_array())
    })
}

/// Platform position (cm) for three joint angles (degrees). `out` holds 3.
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_forward_kinematics(
    g: *const McGeometry,
    theta1: f64,
    theta2: f64,
    theta3: f64,
    out: *mut f64,
) -> McStatus {
    guard(|| {
        let g = nn(g, "geometry")?;
        let p = delta_kin::forward_kinematics(&g.0, JointAngles { theta1, theta2, theta3 })?;
        write3(out, vec3(p))
    })
}

/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_in_workspace(g: *const McGeometry, x: f64, y: f64, z: f64, out: *mut bool) -> McStatus {
    guard(|| {
        let g = nn(g, "geometry")?;
        *nn_mut(out, "out")? = delta_kin::in_workspace(&g.0, Vec3::new(x, y, z));
        Ok(())
    })
}

/// Camera frame to actuator frame for camera pitch `theta_deg` and offset `l` (cm).
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_camera_to_delta(x: f64, y: f64, z: f64, theta_deg: f64, l: f64, out: *mut f64) -> McStatus {
    guard(|| {
        if ![x, y, z, theta_deg, l].iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite input"));
        }
        write3(out, vec3(geometry::camera_to_delta(Vec3::new(x, y, z), theta_deg, l)))
    })
}

/// One docking search from yaw `omega_deg` at distance `l_cm`. The detector
/// uses defaults apart from `miss_prob` and `center_noise_sigma` (cm).
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_run_search(
    omega_deg: f64,
    l_cm: f64,
    stand_height: f64,
    miss_prob: f64,
    center_noise_sigma: f64,
    seed: u64,
    out: *mut McSearchOutcome,
) -> McStatus {
    guard(|| {
        let out = nn_mut(out, "out")?;
        if ![omega_deg, l_cm, stand_height].iter().all(|v| v.is_finite()) || l_cm <= 0.0 {
            return Err(invalid("starting position must be finite with l_cm > 0"));
        }
        let d = DetectorModel { miss_prob, center_noise_sigma, ..DetectorModel::default() };
        d.validate().map_err(invalid)?;
        let mut w = WorldState::starting_position(omega_deg, l_cm, stand_height);
        w.rng_seed = seed;
        let o = run_search(&w, &d, seed);
        *out = McSearchOutcome {
            success: o.success,
            reason: match o.reason {
                OutcomeReason::Reached => McReason::Reached,
                OutcomeReason::NotInView => McReason::NotInView,
                OutcomeReason::Unreachable => McReason::Unreachable,
            },
            steps: o.steps,
            sim_time: o.sim_time,
            has_target: o.final_target_delta_frame.is_some(),
            target: o.final_target_delta_frame.map(vec3).unwrap_or([0.0; 3]),
        };
        Ok(())
    })
}

/// Synthesizes one tactile frame for class `class_index` of `kind` (an
/// `McKind` value) into `out`, which must hold `len >= MC_FRAME_LEN` doubles
/// laid out as `[channel][row][col]`.
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_tactile_synthesize(
    kind: u32,
    class_index: usize,
    noise_sigma: f64,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(McStatus::NullPointer, "out is null".into()));
        }
        if len < FRAME_LEN {
            return Err(Fail(McStatus::ShapeMismatch, format!("buffer holds {len}, need {FRAME_LEN}")));
        }
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(invalid("noise_sigma must be finite and non-negative"));
        }
        let label = MisalignmentLabel::new(kind_from_raw(kind)?, class_index).map_err(|e| invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flat = tactile::synthesize_label(label, noise_sigma, &mut rng).to_flat();
        // SAFETY: `out` has at least FRAME_LEN slots.
        unsafe { std::ptr::copy_nonoverlapping(flat.as_ptr(), out, FRAME_LEN) };
        Ok(())
    })
}

/// Loads a model JSON file. Release with [`mc_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mc_model_load(path: *const c_char, out: *mut *mut McModel) -> McStatus {
    guard(|| {
        let out = nn_mut(out, "out")?;
        if path.is_null() {
            return Err(Fail(McStatus::NullPointer, "path is null".into()));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| invalid(e.to_string()))?;
        let m = CnnModel::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(McModel(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`mc_model_load`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn mc_model_free(m: *mut McModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_model_num_classes(m: *const McModel, out: *mut usize) -> McStatus {
    guard(|| {
        *nn_mut(out, "out")? = nn(m, "model")?.0.num_classes();
        Ok(())
    })
}

/// Classifies one frame of `len` doubles. Writes the class index and its
/// physical value (degrees or mm).
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_model_classify(
    m: *const McModel,
    frame: *const f64,
    len: usize,
    out_class: *mut usize,
    out_value: *mut f64,
) -> McStatus {
    guard(|| {
        let m = nn(m, "model")?;
        if frame.is_null() {
            return Err(Fail(McStatus::NullPointer, "frame is null".into()));
        }
        // SAFETY: caller provides `len` readable doubles.
        let values = unsafe { std::slice::from_raw_parts(frame, len) };
        let f = TactileFrame::from_flat(values)
            .map_err(|e| Fail(McStatus::ShapeMismatch, e.to_string()))?;
        let label = m.0.classify(&Tensor::from(&f))?;
        *nn_mut(out_class, "out_class")? = label.class_index;
        *nn_mut(out_value, "out_value")? = label.value();
        Ok(())
    })
}

/// One-way ANOVA. `values` holds the groups back to back; `group_sizes`
/// gives each group's length.
///
/// # Safety
/// Pointer arguments follow the crate-level contract.
#[no_mangle]
pub unsafe extern "C" fn mc_anova(
    values: *const f64,
    group_sizes: *const usize,
    n_groups: usize,
    out: *mut McAnova,
) -> McStatus {
    guard(|| {
        let out = nn_mut(out, "out")?;
        if values.is_null() || group_sizes.is_null() {
            return Err(Fail(McStatus::NullPointer, "values or group_sizes is null".into()));
        }
        // SAFETY: caller provides `n_groups` sizes and their sum of values.
        let sizes = unsafe { std::slice::from_raw_parts(group_sizes, n_groups) };
        let total = sizes.iter().try_fold(0usize, |a, &b| a.checked_add(b)).ok_or_else(|| invalid("sizes overflow"))?;
        let all = unsafe { std::slice::from_raw_parts(values, total) };
        let mut groups = Vec::with_capacity(n_groups);
        let mut at = 0;
        for &s in sizes {
            groups.push(&all[at..at + s]);
            at += s;
        }
        let r = one_way_anova(&groups).map_err(|e| invalid(e.to_string()))?;
        *out = McAnova { f_statistic: r.f_statistic, df_between: r.df_between, df_within: r.df_within, p_value: r.p_value };
        Ok(())
    })
}

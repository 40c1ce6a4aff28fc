//! C ABI over the careerrec engine.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`CrStatus`]; on failure a
//!   human-readable message is available from [`cr_last_error_message`] on
//!   the same thread until the next failing call.
//! * Outputs are written through caller-provided pointers only on success.
//! * Strings and arrays allocated by the library must be released with the
//!   matching `*_free` function.
//! * Variants are opaque, immutable and safe to share across threads.
//! * Panics never cross the boundary; they surface as `CR_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use careerrec::debias::{compute_bias_direction, debias_embedding, BiasDirection};
use careerrec::fairmetrics::{ndcg_at_k, u_par};
use careerrec::linalg::Matrix;
use careerrec::pipeline::SystemVariant;
use careerrec::study::{self, AcceptanceAnswer, PerceivedDominance};
use careerrec::{artifact, dataset::Gender, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    UnknownId = 5,
    Degenerate = 6,
    DimensionMismatch = 7,
    Artifact = 8,
    Panic = 9,
}

pub const CR_ACCEPTANCE_YES: u32 = 0;
pub const CR_ACCEPTANCE_NO: u32 = 1;
pub const CR_ACCEPTANCE_DONT_KNOW: u32 = 2;

pub const CR_GENDER_FEMALE: u32 = 0;
pub const CR_GENDER_MALE: u32 = 1;
pub const CR_GENDER_NONBINARY: u32 = 2;
pub const CR_GENDER_UNDISCLOSED: u32 = 3;

pub const CR_DOMINANCE_FEMALE: u32 = 0;
pub const CR_DOMINANCE_MALE: u32 = 1;
pub const CR_DOMINANCE_DONT_KNOW: u32 = 2;

/// Opaque handle to a trained system variant.
pub struct CrVariant {
    inner: SystemVariant,
}

#[repr(C)]
pub struct CrRecommendation {
    pub concentration_id: *mut c_char,
    pub display_name: *mut c_char,
    pub probability: f64,
    /// 1-based.
    pub rank: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CrTTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> CrStatus {
    match e {
        Error::Io { .. } => CrStatus::Io,
        Error::Parse { .. } | Error::Json(_) => CrStatus::Parse,
        Error::UnknownId { .. } => CrStatus::UnknownId,
        Error::DegenerateDirection { .. } | Error::DegenerateVariance(_) | Error::RankDeficient { .. } => {
            CrStatus::Degenerate
        }
        Error::DimensionMismatch { .. } => CrStatus::DimensionMismatch,
        Error::Artifact(_) => CrStatus::Artifact,
        Error::Duplicate { .. } | Error::Empty(_) | Error::InvalidArgument(_) => CrStatus::InvalidArgument,
    }
}

struct Fail(CrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(CrStatus::InvalidArgument, msg.into())
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn str_array<'a>(p: *const *const c_char, len: usize, what: &str) -> Result<Vec<&'a str>, Fail> {
    slice_arg(p, len, what)?
        .iter()
        .map(|&s| str_arg(s, what))
        .collect()
}

fn to_c_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn matrix_arg(data: &[f64], rows: usize, cols: usize) -> Result<Matrix, Fail> {
    Ok(Matrix::from_vec(rows, cols, data.to_vec())?)
}

/// Message of the last failure on this thread. Owned by the library; valid
/// until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn cr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Load a variant artifact from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn cr_variant_load(path: *const c_char, out: *mut *mut CrVariant) -> CrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = artifact::load_variant(path)?;
        *out = Box::into_raw(Box::new(CrVariant { inner }));
        Ok(())
    })
}

/// Parse a variant artifact from an in-memory JSON string.
#[no_mangle]
pub unsafe extern "C" fn cr_variant_from_json(json: *const c_char, out: *mut *mut CrVariant) -> CrStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = artifact::variant_from_json(json)?;
        *out = Box::into_raw(Box::new(CrVariant { inner }));
        Ok(())
    })
}

/// Release a variant. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cr_variant_free(v: *mut CrVariant) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// Variant kind name (`gender_aware_female`, `gender_aware_male` or
/// `gender_debiased`). Free the result with `cr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cr_variant_kind(v: *const CrVariant, out: *mut *mut c_char) -> CrStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("variant"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(v.inner.kind().as_str());
        Ok(())
    })
}

/// Top-`n` concentrations for a new user who liked `items`. On success
/// `*out` holds `*out_len` recommendations; release them with
/// `cr_recommendations_free`.
#[no_mangle]
pub unsafe extern "C" fn cr_variant_recommend(
    v: *const CrVariant,
    items: *const *const c_char,
    n_items: usize,
    n: usize,
    out: *mut *mut CrRecommendation,
    out_len: *mut usize,
) -> CrStatus {
    guard(|| {
        let v = v.as_ref().ok_or_else(|| null("variant"))?;
        let items = str_array(items, n_items, "items")?;
        if out.is_null() || out_len.is_null() {
            return Err(null("out"));
        }
        let recs: Box<[CrRecommendation]> = v
            .inner
            .recommend(&items, n)?
            .into_iter()
            .map(|r| CrRecommendation {
                concentration_id: to_c_string(&r.concentration_id),
                display_name: to_c_string(&r.display_name),
                probability: r.probability,
                rank: r.rank,
            })
            .collect();
        *out_len = recs.len();
        *out = Box::into_raw(recs) as *mut CrRecommendation;
        Ok(())
    })
}

/// Release recommendations returned by `cr_variant_recommend`.
#[no_mangle]
pub unsafe extern "C" fn cr_recommendations_free(recs: *mut CrRecommendation, len: usize) {
    if recs.is_null() {
        return;
    }
    let boxed = Box::from_raw(ptr::slice_from_raw_parts_mut(recs, len));
    for r in boxed.iter() {
        cr_string_free(r.concentration_id);
        cr_string_free(r.display_name);
    }
}

/// Unit bias direction from row-major female (`n_female x dim`) and male
/// (`n_male x dim`) embeddings, written to `out` (`dim` values).
#[no_mangle]
pub unsafe extern "C" fn cr_bias_direction(
    female: *const f64,
    n_female: usize,
    male: *const f64,
    n_male: usize,
    dim: usize,
    out: *mut f64,
) -> CrStatus {
    guard(|| {
        let f = matrix_arg(slice_arg(female, n_female * dim, "female")?, n_female, dim)?;
        let m = matrix_arg(slice_arg(male, n_male * dim, "male")?, n_male, dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rows_f: Vec<&[f64]> = f.iter_rows().collect();
        let rows_m: Vec<&[f64]> = m.iter_rows().collect();
        let b = compute_bias_direction(&rows_f, &rows_m)?;
        ptr::copy_nonoverlapping(b.as_slice().as_ptr(), out, dim);
        Ok(())
    })
}

/// Remove from `p` its component along `v` (normalized internally).
/// `out` may alias `p`.
#[no_mangle]
pub unsafe extern "C" fn cr_debias(p: *const f64, v: *const f64, dim: usize, out: *mut f64) -> CrStatus {
    guard(|| {
        let p = slice_arg(p, dim, "p")?.to_vec();
        let b = BiasDirection::from_vector(slice_arg(v, dim, "v")?.to_vec())?;
        if out.is_null() {
            return Err(null("out"));
        }
        let q = debias_embedding(&p, &b)?;
        ptr::copy_nonoverlapping(q.as_ptr(), out, dim);
        Ok(())
    })
}

/// NDCG@k of a ranked list of concentration ids against one ground truth.
#[no_mangle]
pub unsafe extern "C" fn cr_ndcg_at_k(
    ranking: *const *const c_char,
    n: usize,
    truth: *const c_char,
    k: usize,
    out: *mut f64,
) -> CrStatus {
    guard(|| {
        let ranking = str_array(ranking, n, "ranking")?;
        let truth = str_arg(truth, "truth")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ndcg_at_k(&ranking, truth, k);
        Ok(())
    })
}

/// U_PAR between row-major female (`n_female x n_classes`) and male score
/// matrices.
#[no_mangle]
pub unsafe extern "C" fn cr_u_par(
    female: *const f64,
    n_female: usize,
    male: *const f64,
    n_male: usize,
    n_classes: usize,
    out: *mut f64,
) -> CrStatus {
    guard(|| {
        let f = matrix_arg(slice_arg(female, n_female * n_classes, "female")?, n_female, n_classes)?;
        let m = matrix_arg(slice_arg(male, n_male * n_classes, "male")?, n_male, n_classes)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = u_par(&f, &m)?;
        Ok(())
    })
}

/// Acceptance score of a `CR_ACCEPTANCE_*` answer.
#[no_mangle]
pub unsafe extern "C" fn cr_acceptance_score(answer: u32, out: *mut f64) -> CrStatus {
    guard(|| {
        let a = match answer {
            CR_ACCEPTANCE_YES => AcceptanceAnswer::Yes,
            CR_ACCEPTANCE_NO => AcceptanceAnswer::No,
            CR_ACCEPTANCE_DONT_KNOW => AcceptanceAnswer::DontKnow,
            other => return Err(invalid(format!("unknown acceptance answer {other}"))),
        };
        if out.is_null() {
            return Err(null("out"));
        }
        *out = study::acceptance_score(a);
        Ok(())
    })
}

/// Perceived gender conformity of a `CR_GENDER_*` participant and a
/// `CR_DOMINANCE_*` perception.
#[no_mangle]
pub unsafe extern "C" fn cr_pgc(gender: u32, perceived: u32, out: *mut f64) -> CrStatus {
    guard(|| {
        let g = match gender {
            CR_GENDER_FEMALE => Gender::Female,
            CR_GENDER_MALE => Gender::Male,
            CR_GENDER_NONBINARY => Gender::Nonbinary,
            CR_GENDER_UNDISCLOSED => Gender::Undisclosed,
            other => return Err(invalid(format!("unknown gender {other}"))),
        };
        let p = match perceived {
            CR_DOMINANCE_FEMALE => PerceivedDominance::FemaleDominated,
            CR_DOMINANCE_MALE => PerceivedDominance::MaleDominated,
            CR_DOMINANCE_DONT_KNOW => PerceivedDominance::DontKnow,
            other => return Err(invalid(format!("unknown dominance {other}"))),
        };
        if out.is_null() {
            return Err(null("out"));
        }
        *out = study::pgc(g, p);
        Ok(())
    })
}

/// Welch's t-test of `mean(a) - mean(b)`.
#[no_mangle]
pub unsafe extern "C" fn cr_welch_t_test(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    out: *mut CrTTest,
) -> CrStatus {
    guard(|| {
        let a = slice_arg(a, n_a, "a")?;
        let b = slice_arg(b, n_b, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = study::welch_t_test(a, b)?;
        *out = CrTTest { t: r.t, df: r.df, p: r.p };
        Ok(())
    })
}

//! C interface to the hybridnet engine.
//!
//! Every function returns an [`HnStatus`]; on failure the message is read
//! with [`hn_last_error_message`]. Handles are opaque and freed with their
//! `_free` function. Strings returned through out-pointers are owned by the
//! caller and released with [`hn_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hybridnet::evaluation::{concordance_index, ScoredCohort};
use hybridnet::inference::{diagnose, discretize, exact_posterior, lw_posterior, DiscretizedNet, Evidence};
use hybridnet::netspec::{parse_network, rescale};
use hybridnet::{NetworkSpec, PriorSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Inference = 5,
    Panic = 6,
}

/// A parsed model file.
pub struct HnNetwork(NetworkSpec);

/// A discretized network ready for queries.
pub struct HnDnet(DiscretizedNet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type Fallible<T> = Result<T, (HnStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible<()>) -> HnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HnStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HnStatus::Panic
        }
    }
}

fn nonnull<T>(p: *const T, what: &str) -> Fallible<()> {
    if p.is_null() {
        Err((HnStatus::NullPointer, format!("`{what}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Fallible<&'a str> {
    nonnull(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (HnStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

fn inference(e: impl std::fmt::Display) -> (HnStatus, String) {
    (HnStatus::Inference, e.to_string())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Fallible<()> {
    let c = CString::new(s).map_err(|e| (HnStatus::Inference, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses model-file text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hn_network_parse(text: *const c_char, out: *mut *mut HnNetwork) -> HnStatus {
    guard(|| {
        nonnull(out, "out")?;
        let text = str_arg(text, "text")?;
        let spec = parse_network(text).map_err(|e| (HnStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(HnNetwork(spec)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`hn_network_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hn_network_free(net: *mut HnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of variables; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hn_network_variable_count(net: *const HnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.len())
}

/// Number of parent-child edges; 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hn_network_edge_count(net: *const HnNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.edge_count())
}

/// Maps a raw measurement of continuous variable `var` onto the rescaled axis.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hn_network_rescale(net: *const HnNetwork, var: usize, raw: f64, out: *mut f64) -> HnStatus {
    guard(|| {
        nonnull(net, "net")?;
        nonnull(out, "out")?;
        let spec = &(*net).0;
        if var >= spec.len() {
            return Err((HnStatus::InvalidArgument, format!("variable index {var} out of range")));
        }
        let scale = spec.var(var).typology.scale().ok_or_else(|| {
            (
                HnStatus::InvalidArgument,
                format!("`{}` is not continuous", spec.var(var).name),
            )
        })?;
        *out = rescale(raw, scale).map_err(|e| (HnStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Loads a discretized network from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hn_dnet_from_json(json: *const c_char, out: *mut *mut HnDnet) -> HnStatus {
    guard(|| {
        nonnull(out, "out")?;
        let net = DiscretizedNet::from_json(str_arg(json, "json")?).map_err(|e| (HnStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(HnDnet(net)));
        Ok(())
    })
}

/// Discretizes a model at the means of its default priors.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hn_dnet_discretize_prior(net: *const HnNetwork, out: *mut *mut HnDnet) -> HnStatus {
    guard(|| {
        nonnull(net, "net")?;
        nonnull(out, "out")?;
        let spec = &(*net).0;
        let params = PriorSpec::defaults(spec).mean_params(spec).map_err(inference)?;
        let d = discretize(spec, &params).map_err(inference)?;
        *out = Box::into_raw(Box::new(HnDnet(d)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hn_dnet_free(net: *mut HnDnet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

unsafe fn evidence_arg(net: &DiscretizedNet, json: *const c_char) -> Fallible<Evidence> {
    if json.is_null() {
        return Ok(Evidence::new());
    }
    Evidence::from_json(net, str_arg(json, "evidence")?).map_err(|e| (HnStatus::InvalidArgument, e.to_string()))
}

/// Posterior marginals as a JSON `QueryResult`. `vars` is a JSON array of
/// variable names; `evidence` is a JSON object or case and may be null.
/// `n_samples == 0` selects exact enumeration, otherwise likelihood weighting.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hn_dnet_query(
    net: *const HnDnet,
    evidence: *const c_char,
    vars: *const c_char,
    n_samples: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> HnStatus {
    guard(|| {
        nonnull(net, "net")?;
        nonnull(out, "out")?;
        let net = &(*net).0;
        let ev = evidence_arg(net, evidence)?;
        let names: Vec<String> =
            serde_json::from_str(str_arg(vars, "vars")?).map_err(|e| (HnStatus::Parse, format!("`vars`: {e}")))?;
        let queries = names
            .iter()
            .map(|n| {
                net.index_of(n)
                    .ok_or_else(|| (HnStatus::InvalidArgument, format!("unknown variable `{n}`")))
            })
            .collect::<Fallible<Vec<_>>>()?;
        let res = if n_samples == 0 {
            exact_posterior(net, &ev, &queries)
        } else {
            lw_posterior(net, &ev, &queries, n_samples, seed)
        }
        .map_err(inference)?;
        put_string(out, serde_json::to_string(&res).map_err(inference)?)
    })
}

/// Disease ranking as a JSON `Diagnosis`.
///
/// # Safety
/// String arguments must be NUL-terminated or null; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hn_dnet_diagnose(
    net: *const HnDnet,
    evidence: *const c_char,
    n_samples: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> HnStatus {
    guard(|| {
        nonnull(net, "net")?;
        nonnull(out, "out")?;
        let net = &(*net).0;
        let ev = evidence_arg(net, evidence)?;
        let d = diagnose(net, &ev, None, n_samples, seed).map_err(inference)?;
        put_string(out, serde_json::to_string(&d).map_err(inference)?)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn hn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Concordance index of `n` risks in [0, 1] against 0/1 labels.
///
/// # Safety
/// `risks` and `labels` must point to `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hn_concordance_index(risks: *const f64, labels: *const u8, n: usize, out: *mut f64) -> HnStatus {
    guard(|| {
        nonnull(out, "out")?;
        let (risks, labels) = if n == 0 {
            (Vec::new(), Vec::new())
        } else {
            nonnull(risks, "risks")?;
            nonnull(labels, "labels")?;
            (
                std::slice::from_raw_parts(risks, n).to_vec(),
                std::slice::from_raw_parts(labels, n).iter().map(|&l| l != 0).collect(),
            )
        };
        let c = ScoredCohort::new(risks, labels).map_err(|e| (HnStatus::InvalidArgument, e.to_string()))?;
        *out = concordance_index(&c).map_err(|e| (HnStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

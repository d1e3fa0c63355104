//! C ABI over the `softspace` core.
//!
//! Every entry point returns an [`SsStatus`]. Results come back through
//! out-pointers and heap objects through opaque handles that the caller
//! releases with the matching `ss_*_free`. After a non-zero status,
//! `ss_last_error_message` describes the failure on the calling thread.
//! Undefined scalar results (HHI of an empty vector, Jaccard of two empty
//! sets, a masked RCA cell) are reported as NaN.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use softspace::backbone::{backbone, BackboneEdge, Origin};
use softspace::community::{fit_sbm_restarts, SbmConfig, SbmFit};
use softspace::corpus::CountMatrix;
use softspace::dynamics::{hhi_from_counts, jaccard_stability};
use softspace::proximity::{proximity, to_network, ProximityNetwork};
use softspace::scalefit::{fit_power_law, FitOptions};
use softspace::specialization::{rca, specialize, Comparison, RcaMatrix};
use softspace::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Fit = 5,
    Invariant = 6,
    Io = 7,
    OutOfRange = 8,
    Utf8 = 9,
    Panic = 10,
}

impl From<&Error> for SsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => SsStatus::InvalidArgument,
            Error::Config(_) => SsStatus::Config,
            Error::Data(_) | Error::Csv(_) | Error::Json(_) => SsStatus::Data,
            Error::Fit(_) => SsStatus::Fit,
            Error::Invariant(_) => SsStatus::Invariant,
            Error::MissingInput(_) | Error::Io { .. } => SsStatus::Io,
        }
    }
}

/// Edge provenance in a backbone.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsOrigin {
    Filter = 0,
    Mst = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsBackboneEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    pub significance: f64,
    pub origin: SsOrigin,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsPowerLawFit {
    pub alpha: f64,
    pub x_min: u64,
    pub n_tail: usize,
    pub ks_distance: f64,
    pub log_likelihood: f64,
}

/// Discipline by tool count table.
pub struct SsCountMatrix(CountMatrix);
/// Revealed comparative advantage of a count table.
pub struct SsRca(RcaMatrix);
/// Undirected weighted tool network.
pub struct SsNetwork(ProximityNetwork);
/// Backbone edges of a network.
pub struct SsBackbone(Vec<BackboneEdge>);
/// Block assignment from an SBM fit.
pub struct SsCommunities(SbmFit);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(SsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(SsStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic in softspace");
            SsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn names(p: *const *const c_char, len: usize, prefix: &str) -> Result<Vec<String>, Fail> {
    if p.is_null() {
        return Ok((0..len).map(|i| format!("{prefix}{i}")).collect());
    }
    slice(p, len, "names")?
        .iter()
        .map(|&s| {
            if s.is_null() {
                return Err(null("name"));
            }
            CStr::from_ptr(s)
                .to_str()
                .map(str::to_string)
                .map_err(|e| Fail(SsStatus::Utf8, e.to_string()))
        })
        .collect()
}

fn out_of_range(i: usize, len: usize) -> Fail {
    Fail(SsStatus::OutOfRange, format!("index {i} out of range for length {len}"))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ss_count_matrix_free(handle: *mut SsCountMatrix) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ss_rca_free(handle: *mut SsRca) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ss_network_free(handle: *mut SsNetwork) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ss_backbone_free(handle: *mut SsBackbone) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ss_communities_free(handle: *mut SsCommunities) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Builds a count table from a row-major `n_rows * n_cols` array. Name
/// arrays may be null, in which case rows are `d0, d1, ...` and columns
/// `t0, t1, ...`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; names must be
/// NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ss_count_matrix_new(
    counts: *const u64,
    n_rows: usize,
    n_cols: usize,
    row_names: *const *const c_char,
    col_names: *const *const c_char,
    out_matrix: *mut *mut SsCountMatrix,
) -> SsStatus {
    guard(|| {
        let dst = out(out_matrix, "out_matrix")?;
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Fail(SsStatus::InvalidArgument, "matrix too large".into()))?;
        let counts = slice(counts, len, "counts")?.to_vec();
        let rows = names(row_names, n_rows, "d")?;
        let cols = names(col_names, n_cols, "t")?;
        let m = CountMatrix::from_dense(rows, cols, counts)?;
        *dst = Box::into_raw(Box::new(SsCountMatrix(m)));
        Ok(())
    })
}

/// # Safety
/// `matrix` must be a live handle and `out_rca` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_rca_compute(matrix: *const SsCountMatrix, out_rca: *mut *mut SsRca) -> SsStatus {
    guard(|| {
        let m = deref(matrix, "matrix")?;
        let dst = out(out_rca, "out_rca")?;
        *dst = Box::into_raw(Box::new(SsRca(rca(&m.0)?)));
        Ok(())
    })
}

/// RCA of one cell; NaN when the cell is masked by an empty row or column.
///
/// # Safety
/// `handle` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_rca_value(handle: *const SsRca, row: usize, col: usize, value: *mut f64) -> SsStatus {
    guard(|| {
        let r = &deref(handle, "rca")?.0;
        let dst = out(value, "value")?;
        if row >= r.rows().len() {
            return Err(out_of_range(row, r.rows().len()));
        }
        if col >= r.cols().len() {
            return Err(out_of_range(col, r.cols().len()));
        }
        *dst = r.get(row, col).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Tool proximity network of the RCA table: tools specialize in the
/// disciplines where RCA exceeds `threshold` (or reaches it when
/// `inclusive` is set).
///
/// # Safety
/// `handle` must be a live handle and `out_network` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_proximity_network(
    handle: *const SsRca,
    threshold: f64,
    inclusive: bool,
    out_network: *mut *mut SsNetwork,
) -> SsStatus {
    guard(|| {
        let r = &deref(handle, "rca")?.0;
        let dst = out(out_network, "out_network")?;
        let cmp = if inclusive { Comparison::Inclusive } else { Comparison::Strict };
        let spec = specialize(r, threshold, cmp)?;
        let net = to_network(&proximity(&spec, r.cols()), &BTreeMap::new());
        *dst = Box::into_raw(Box::new(SsNetwork(net)));
        Ok(())
    })
}

/// Network from an explicit edge list over nodes `0..n_nodes`.
///
/// # Safety
/// `edges` must hold `n_edges` entries and `out_network` be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_network_new(
    n_nodes: usize,
    edges: *const SsEdge,
    n_edges: usize,
    out_network: *mut *mut SsNetwork,
) -> SsStatus {
    guard(|| {
        let dst = out(out_network, "out_network")?;
        let edges = slice(edges, n_edges, "edges")?;
        let names = (0..n_nodes).map(|i| i.to_string()).collect();
        let net = ProximityNetwork::new(names, edges.iter().map(|e| (e.source, e.target, e.weight)))?;
        *dst = Box::into_raw(Box::new(SsNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live handle; out-pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ss_network_size(handle: *const SsNetwork, n_nodes: *mut usize, n_edges: *mut usize) -> SsStatus {
    guard(|| {
        let net = &deref(handle, "network")?.0;
        if let Some(n) = n_nodes.as_mut() {
            *n = net.num_nodes();
        }
        if let Some(e) = n_edges.as_mut() {
            *e = net.num_edges();
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live handle and `edge` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_network_edge(handle: *const SsNetwork, index: usize, edge: *mut SsEdge) -> SsStatus {
    guard(|| {
        let net = &deref(handle, "network")?.0;
        let dst = out(edge, "edge")?;
        let e = net.edges().get(index).ok_or_else(|| out_of_range(index, net.num_edges()))?;
        *dst = SsEdge {
            source: e.source,
            target: e.target,
            weight: e.weight,
        };
        Ok(())
    })
}

/// Disparity-filter backbone at level `alpha`, united with the maximum
/// spanning forest when `with_mst` is set.
///
/// # Safety
/// `network` must be a live handle and `out_backbone` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_backbone_extract(
    network: *const SsNetwork,
    alpha: f64,
    with_mst: bool,
    out_backbone: *mut *mut SsBackbone,
) -> SsStatus {
    guard(|| {
        let net = &deref(network, "network")?.0;
        let dst = out(out_backbone, "out_backbone")?;
        *dst = Box::into_raw(Box::new(SsBackbone(backbone(net, alpha, with_mst)?)));
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_backbone_len(handle: *const SsBackbone, len: *mut usize) -> SsStatus {
    guard(|| {
        *out(len, "len")? = deref(handle, "backbone")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live handle and `edge` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_backbone_edge(handle: *const SsBackbone, index: usize, edge: *mut SsBackboneEdge) -> SsStatus {
    guard(|| {
        let edges = &deref(handle, "backbone")?.0;
        let dst = out(edge, "edge")?;
        let e = edges.get(index).ok_or_else(|| out_of_range(index, edges.len()))?;
        *dst = SsBackboneEdge {
            source: e.source,
            target: e.target,
            weight: e.weight,
            significance: e.significance,
            origin: match e.origin {
                Origin::Filter => SsOrigin::Filter,
                Origin::Mst => SsOrigin::Mst,
                Origin::Both => SsOrigin::Both,
            },
        };
        Ok(())
    })
}

/// Degree-corrected SBM fit with default settings. Restarts use seeds
/// `seed, seed + 1, ...` and the lowest description length wins.
///
/// # Safety
/// `network` must be a live handle and `out_communities` writable.
#[no_mangle]
pub unsafe extern "C" fn ss_sbm_fit(
    network: *const SsNetwork,
    seed: u64,
    restarts: usize,
    out_communities: *mut *mut SsCommunities,
) -> SsStatus {
    guard(|| {
        let net = &deref(network, "network")?.0;
        let dst = out(out_communities, "out_communities")?;
        if restarts == 0 {
            return Err(Fail(SsStatus::InvalidArgument, "restarts must be positive".into()));
        }
        let fit = fit_sbm_restarts(net, seed, restarts, &SbmConfig::default())?;
        *dst = Box::into_raw(Box::new(SsCommunities(fit)));
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live handle; out-pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ss_communities_summary(
    handle: *const SsCommunities,
    n_blocks: *mut usize,
    description_length: *mut f64,
) -> SsStatus {
    guard(|| {
        let a = &deref(handle, "communities")?.0.assignment;
        if let Some(b) = n_blocks.as_mut() {
            *b = a.num_blocks();
        }
        if let Some(dl) = description_length.as_mut() {
            *dl = a.description_length().unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Copies block labels, one per network node, into `labels`. `len` must
/// equal the node count.
///
/// # Safety
/// `labels` must be writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn ss_communities_labels(handle: *const SsCommunities, labels: *mut usize, len: usize) -> SsStatus {
    guard(|| {
        let src = deref(handle, "communities")?.0.assignment.labels();
        if len != src.len() {
            return Err(Fail(
                SsStatus::InvalidArgument,
                format!("label buffer holds {len}, network has {} nodes", src.len()),
            ));
        }
        if len > 0 {
            if labels.is_null() {
                return Err(null("labels"));
            }
            std::slice::from_raw_parts_mut(labels, len).copy_from_slice(src);
        }
        Ok(())
    })
}

/// Herfindahl-Hirschman index of a count vector; NaN when it sums to zero.
///
/// # Safety
/// `counts` must hold `len` entries and `value` be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_hhi(counts: *const u64, len: usize, value: *mut f64) -> SsStatus {
    guard(|| {
        let counts = slice(counts, len, "counts")?;
        *out(value, "value")? = hhi_from_counts(counts).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Jaccard similarity of two id sets (duplicates ignored); NaN when both
/// are empty.
///
/// # Safety
/// Arrays must hold the stated lengths and `value` be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_jaccard(a: *const u64, len_a: usize, b: *const u64, len_b: usize, value: *mut f64) -> SsStatus {
    guard(|| {
        let a: BTreeSet<u64> = slice(a, len_a, "a")?.iter().copied().collect();
        let b: BTreeSet<u64> = slice(b, len_b, "b")?.iter().copied().collect();
        *out(value, "value")? = jaccard_stability(&a, &b).unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Discrete power-law fit. `x_min == 0` scans cutoffs by KS distance.
///
/// # Safety
/// `data` must hold `len` entries and `fit` be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_power_law_fit(data: *const u64, len: usize, x_min: u64, fit: *mut SsPowerLawFit) -> SsStatus {
    guard(|| {
        let data = slice(data, len, "data")?;
        let dst = out(fit, "fit")?;
        let f = fit_power_law(data, (x_min > 0).then_some(x_min), &FitOptions::default())?;
        *dst = SsPowerLawFit {
            alpha: f.alpha,
            x_min: f.x_min,
            n_tail: f.n_tail,
            ks_distance: f.ks_distance,
            log_likelihood: f.log_likelihood,
        };
        Ok(())
    })
}

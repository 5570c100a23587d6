//! C ABI over the cellgraph engine.
//!
//! Graphs and models cross the boundary as opaque handles that the caller
//! releases with the matching `*_free`. Every fallible call returns a
//! [`CgStatus`]; on failure `cg_last_error_message` describes the most recent
//! error on the calling thread. Strings handed out by the library are
//! released with [`cg_string_free`].
//!
//! Array outputs use a caller buffer plus capacity. The required length is
//! always written to `out_len`; when the buffer is null or too short the call
//! returns [`CgStatus::BufferTooSmall`] and writes nothing else, so a first
//! call with `cap == 0` sizes the buffer.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cellgraph::autodiff::Matrix;
use cellgraph::cellfree::{build_all, generate_scenario, run_ap_selection, ApSelectConfig, ScenarioConfig};
use cellgraph::features::{edge_scores, graph_statistics, node_statistics, KatzParams};
use cellgraph::gnn::GnnModel;
use cellgraph::graph::{Direction, Edge, Graph};
use cellgraph::train::{roc_auc, HeadQuery};
use cellgraph::Error;
use serde::de::DeserializeOwned;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGraph = 3,
    Shape = 4,
    IndexOutOfRange = 5,
    Schema = 6,
    Json = 7,
    Config = 8,
    Runtime = 9,
    Utf8 = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Neighbor direction for [`cg_graph_neighbors`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgDirection {
    In = 0,
    Out = 1,
    Both = 2,
}

/// Feature level for [`cg_features_csv`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgLevel {
    Node = 0,
    Edge = 1,
    Graph = 2,
}

/// Opaque graph handle.
pub struct CgGraph(Graph);

/// Opaque trained-model handle.
pub struct CgModel(GnnModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape { .. } => CgStatus::Shape,
            Error::IndexOutOfRange { .. } => CgStatus::IndexOutOfRange,
            Error::InvalidGraph(_) => CgStatus::InvalidGraph,
            Error::InvalidArgument(_) => CgStatus::InvalidArgument,
            Error::Config(_) => CgStatus::Config,
            Error::Schema { .. } => CgStatus::Schema,
            Error::Json(_) => CgStatus::Json,
            Error::NonFiniteLoss { .. } | Error::Degenerate(_) | Error::Io(_) => CgStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> CgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CgStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CgStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(CgStatus::Utf8, format!("`{what}`: {e}")))
}

/// Parses an optional JSON config; null means all defaults.
unsafe fn parse_config<T: DeserializeOwned + Default>(p: *const c_char) -> FfiResult<T> {
    if p.is_null() {
        return Ok(T::default());
    }
    let text = as_str(p, "config_json")?;
    serde_json::from_str(text).map_err(|e| Failure(CgStatus::Config, e.to_string()))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s).map_err(|e| Failure(CgStatus::Runtime, e.to_string()))?;
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(c.into_raw());
    Ok(())
}

unsafe fn write_slice<T: Copy>(values: &[T], buf: *mut T, cap: usize, out_len: *mut usize) -> FfiResult<()> {
    write_out(out_len, values.len(), "out_len")?;
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() || cap < values.len() {
        return Err(Failure(
            CgStatus::BufferTooSmall,
            format!("need {} elements, capacity {cap}", values.len()),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Message for the last failed call on this thread, or null after a
/// success. Owned by the library and valid until the next call.
#[no_mangle]
pub extern "C" fn cg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code, e.g. `"buffer_too_small"`.
#[no_mangle]
pub extern "C" fn cg_status_name(status: CgStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CgStatus::Ok => c"ok",
        CgStatus::NullPointer => c"null_pointer",
        CgStatus::InvalidArgument => c"invalid_argument",
        CgStatus::InvalidGraph => c"invalid_graph",
        CgStatus::Shape => c"shape",
        CgStatus::IndexOutOfRange => c"index_out_of_range",
        CgStatus::Schema => c"schema",
        CgStatus::Json => c"json",
        CgStatus::Config => c"config",
        CgStatus::Runtime => c"runtime",
        CgStatus::Utf8 => c"utf8",
        CgStatus::BufferTooSmall => c"buffer_too_small",
        CgStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a graph from an edge list and a row-major `num_nodes × feature_dim`
/// feature array. Undirected edges store each pair once.
///
/// # Safety
/// `src` and `dst` must hold `num_edges` entries, `features` must hold
/// `num_nodes * feature_dim` values, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_new(
    num_nodes: usize,
    src: *const usize,
    dst: *const usize,
    num_edges: usize,
    directed: bool,
    features: *const f64,
    feature_dim: usize,
    out: *mut *mut CgGraph,
) -> CgStatus {
    guard(|| {
        let src = as_slice(src, num_edges, "src")?;
        let dst = as_slice(dst, num_edges, "dst")?;
        let len = num_nodes
            .checked_mul(feature_dim)
            .ok_or_else(|| Failure(CgStatus::InvalidArgument, "feature size overflows".into()))?;
        let x = as_slice(features, len, "features")?;
        let edges = src
            .iter()
            .zip(dst)
            .map(|(&a, &b)| if directed { Edge::directed(a, b) } else { Edge::undirected(a, b) })
            .collect();
        let x = Matrix::from_vec(num_nodes, feature_dim, x.to_vec())?;
        let g = Graph::new(num_nodes, edges, x, None)?;
        write_out(out, Box::into_raw(Box::new(CgGraph(g))), "out")
    })
}

/// Parses a graph document (the CLI's graph JSON format).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_from_json(json: *const c_char, out: *mut *mut CgGraph) -> CgStatus {
    guard(|| {
        let g = Graph::from_json(as_str(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(CgGraph(g))), "out")
    })
}

/// Serializes a graph; free the result with [`cg_string_free`].
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_to_json(graph: *const CgGraph, out: *mut *mut c_char) -> CgStatus {
    guard(|| write_string(out, as_ref(graph, "graph")?.0.to_json()))
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_free(graph: *mut CgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Node count, edge count and feature width.
///
/// # Safety
/// `graph` must be a live handle; each output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_shape(
    graph: *const CgGraph,
    num_nodes: *mut usize,
    num_edges: *mut usize,
    feature_dim: *mut usize,
) -> CgStatus {
    guard(|| {
        let g = &as_ref(graph, "graph")?.0;
        for (p, v) in [
            (num_nodes, g.num_nodes()),
            (num_edges, g.num_edges()),
            (feature_dim, g.feature_dim()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Sorted neighbors of `node`.
///
/// # Safety
/// `graph` must be a live handle, `buf` must hold `cap` entries (or be
/// null with `cap == 0`) and `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_neighbors(
    graph: *const CgGraph,
    node: usize,
    direction: CgDirection,
    buf: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> CgStatus {
    guard(|| {
        let g = &as_ref(graph, "graph")?.0;
        let dir = match direction {
            CgDirection::In => Direction::In,
            CgDirection::Out => Direction::Out,
            CgDirection::Both => Direction::Both,
        };
        write_slice(&g.neighbors(node, dir)?, buf, cap, out_len)
    })
}

/// Row-major `num_nodes × 3` table of degree, closeness centrality and
/// clustering coefficient.
///
/// # Safety
/// As for [`cg_graph_neighbors`].
#[no_mangle]
pub unsafe extern "C" fn cg_node_statistics(
    graph: *const CgGraph,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> CgStatus {
    guard(|| {
        let table = node_statistics(&as_ref(graph, "graph")?.0);
        let flat: Vec<f64> = table.values.concat();
        write_slice(&flat, buf, cap, out_len)
    })
}

/// Feature table as CSV with an `id` column and a header row. For the edge
/// level, `config_json` may set `katz` (`beta`, `max_length`) and `pairs`;
/// without pairs every stored edge is scored.
///
/// # Safety
/// `graph` must be a live handle, `config_json` null or a NUL-terminated
/// string, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_features_csv(
    graph: *const CgGraph,
    level: CgLevel,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> CgStatus {
    #[derive(Default, serde::Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Config {
        katz: KatzParams,
        pairs: Option<Vec<(usize, usize)>>,
    }
    guard(|| {
        let g = &as_ref(graph, "graph")?.0;
        let cfg: Config = parse_config(config_json)?;
        let table = match level {
            CgLevel::Node => node_statistics(g),
            CgLevel::Graph => graph_statistics(g),
            CgLevel::Edge => {
                let pairs = cfg
                    .pairs
                    .unwrap_or_else(|| g.edges().iter().map(|e| (e.src, e.dst)).collect());
                edge_scores(g, &pairs, cfg.katz)?
            }
        };
        write_string(out, table.to_csv())
    })
}

/// Loads a model saved by `cellgraph train` or `apselect`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_model_from_json(json: *const c_char, out: *mut *mut CgModel) -> CgStatus {
    guard(|| {
        let m = GnnModel::from_json(as_str(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(CgModel(m))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_model_free(model: *mut CgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Row-major `num_nodes × out_cols` node embeddings from the encoder.
///
/// # Safety
/// Handles must be live, `buf` must hold `cap` values (or be null with
/// `cap == 0`), and `out_len`/`out_cols` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_model_embed(
    model: *const CgModel,
    graph: *const CgGraph,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
    out_cols: *mut usize,
) -> CgStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        let h = m.embed(&as_ref(graph, "graph")?.0)?;
        write_out(out_cols, h.cols(), "out_cols")?;
        write_slice(h.as_slice(), buf, cap, out_len)
    })
}

/// Head outputs (logits) for a node head at the given nodes, or for an edge
/// head at the pairs `(src[i], dst[i])`. Pass `dst = null` for node heads.
///
/// # Safety
/// Handles must be live, `src` (and `dst` if non-null) must hold `count`
/// entries, `buf` must hold `cap` values, and the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_model_predict(
    model: *const CgModel,
    graph: *const CgGraph,
    src: *const usize,
    dst: *const usize,
    count: usize,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
    out_cols: *mut usize,
) -> CgStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.0;
        let g = &as_ref(graph, "graph")?.0;
        let src = as_slice(src, count, "src")?;
        let query = if dst.is_null() {
            HeadQuery::Nodes(Arc::new(src.to_vec()))
        } else {
            let dst = as_slice(dst, count, "dst")?;
            HeadQuery::Pairs(src.iter().copied().zip(dst.iter().copied()).collect())
        };
        let y = m.predict(g, &query)?;
        write_out(out_cols, y.cols(), "out_cols")?;
        write_slice(y.as_slice(), buf, cap, out_len)
    })
}

/// Area under the ROC curve, ties counted as one half. Writes NaN when one
/// class is absent.
///
/// # Safety
/// `scores` and `labels` must hold `count` entries and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_roc_auc(scores: *const f64, labels: *const bool, count: usize, out: *mut f64) -> CgStatus {
    guard(|| {
        let s = as_slice(scores, count, "scores")?;
        let l = as_slice(labels, count, "labels")?;
        write_out(out, roc_auc(s, l)?.unwrap_or(f64::NAN), "out")
    })
}

/// Simulates a cell-free deployment and returns one instance graph per
/// non-degenerate UE as JSON lines. `config_json` uses the scenario keys of
/// `cellgraph gen`; `seed` overrides its seed.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_generate_dataset(config_json: *const c_char, seed: u64, out: *mut *mut c_char) -> CgStatus {
    guard(|| {
        let mut cfg: ScenarioConfig = parse_config(config_json)?;
        cfg.seed = seed;
        cfg.validate()?;
        let scenario = generate_scenario(&cfg)?;
        let (instances, _) = build_all(&scenario, &cfg)?;
        let mut text = String::new();
        for (_, inst) in &instances {
            text.push_str(&inst.to_json_line());
            text.push('\n');
        }
        write_string(out, text)
    })
}

/// Runs the full two-stage AP-selection experiment and returns its metrics
/// CSV (`split,metric,value`). `config_json` uses the keys of
/// `cellgraph apselect`; `seed` overrides its seed.
///
/// # Safety
/// `config_json` must be null or a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cg_apselect(config_json: *const c_char, seed: u64, out: *mut *mut c_char) -> CgStatus {
    guard(|| {
        let mut cfg: ApSelectConfig = parse_config(config_json)?;
        cfg.seed = seed;
        cfg.validate()?;
        let run = run_ap_selection(&cfg)?;
        write_string(out, run.report.metrics_csv())
    })
}

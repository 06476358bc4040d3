//! Traffic-sign positions from the Norwegian road database (NVDB) read API.
//!
//! Positions fetched here are tagged [`TargetSource::Nvdb`] and are not used
//! as ground truth unless the session opts in.
//!
//! The endpoint is `GET {base}/vegobjekter/{type}` with a UTM33 bounding box
//! (`kartutsnitt`) and `srid=5973`. A page looks like
//!
//! ```json
//! {
//!   "objekter": [
//!     { "id": 1017, "geometri": { "wkt": "POINT Z (270830.1 7040560.4 12.0)", "srid": 5973 } }
//!   ],
//!   "metadata": { "returnert": 1, "neste": { "start": "abc", "href": "https://…&start=abc" } }
//! }
//! ```
//!
//! and pagination follows `metadata.neste.href` until a page returns nothing.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{GroundTruthTarget, TargetKind, TargetSource};
use crate::geodesy::{utm33_to_wgs84, UtmCoord};

pub const DEFAULT_BASE_URL: &str = "https://nvdbapiles-v3.atlas.vegvesen.no";
/// Overrides the configured base URL.
pub const URL_ENV: &str = "GEOPIN_NVDB_URL";
/// NVDB object type for sign points.
pub const SIGN_POINT_TYPE: u32 = 95;
const ACCEPTED_SRIDS: [u64; 3] = [5973, 25833, 32633];
const MAX_PAGES: usize = 10_000;
const BODY_EXCERPT: usize = 200;

#[derive(Debug, Error)]
pub enum NvdbError {
    #[error("NVDB returned HTTP {status}: {body}")]
    HttpError { status: u16, body: String },
    #[error("NVDB transport failure: {0}")]
    Transport(String),
    #[error("NVDB response did not match the expected schema: {0}")]
    SchemaDrift(String),
    #[error("invalid NVDB config: {0}")]
    Config(String),
}

pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Blocking GET. Implemented over HTTP for real use and by fixtures in tests.
pub trait HttpGet {
    fn get(&self, url: &str) -> Result<HttpResponse, NvdbError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

impl HttpGet for UreqTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, NvdbError> {
        let mut resp = self
            .agent
            .get(url)
            .header("Accept", "application/json")
            .header("X-Client", "geopin")
            .call()
            .map_err(|e| NvdbError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| NvdbError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NvdbConfig {
    pub base_url: String,
    pub object_type: u32,
    pub page_size: u32,
}

impl Default for NvdbConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.into(),
            object_type: SIGN_POINT_TYPE,
            page_size: 1000,
        }
    }
}

impl NvdbConfig {
    /// Defaults, then the optional JSON config file, then [`URL_ENV`].
    pub fn resolve(config_path: Option<&Path>) -> Result<Self, NvdbError> {
        let mut cfg = match config_path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| NvdbError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| NvdbError::Config(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Ok(url) = std::env::var(URL_ENV) {
            if !url.is_empty() {
                cfg.base_url = url;
            }
        }
        if cfg.page_size == 0 {
            return Err(NvdbError::Config("page_size must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn query_url(&self, bbox: &UtmBbox) -> String {
        format!(
            "{}/vegobjekter/{}?kartutsnitt={},{},{},{}&srid=5973&inkluder=geometri,metadata&antall={}",
            self.base_url.trim_end_matches('/'),
            self.object_type,
            bbox.min_e,
            bbox.min_n,
            bbox.max_e,
            bbox.max_n,
            self.page_size
        )
    }
}

/// Axis-aligned UTM33 box, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtmBbox {
    pub min_e: f64,
    pub min_n: f64,
    pub max_e: f64,
    pub max_n: f64,
}

impl UtmBbox {
    pub fn new(min_e: f64, min_n: f64, max_e: f64, max_n: f64) -> Result<Self, NvdbError> {
        let finite = [min_e, min_n, max_e, max_n].iter().all(|v| v.is_finite());
        if !finite || min_e >= max_e || min_n >= max_n {
            return Err(NvdbError::Config(format!(
                "bounding box {min_e},{min_n},{max_e},{max_n} is empty or not finite"
            )));
        }
        Ok(Self {
            min_e,
            min_n,
            max_e,
            max_n,
        })
    }
}

/// Fetch every sign point in `bbox`, following pagination. Any failing page
/// fails the whole call.
pub fn fetch_signs(
    transport: &dyn HttpGet,
    config: &NvdbConfig,
    bbox: &UtmBbox,
) -> Result<Vec<GroundTruthTarget>, NvdbError> {
    let mut url = config.query_url(bbox);
    let mut seen_ids = BTreeSet::new();
    let mut seen_urls = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..MAX_PAGES {
        seen_urls.insert(url.clone());
        let resp = transport.get(&url)?;
        if !(200..300).contains(&resp.status) {
            return Err(NvdbError::HttpError {
                status: resp.status,
                body: resp.body.chars().take(BODY_EXCERPT).collect(),
            });
        }
        let page = parse_page(&resp.body)?;
        for (id, target) in page.targets {
            if seen_ids.insert(id) {
                out.push(target);
            }
        }
        match page.next {
            Some(next) if page.returned > 0 && !seen_urls.contains(&next) => url = next,
            _ => return Ok(out),
        }
    }
    Err(NvdbError::SchemaDrift(format!("pagination did not end after {MAX_PAGES} pages")))
}

struct Page {
    targets: Vec<(u64, GroundTruthTarget)>,
    returned: u64,
    next: Option<String>,
}

fn drift(msg: impl Into<String>) -> NvdbError {
    NvdbError::SchemaDrift(msg.into())
}

fn parse_page(body: &str) -> Result<Page, NvdbError> {
    let v: Value = serde_json::from_str(body).map_err(|e| drift(format!("body is not JSON: {e}")))?;
    let objects = v
        .get("objekter")
        .and_then(Value::as_array)
        .ok_or_else(|| drift("missing `objekter` array"))?;
    let meta = v.get("metadata").ok_or_else(|| drift("missing `metadata`"))?;
    let returned = meta
        .get("returnert")
        .and_then(Value::as_u64)
        .ok_or_else(|| drift("missing `metadata.returnert`"))?;
    let next = match meta.get("neste") {
        None | Some(Value::Null) => None,
        Some(n) => Some(
            n.get("href")
                .and_then(Value::as_str)
                .ok_or_else(|| drift("`metadata.neste` without `href`"))?
                .to_string(),
        ),
    };

    let mut targets = Vec::with_capacity(objects.len());
    for (i, obj) in objects.iter().enumerate() {
        let id = obj
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| drift(format!("objekter[{i}]: missing numeric `id`")))?;
        let geom = obj
            .get("geometri")
            .ok_or_else(|| drift(format!("object {id}: missing `geometri`")))?;
        if let Some(srid) = geom.get("srid") {
            let srid = srid.as_u64().ok_or_else(|| drift(format!("object {id}: non-numeric srid")))?;
            if !ACCEPTED_SRIDS.contains(&srid) {
                return Err(drift(format!("object {id}: unexpected srid {srid}")));
            }
        }
        let wkt = geom
            .get("wkt")
            .and_then(Value::as_str)
            .ok_or_else(|| drift(format!("object {id}: missing `geometri.wkt`")))?;
        let (e, n) = parse_wkt_point(wkt).ok_or_else(|| drift(format!("object {id}: unsupported WKT {wkt:?}")))?;
        let pos = utm33_to_wgs84(UtmCoord::new(e, n)).map_err(|err| drift(format!("object {id}: {err}")))?;
        targets.push((
            id,
            GroundTruthTarget {
                target_id: format!("nvdb-{id}"),
                pos,
                kind: TargetKind::TrafficSign,
                source: TargetSource::Nvdb,
            },
        ));
    }
    Ok(Page {
        targets,
        returned,
        next,
    })
}

/// Easting and northing of `POINT (x y)`, `POINT Z (x y z)` and friends.
fn parse_wkt_point(wkt: &str) -> Option<(f64, f64)> {
    let rest = wkt.trim().strip_prefix("POINT")?.trim_start();
    let rest = rest
        .strip_prefix("ZM")
        .or_else(|| rest.strip_prefix('Z'))
        .or_else(|| rest.strip_prefix('M'))
        .unwrap_or(rest)
        .trim();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    let mut coords = inner.split_whitespace().map(str::parse::<f64>);
    let e = coords.next()?.ok()?;
    let n = coords.next()?.ok()?;
    if coords.any(|c| c.is_err()) || !e.is_finite() || !n.is_finite() {
        return None;
    }
    Some((e, n))
}

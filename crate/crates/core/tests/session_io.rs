use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use geopin_core::geodesy::{wgs84_to_utm33, UtmCoord};
use geopin_core::session::nvdb::{
    fetch_signs, HttpGet, HttpResponse, NvdbConfig, NvdbError, UreqTransport, UtmBbox,
};
use geopin_core::session::{load_session, Manifest, SessionError, TargetKind, TargetSource};
use geopin_core::synth::{generate, presets};

const BASE: &str = "http://nvdb.test";

fn fixture(name: &str, base: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nvdb").join(name);
    std::fs::read_to_string(path).unwrap().replace("{BASE}", base)
}

fn bbox() -> UtmBbox {
    UtmBbox::new(270700.0, 7040450.0, 270950.0, 7040700.0).unwrap()
}

fn config(base: &str) -> NvdbConfig {
    NvdbConfig {
        base_url: base.into(),
        page_size: 2,
        ..NvdbConfig::default()
    }
}

/// Serves canned bodies by exact URL and counts requests.
struct Canned {
    pages: HashMap<String, (u16, String)>,
    calls: AtomicUsize,
}

impl HttpGet for Canned {
    fn get(&self, url: &str) -> Result<HttpResponse, NvdbError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let (status, body) = self
            .pages
            .get(url)
            .cloned()
            .unwrap_or((404, format!("no fixture for {url}")));
        Ok(HttpResponse { status, body })
    }
}

fn paged(first: (u16, String)) -> Canned {
    let cfg = config(BASE);
    let first_url = cfg.query_url(&bbox());
    let mut pages = HashMap::new();
    pages.insert(first_url.clone(), first);
    pages.insert(format!("{first_url}&start=83461002"), (200, fixture("signs_page2.json", BASE)));
    pages.insert(format!("{first_url}&start=83461003"), (200, fixture("signs_page3.json", BASE)));
    Canned {
        pages,
        calls: AtomicUsize::new(0),
    }
}

#[test]
fn nvdb_pages_are_followed_and_converted() {
    let t = paged((200, fixture("signs_page1.json", BASE)));
    let signs = fetch_signs(&t, &config(BASE), &bbox()).unwrap();
    assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    assert_eq!(signs.len(), 3);
    assert_eq!(signs[0].target_id, "nvdb-83461001");
    for s in &signs {
        assert_eq!((s.kind, s.source), (TargetKind::TrafficSign, TargetSource::Nvdb));
    }
    let utm = wgs84_to_utm33(signs[2].pos).unwrap();
    assert!((utm.easting - 270866.75).abs() < 1e-6 && (utm.northing - 7040612.2).abs() < 1e-6);
}

#[test]
fn nvdb_empty_region_is_empty() {
    let cfg = config(BASE);
    let t = Canned {
        pages: HashMap::from([(cfg.query_url(&bbox()), (200, fixture("empty.json", BASE)))]),
        calls: AtomicUsize::new(0),
    };
    assert!(fetch_signs(&t, &cfg, &bbox()).unwrap().is_empty());
}

#[test]
fn nvdb_server_error_yields_no_partial_result() {
    let mut t = paged((200, fixture("signs_page1.json", BASE)));
    let second = format!("{}&start=83461002", config(BASE).query_url(&bbox()));
    t.pages.insert(second, (500, "Internal Server Error".into()));
    match fetch_signs(&t, &config(BASE), &bbox()) {
        Err(NvdbError::HttpError { status, body }) => {
            assert_eq!(status, 500);
            assert!(body.contains("Internal"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn nvdb_schema_drift_is_reported() {
    let t = paged((200, fixture("drift.json", BASE)));
    assert!(matches!(
        fetch_signs(&t, &config(BASE), &bbox()),
        Err(NvdbError::SchemaDrift(_))
    ));
}

/// One-thread HTTP/1.1 server answering `n` requests from the fixtures.
fn serve_fixtures(n: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let base_for_thread = base.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("");
            let body = if path.ends_with("start=83461002") {
                fixture("signs_page2.json", &base_for_thread)
            } else if path.ends_with("start=83461003") {
                fixture("signs_page3.json", &base_for_thread)
            } else {
                fixture("signs_page1.json", &base_for_thread)
            };
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            )
            .unwrap();
        }
    });
    base
}

#[test]
fn nvdb_over_real_http() {
    let base = serve_fixtures(3);
    let signs = fetch_signs(&UreqTransport::default(), &config(&base), &bbox()).unwrap();
    assert_eq!(signs.len(), 3);
}

#[test]
fn nvdb_url_from_environment() {
    std::env::set_var("GEOPIN_NVDB_URL", "http://from-env.test");
    let cfg = NvdbConfig::resolve(None).unwrap();
    std::env::remove_var("GEOPIN_NVDB_URL");
    assert_eq!(cfg.base_url, "http://from-env.test");
    assert_eq!(cfg.object_type, 95);
}

#[test]
fn synthetic_session_round_trips_through_files() {
    let scene = generate(&presets::stationary_markers(presets::cpos_noise(), 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene.session.write_to(dir.path()).unwrap();
    let loaded = load_session(&manifest).unwrap();
    assert_eq!(loaded, scene.session);

    let again = tempfile::tempdir().unwrap();
    loaded.write_to(again.path()).unwrap();
    for name in ["manifest.json", "track.csv", "annotations.csv", "ground_truth.csv"] {
        let a = std::fs::read(dir.path().join(name)).unwrap();
        let b = std::fs::read(again.path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn manifest_accepts_camera_paths_and_inline_documents() {
    let scene = generate(&presets::stationary_markers(Default::default(), 3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = scene.session.write_to(dir.path()).unwrap();
    let mut manifest = Manifest::read(&manifest_path).unwrap();
    let camera = std::mem::take(&mut manifest.cameras).pop().unwrap();
    let geopin_core::session::CameraEntry::Inline(doc) = camera else {
        panic!("writer inlines cameras")
    };
    std::fs::write(dir.path().join("cam3.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    manifest.cameras = vec![geopin_core::session::CameraEntry::Path("cam3.json".into())];
    std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    assert_eq!(load_session(&manifest_path).unwrap(), scene.session);

    std::fs::remove_file(dir.path().join("cam3.json")).unwrap();
    let err = load_session(&manifest_path).unwrap_err();
    assert!(matches!(err, SessionError::Io { .. }));
    assert!(err.to_string().contains("cam3.json"));
}

#[test]
fn ground_truth_in_utm_matches_lat_lon() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate(&presets::stationary_markers(Default::default(), 3)).unwrap();
    let manifest = scene.session.write_to(dir.path()).unwrap();
    let mut rows = String::from("target_id,kind,lat,lon,easting,northing,source\n");
    for t in scene.session.ground_truth.values() {
        let UtmCoord { easting, northing } = wgs84_to_utm33(t.pos).unwrap();
        rows.push_str(&format!("{},control_marker,,,{easting},{northing},survey\n", t.target_id));
    }
    std::fs::write(dir.path().join("ground_truth.csv"), rows).unwrap();
    let loaded = load_session(&manifest).unwrap();
    for (id, t) in &loaded.ground_truth {
        let orig = scene.session.ground_truth[id].pos;
        assert!((t.pos.lat() - orig.lat()).abs() < 1e-9 && (t.pos.lon() - orig.lon()).abs() < 1e-9);
    }
}

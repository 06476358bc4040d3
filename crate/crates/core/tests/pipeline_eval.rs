use geopin_core::geodesy::haversine_distance;
use geopin_core::pipeline::{
    evaluate, export_report_csv, export_report_json, read_report_csv, DistanceMode, EvaluationReport, PipelineError,
    DEFAULT_REPORTING_RADIUS_M, REPORT_CSV_HEADER,
};
use geopin_core::session::{Annotation, Session};
use geopin_core::synth::{generate, presets, NoiseSpec};

fn stationary(noise: NoiseSpec) -> Session {
    generate(&presets::stationary_markers(noise, 21)).unwrap().session
}

#[test]
fn rows_are_ordered_by_true_distance() {
    let report = evaluate(&stationary(NoiseSpec::default())).unwrap();
    assert!(report.failures.is_empty());
    let mut order: Vec<&str> = report.rows.iter().map(|r| r.target_id.as_str()).collect();
    order.dedup();
    assert_eq!(order, ["marker1", "marker2", "marker3"]);
    for (id, range) in ["marker1", "marker2", "marker3"].iter().zip(presets::STATIONARY_RANGES_M) {
        for r in report.rows.iter().filter(|r| r.target_id == *id) {
            assert!((r.true_distance_m.unwrap() - range).abs() < 1e-6, "{id}");
        }
    }
    let d: Vec<f64> = report.rows.iter().map(|r| r.true_distance_m.unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn headline_statistics_stop_at_the_reporting_radius() {
    let mut session = stationary(presets::cpos_noise());
    assert_eq!(session.options.reporting_radius_m, DEFAULT_REPORTING_RADIUS_M);
    let report = evaluate(&session).unwrap();
    let near: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.true_distance_m.unwrap() <= 15.0)
        .map(|r| r.error_m.unwrap())
        .collect();
    // the 19.3 m marker stays in the rows but not in the headline
    assert_eq!(report.rows.len(), 93);
    assert_eq!(near.len(), 62);
    let within = report.aggregates.within_reporting_radius.unwrap();
    assert_eq!(within.count, 62);
    assert_eq!(within.max, near.iter().copied().fold(0.0, f64::max));
    assert_eq!(report.aggregates.overall.unwrap().count, 93);

    session.options.reporting_radius_m = 5.0;
    let report = evaluate(&session).unwrap();
    assert_eq!(report.aggregates.reporting_radius_m, 5.0);
    assert!(report.aggregates.within_reporting_radius.is_none());
}

#[test]
fn single_annotation_aggregates_equal_the_row() {
    let mut session = stationary(presets::cpos_noise());
    session.annotations.truncate(1);
    let report = evaluate(&session).unwrap();
    let e = report.rows[0].error_m.unwrap();
    let s = report.aggregates.overall.unwrap();
    assert_eq!((s.count, s.mean, s.median, s.p95, s.max), (1, e, e, e, e));
    assert_eq!(report.aggregates.by_distance_m.len(), 1);
    assert_eq!(report.aggregates.by_speed_kmh.len(), 1);
}

#[test]
fn failing_annotation_is_isolated() {
    let mut session = stationary(NoiseSpec::default());
    let n = session.annotations.len();
    // top of the image looks above the horizon
    session.annotations.insert(
        2,
        Annotation {
            t: 0.5,
            camera_id: "cam3".into(),
            px: 960.0,
            py: 0.0,
            target_id: "marker1".into(),
        },
    );
    let report = evaluate(&session).unwrap();
    assert_eq!(report.rows.len(), n);
    assert_eq!(report.failures.len(), 1);
    let f = &report.failures[0];
    assert_eq!((f.index, f.error.as_str()), (2, "AboveHorizon"));
}

#[test]
fn empty_session_is_an_error() {
    let mut session = stationary(NoiseSpec::default());
    session.annotations.clear();
    assert_eq!(evaluate(&session), Err(PipelineError::EmptySession));
}

#[test]
fn csv_export_shapes() {
    let mut session = stationary(NoiseSpec::default());
    session.annotations.truncate(3);
    let report = evaluate(&session).unwrap();
    let csv = String::from_utf8(export_report_csv(&report)).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next().unwrap(), REPORT_CSV_HEADER.join(","));

    let empty = EvaluationReport {
        rows: Vec::new(),
        ..report
    };
    let csv = String::from_utf8(export_report_csv(&empty)).unwrap();
    assert_eq!(csv, format!("{}\n", REPORT_CSV_HEADER.join(",")));
    assert!(read_report_csv(csv.as_bytes()).unwrap().is_empty());
}

#[test]
fn json_report_round_trips_into_the_same_csv() {
    let report = evaluate(&stationary(presets::cpos_noise())).unwrap();
    let json = export_report_json(&report);
    let back = EvaluationReport::from_json(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(export_report_csv(&back), export_report_csv(&report));
    let rows = read_report_csv(export_report_csv(&report).as_slice()).unwrap();
    assert_eq!(rows.len(), report.rows.len());
    for (csv_row, row) in rows.iter().zip(&report.rows) {
        assert_eq!(csv_row.error_m, row.error_m);
        assert_eq!(csv_row.true_distance_m, row.true_distance_m);
    }
}

#[test]
fn slant_range_moves_estimates_by_at_most_the_height_term() {
    let ground = stationary(presets::cpos_noise());
    let mut slant = ground.clone();
    slant.options.distance_mode = DistanceMode::Slant;
    let (g, s) = (evaluate(&ground).unwrap(), evaluate(&slant).unwrap());
    assert_eq!(g.rows.len(), s.rows.len());
    let h = 1.5;
    for (a, b) in g.rows.iter().zip(&s.rows) {
        let shift = haversine_distance(a.estimate, b.estimate, &ground.options.earth);
        assert!(shift <= h * h / (2.0 * a.distance_m) + 1e-6, "{shift} at {}", a.distance_m);
        assert!(b.distance_m > a.distance_m);
    }
}

#[test]
fn evaluation_is_deterministic() {
    let session = stationary(presets::cpos_noise());
    let a = export_report_json(&evaluate(&session).unwrap());
    let b = export_report_json(&evaluate(&session).unwrap());
    assert_eq!(a, b);
}

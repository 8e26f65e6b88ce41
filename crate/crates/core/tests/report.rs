use cfmimo::report::{build_report, canonical_json, config_digest, fmt_f64, ExperimentResult, MetricReport, Table};
use cfmimo::scenario::SystemConfig;
use proptest::prelude::*;

fn table() -> impl Strategy<Value = Table> {
    ("[a-z_]{1,12}", 0u32..4, "[a-z0-9,.\\-\n]{0,40}").prop_map(|(name, schema_version, csv)| Table {
        name,
        schema_version,
        csv,
    })
}

fn report() -> impl Strategy<Value = MetricReport> {
    (
        "[a-z\\-]{1,10}",
        "[0-9a-f]{64}",
        any::<u64>(),
        "[0-9]\\.[0-9]\\.[0-9]",
        prop::collection::vec(table(), 0..4),
        prop::option::of(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO),
    )
        .prop_map(|(experiment, config_digest, seed, version, tables, wall_time)| MetricReport {
            experiment,
            config_digest,
            seed,
            version,
            tables,
            wall_time,
        })
}

proptest! {
    #[test]
    fn reports_round_trip_byte_for_byte(r in report()) {
        let text = r.to_json().unwrap();
        let back = MetricReport::from_json(&text).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(back.to_json().unwrap(), text);
        prop_assert_eq!(back.digest().unwrap(), r.digest().unwrap());
    }

    #[test]
    fn every_field_feeds_the_digest(r in report(), bump in 1u64..1000) {
        let d = r.digest().unwrap();
        let mut v = Vec::new();
        let mut x = r.clone();
        x.experiment.push('x');
        v.push(x);
        let mut x = r.clone();
        x.config_digest.replace_range(0..1, if r.config_digest.starts_with('0') { "1" } else { "0" });
        v.push(x);
        let mut x = r.clone();
        x.seed = r.seed.wrapping_add(bump);
        v.push(x);
        let mut x = r.clone();
        x.version.push('1');
        v.push(x);
        let mut x = r.clone();
        x.tables.push(Table { name: "t".into(), schema_version: 1, csv: String::new() });
        v.push(x);
        let mut x = r.clone();
        x.wall_time = match r.wall_time { Some(t) => Some(t * 2.0 + 1.0), None => Some(1.0) };
        v.push(x);
        for changed in v {
            prop_assert_ne!(changed.digest().unwrap(), d.clone());
        }
    }

    #[test]
    fn csv_floats_round_trip(x in prop::num::f64::ANY.prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn config_digest_tracks_the_seed(a in any::<u64>(), b in any::<u64>()) {
        let da = config_digest(&SystemConfig { seed: a, ..Default::default() }).unwrap();
        let db = config_digest(&SystemConfig { seed: b, ..Default::default() }).unwrap();
        prop_assert_eq!(a == b, da == db);
    }
}

#[test]
fn canonical_json_ignores_key_order() {
    let a: serde_json::Value = serde_json::from_str(r#"{"b":1,"a":{"y":2.5,"x":[1,2]}}"#).unwrap();
    let b: serde_json::Value = serde_json::from_str(r#"{"a":{"x":[1,2],"y":2.5},"b":1}"#).unwrap();
    assert_eq!(canonical_json(&a).unwrap(), canonical_json(&b).unwrap());
    assert_eq!(canonical_json(&a).unwrap(), r#"{"a":{"x":[1,2],"y":2.5000000000000000e0},"b":1}"#);
}

#[test]
fn merged_report_keeps_table_order_and_provenance() {
    let cfg = SystemConfig::default();
    let digest = config_digest(&cfg).unwrap();
    let mk = |name: &str, wall| ExperimentResult {
        experiment: name.into(),
        config_digest: digest.clone(),
        seed: cfg.seed,
        tables: vec![Table { name: format!("{name}_sua"), schema_version: 1, csv: "x\n".into() }],
        wall_time: wall,
    };
    let r = build_report("all", &[mk("ser", None), mk("pd", None)]).unwrap();
    let names: Vec<&str> = r.tables.iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["ser_sua", "pd_sua"]);
    assert_eq!(r.wall_time, None);
    assert_eq!(r.config_digest, digest);
    let timed = build_report("all", &[mk("ser", Some(1.5)), mk("pd", Some(2.0))]).unwrap();
    assert_eq!(timed.wall_time, Some(3.5));
    let partly = build_report("all", &[mk("ser", Some(1.5)), mk("pd", None)]).unwrap();
    assert_eq!(partly.wall_time, None);
}

//! Replays the checked-in fuzz corpus and throws arbitrary input at every
//! parser entry point.

use std::fs;
use std::path::PathBuf;

use bbk29_core::harness::ExperimentConfig;
use bbk29_core::signals::Path;
use bbk29_core::spaces::GridFunction;
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn config_target(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    match ExperimentConfig::from_json(text) {
        Ok(cfg) => {
            let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg.normalized()).unwrap()).unwrap();
            assert_eq!(again.hash(), cfg.hash());
            true
        }
        Err(_) => false,
    }
}

fn grid_target(data: &[u8]) -> bool {
    match GridFunction::read_csv(data) {
        Ok(f) => {
            let mut out = Vec::new();
            f.write_csv(&mut out).unwrap();
            let g = GridFunction::read_csv(out.as_slice()).unwrap();
            assert_eq!(f.values().len(), g.values().len());
            true
        }
        Err(_) => false,
    }
}

fn path_target(data: &[u8]) -> bool {
    match Path::read_csv(data) {
        Ok(p) => {
            let mut out = Vec::new();
            p.write_csv(&mut out).unwrap();
            let q = Path::read_csv(out.as_slice()).unwrap();
            assert_eq!(p.len(), q.len());
            assert_eq!(p.y.is_some(), q.y.is_some());
            true
        }
        Err(_) => false,
    }
}

#[test]
fn experiment_config_seeds() {
    let seeds = corpus("experiment_config");
    let accepted: Vec<&str> = seeds.iter().filter(|(_, d)| config_target(d)).map(|(n, _)| n.as_str()).collect();
    assert!(accepted.contains(&"sin_sobolev_p2.json"), "{accepted:?}");
    assert!(accepted.contains(&"minimal.json"));
    assert!(!accepted.contains(&"bad_sweep.json"));
    assert!(!accepted.contains(&"unknown_field.json"));
}

#[test]
fn grid_function_seeds() {
    let seeds = corpus("grid_function_csv");
    let accepted: Vec<&str> = seeds.iter().filter(|(_, d)| grid_target(d)).map(|(n, _)| n.as_str()).collect();
    assert_eq!(accepted, ["line_4.csv", "square_2x2.csv"]);
}

#[test]
fn path_seeds() {
    let seeds = corpus("path_csv");
    let accepted: Vec<&str> = seeds.iter().filter(|(_, d)| path_target(d)).map(|(n, _)| n.as_str()).collect();
    assert_eq!(accepted, ["observed.csv", "unobserved.csv"]);
}

#[test]
fn shipped_configs_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        ExperimentConfig::load(&p).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
    }
}

fn csv_like() -> impl Strategy<Value = String> {
    let cell = prop_oneof![
        "-?[0-9]{1,3}(\\.[0-9]{0,4})?(e-?[0-9])?",
        Just(String::new()),
        Just("nan".to_string()),
        Just("inf".to_string()),
        "[a-z]{1,3}",
    ];
    let header = prop_oneof![
        Just("x,value".to_string()),
        Just("x0,x1,value".to_string()),
        Just("n,t,theta,y".to_string()),
        "[a-z,]{0,12}",
    ];
    (header, prop::collection::vec(prop::collection::vec(cell, 0..5), 0..12)).prop_map(|(h, rows)| {
        let mut s = h;
        for r in rows {
            s.push('\n');
            s.push_str(&r.join(","));
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn parsers_never_panic_on_bytes(data in prop::collection::vec(any::<u8>(), 0..256)) {
        config_target(&data);
        grid_target(&data);
        path_target(&data);
    }

    #[test]
    fn csv_parsers_never_panic(text in csv_like()) {
        grid_target(text.as_bytes());
        path_target(text.as_bytes());
    }

    #[test]
    fn config_parser_never_panics(
        y in prop_oneof![Just("1".to_string()), Just("-1".to_string()), Just("0".to_string()), Just("1e308".to_string())],
        kernel in prop_oneof![
            Just(r#"{"kind":"dual_sobolev","s":0.6,"p":2}"#),
            Just(r#"{"kind":"dual_sobolev","s":0.1,"p":2,"grid":1}"#),
            Just(r#"{"kind":"mapping_affine","r":1}"#),
            Just(r#"{"kind":"mapping_fourier","weights":[],"r":2}"#),
            Just(r#"{"kind":"gaussian","width":-1}"#),
            Just(r#"{"kind":"rkhs_w12"}"#),
        ],
        bench in prop_oneof![
            Just(r#"{"rule":"fbm"}"#),
            Just(r#"{"rule":"fbm","h":1.5,"seed":1,"amplitude":1}"#),
            Just(r#"{"rule":"sin","norm":-1}"#),
            Just(r#"{"rule":"vee","s":2,"p":0.5}"#),
        ],
        sweep in prop::collection::vec(0usize..5, 0..4),
    ) {
        let json = format!(
            r#"{{"predictor":{{"y_bound":{y}}},"kernel":{kernel},"benchmark":{bench},"sweep":{sweep:?}}}"#
        );
        config_target(json.as_bytes());
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use czolab::config::{ConstantsFile, Scenario};
use czolab::AtomicMeasure;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn measure_seeds_parse_except_the_short_row() {
    for (path, text) in seeds("parse_measure_csv") {
        let name = path.file_name().unwrap().to_string_lossy();
        let parsed = AtomicMeasure::from_csv_str(&text);
        match name.as_ref() {
            "short_row.csv" => assert!(parsed.is_err()),
            "signed.csv" => assert!(czolab::SignedAtomicMeasure::from_csv_str(&text).is_ok()),
            _ => {
                let mu = parsed.unwrap_or_else(|e| panic!("{name}: {e}"));
                let again = AtomicMeasure::from_csv_str(&mu.to_csv_string()).unwrap();
                assert_eq!(again.coords(), mu.coords());
                assert_eq!(again.weights(), mu.weights());
            }
        }
    }
}

#[test]
fn scenario_seeds_parse() {
    for (path, text) in seeds("parse_scenario") {
        Scenario::parse(&text, Path::new(".")).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn constants_seeds_parse_and_round_trip() {
    for (path, text) in seeds("parse_constants") {
        let c = ConstantsFile::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if c.is_complete() {
            let p = c.apply(&czolab::collapse::CollapseParams {
                epsilon: 0.1,
                d: 2,
                s: 1.0,
                alpha: 1.0,
                lambda_nice: 1.0,
                c1: 1.0,
                c4: 1.0,
                c6: 1.0,
                c8: 1.0,
                c9: 1.0,
                beta: 1.0,
                t0: 1.5,
                kappa0: None,
            });
            let back = ConstantsFile::parse(&ConstantsFile::to_text(&p)).unwrap();
            assert_eq!(back.apply(&p).c1, p.c1);
            assert_eq!(back.apply(&p).c9, p.c9);
        }
    }
}

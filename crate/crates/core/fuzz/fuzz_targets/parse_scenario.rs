#![no_main]

use std::path::Path;

use czolab::config::{Config, Scenario};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = Config::parse(text) {
        for key in cfg.keys().map(str::to_owned).collect::<Vec<_>>() {
            let _ = cfg.f64(&key);
            let _ = cfg.f64_list(&key);
            let _ = cfg.usize(&key);
        }
    }
    let _ = Scenario::parse(text, Path::new("."));
});

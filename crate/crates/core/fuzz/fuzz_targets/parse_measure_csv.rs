#![no_main]

use czolab::{AtomicMeasure, SignedAtomicMeasure};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mu) = AtomicMeasure::from_csv_str(text) {
        assert!(mu.weights().iter().all(|w| w.is_finite() && *w >= 0.0));
        assert_eq!(mu.coords().len(), mu.len() * mu.dim());
        let again = AtomicMeasure::from_csv_str(&mu.to_csv_string()).expect("round trip");
        assert_eq!(again.len(), mu.len());
    }
    let _ = SignedAtomicMeasure::from_csv_str(text);
});

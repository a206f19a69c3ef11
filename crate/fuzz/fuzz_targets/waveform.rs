#![no_main]

use libfuzzer_sys::fuzz_target;
use pmono::signal::make_waveform;
use pmono::{Grid, Waveform};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(w) = text.parse::<Waveform>() else { return };
    let grid = Grid::new(64, 1e-3).unwrap();
    if let Ok(s) = make_waveform(&w, grid) {
        assert_eq!(s.len(), 64);
        assert!(s.values().iter().all(|v| v.is_finite()));
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use pmono::trajectory::Trajectory;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(t) = Trajectory::parse(text) else { return };
    // Writing is a fixed point after one parse (NaN compares unequal, so
    // compare the text).
    let once = t.to_csv_string().unwrap();
    let twice = Trajectory::parse(&once).unwrap().to_csv_string().unwrap();
    assert_eq!(once, twice);
});

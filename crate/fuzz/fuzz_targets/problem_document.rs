#![no_main]

use libfuzzer_sys::fuzz_target;
use pmono::document::ProblemDocument;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = ProblemDocument::from_json(text) else { return };
    let again = ProblemDocument::from_json(&doc.to_json()).expect("own output parses");
    assert_eq!(again, doc);
    if doc.grid.is_some_and(|g| g.samples <= 4096) {
        let _ = doc.to_problem();
    }
});

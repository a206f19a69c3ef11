#![no_main]

use libfuzzer_sys::fuzz_target;
use pmono::netlist::{parse_netlist, partition_search};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(netlist) = parse_netlist(text) else { return };
    // Keep the partition search small enough for fuzzing throughput.
    if netlist.element_count() + netlist.port_count() <= 8 {
        if let Ok(d) = partition_search(&netlist, &netlist.pinned_choices()) {
            assert!(d.hybrid.skew_defect() <= 1e-9);
        }
    }
});

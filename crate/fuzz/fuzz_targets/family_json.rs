#![no_main]

use libfuzzer_sys::fuzz_target;
use matprod_core::baranyai::{verify_family, PartitionFamily};

fuzz_target!(|data: &[u8]| {
    let Ok(mut family) = serde_json::from_slice::<PartitionFamily>(data) else {
        return;
    };
    let verdict = verify_family(&family);
    // Reordering classes and blocks never changes the verdict.
    family.canonicalize();
    assert_eq!(verify_family(&family), verdict);
});

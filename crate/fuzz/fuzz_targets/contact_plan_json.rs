#![no_main]

use fedhap::orbital::ContactPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(plan) = ContactPlan::from_json(text) {
        let back = ContactPlan::from_json(&plan.to_json()).expect("exported plan reloads");
        assert_eq!(back, plan);
    }
});

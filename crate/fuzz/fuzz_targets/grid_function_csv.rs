#![no_main]

use bbk29_core::spaces::GridFunction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = GridFunction::read_csv(data) {
        let mut out = Vec::new();
        f.write_csv(&mut out).expect("write after read");
        let g = GridFunction::read_csv(out.as_slice()).expect("round trip");
        assert_eq!(f.values().len(), g.values().len());
    }
});

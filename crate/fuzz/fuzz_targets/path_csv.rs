#![no_main]

use bbk29_core::signals::Path;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = Path::read_csv(data) {
        let mut out = Vec::new();
        p.write_csv(&mut out).expect("write after read");
        let q = Path::read_csv(out.as_slice()).expect("round trip");
        assert_eq!(p.len(), q.len());
    }
});

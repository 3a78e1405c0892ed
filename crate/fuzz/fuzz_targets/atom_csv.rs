#![no_main]

use coopdipole::geometry::AtomArray;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(array) = AtomArray::read_csv(data) {
        let mut out = Vec::new();
        array.write_csv(&mut out).unwrap();
        let again = AtomArray::read_csv(out.as_slice()).expect("written table must parse");
        assert_eq!(again.len(), array.len());
        assert_eq!(again.species(), array.species());
    }
});

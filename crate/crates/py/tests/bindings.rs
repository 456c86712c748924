use std::ffi::CString;

use pyo3::prelude::*;
use vmb::vmb;

#[test]
fn python_smoke_script_runs_against_embedded_module() {
    pyo3::append_to_inittab!(vmb);
    Python::initialize();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../python/smoke_test.py");
    let src = std::fs::read_to_string(path).unwrap();
    // the script guards main() behind __name__, so call it explicitly
    let code = CString::new(format!("{src}\nmain()\n")).unwrap();
    Python::attach(|py| {
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("smoke script failed");
        }
    });
}

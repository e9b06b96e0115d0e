//! Central differences through the whole generator and its training
//! objective on a 16×16 input, along whole directions per parameter group.

mod support;

use support::{EndToEnd, Measured, E2E_TOL};

fn assert_all(measured: Vec<Measured>) {
    for m in measured {
        if m.short_step {
            eprintln!("{}: needed the short step", m.what);
        }
        assert!(m.error < E2E_TOL, "{}: error {}", m.what, m.error);
    }
}

#[test]
fn parameter_groups() {
    let s = EndToEnd::new();
    for (i, prefix) in EndToEnd::GROUPS.into_iter().enumerate() {
        assert_all(s.group(prefix, 10 + i as u64));
    }
}

#[test]
fn input_image() {
    assert_all(EndToEnd::new().input());
}

//! Runs the Monte Carlo verification suites at a reduced size.
//!
//! cargo run --release --example oracle -- [scale]

use dsa::verify::{run_suite, SUITES};

fn main() {
    let scale: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    for name in SUITES {
        if let Some(report) = run_suite(name, 1, scale) {
            println!("{report}");
        }
    }
}

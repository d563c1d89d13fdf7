//! Fixtures shared by the benchmarks.

use sharpbounds::ObservedMargins;

/// The vitamin D / incontinence margins used throughout the docs.
pub fn example_margins() -> ObservedMargins {
    ObservedMargins::new(0.27, 0.38, 0.49).expect("valid margins")
}

//! Shared inputs for the benchmarks.

use hllgemm::synth;
use hllgemm::CsrMatrix;

/// Named square matrices of increasing output compression.
pub fn matrices() -> Vec<(&'static str, CsrMatrix)> {
    vec![
        ("uniform", synth::uniform(4000, 4000, 16.0 / 4000.0, 1)),
        ("banded", synth::banded(4000, 24, 96, 2)),
        ("power_law", synth::power_law(4000, 4000, 200, 0.6, 0.02, 3)),
    ]
}

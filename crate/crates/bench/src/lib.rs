//! Fixtures shared by the benchmarks.

use linmdd_core::simulation::{replicate_sample, Model, ModelCase};
use linmdd_core::Sample;

/// Model 1 alternative sample of size `n`, fixed across runs.
pub fn model_sample(n: usize) -> Sample {
    let case = ModelCase {
        model_id: 1,
        spec: Model::catalog(1).expect("model 1 exists").spec(1.0),
    };
    replicate_sample(0xBE7C, &case, n, 0).expect("valid model sample")
}

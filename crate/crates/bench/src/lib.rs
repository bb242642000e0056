//! Shared fixtures for the criterion benchmarks.

use rand::Rng;

use prescreen_core::dataset::FeatureMatrix;
use prescreen_core::rng::stream;

/// A reproducible synthetic matrix with `n` rows and `p` features, labels
/// weakly coupled to the first feature.
pub fn synthetic_matrix(n: usize, p: usize, seed: u64) -> FeatureMatrix {
    let mut rng = stream(seed, &[0xBE]);
    let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    let mut values = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let signal: f64 = rng.gen_range(-1.0..1.0);
        values.push(signal);
        for _ in 1..p {
            values.push(rng.gen_range(-1.0..1.0));
        }
        labels.push(u8::from(signal + rng.gen_range(-0.8..0.8) > 0.0));
    }
    // Guarantee both classes.
    labels[0] = 0;
    labels[1] = 1;
    FeatureMatrix::new(names, values, labels).unwrap()
}

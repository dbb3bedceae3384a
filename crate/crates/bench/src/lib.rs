//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wlda::{simulate_mcar, MaskedDataset, MissingSpec};

/// `g` well-separated classes of `n_per_class` rows each, with correlated
/// features and `rate` of the eligible cells deleted.
pub fn synthetic(n_per_class: usize, p: usize, g: usize, rate: f64, seed: u64) -> MaskedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * g;
    let mut values = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for class in 0..g {
        for _ in 0..n_per_class {
            let shared: f64 = rng.random_range(-1.0..1.0);
            for j in 0..p {
                let centre = if j % g == class { 2.0 } else { 0.0 };
                values.push(centre + 0.6 * shared + rng.random_range(-1.0..1.0));
            }
            labels.push(class);
        }
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    let classes = (0..g).map(|c| format!("c{c}")).collect();
    let data = MaskedDataset::complete(n, names, values)
        .and_then(|d| d.with_labels(labels, classes))
        .expect("fixture is well formed");
    simulate_mcar(&data, &MissingSpec::protocol(rate, seed ^ 0x5eed)).expect("fixture has no gaps")
}

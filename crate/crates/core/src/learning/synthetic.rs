use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;

/// Isotropic unit-variance Gaussian clusters, one per class, with class
/// means drawn on a sphere of radius `separation`. Labels cycle through the
/// classes so every class has `n / classes` (±1) samples. The means depend
/// on `seed`, so draw train and test sets in one call.
pub fn gaussian_blobs(n: usize, dim: usize, classes: usize, separation: f64, seed: u64) -> Dataset {
    assert!(dim > 0 && (2..=256).contains(&classes));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.into_iter().map(|x| x / norm * separation).collect()
        })
        .collect();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for m in &means[c] {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push((m + noise) as f32);
        }
        labels.push(c as u8);
    }
    Dataset::new(features, labels, dim, classes).expect("generator output is well formed")
}

/// Two-class special case.
pub fn two_gaussians(n: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    gaussian_blobs(n, dim, 2, separation, seed)
}

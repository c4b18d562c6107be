use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root of `x^{D+1} = x + 1`; its inverse powers generate the additive
/// recurrence (Kronecker) sequence with low discrepancy in `[0,1)^D`.
fn generalized_golden_ratio(dims: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (dims as f64 + 1.0));
    }
    x
}

/// `count` deterministic points on the unit sphere `S^{dim-1}`.
///
/// A seeded random shift of a Kronecker sequence in `[0,1)^{2⌈dim/2⌉}` is
/// pushed through Box–Muller and normalized.
pub fn sphere_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if dim == 0 || count == 0 {
        return Vec::new();
    }
    let cube_dims = 2 * dim.div_ceil(2);
    let phi = generalized_golden_ratio(cube_dims);
    let alpha: Vec<f64> = (1..=cube_dims).map(|j| phi.powi(-(j as i32)).fract()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..cube_dims).map(|_| rng.gen::<f64>()).collect();

    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..cube_dims)
            .map(|j| (shift[j] + i as f64 * alpha[j]).fract())
            .collect();
        i += 1;
        let mut g = Vec::with_capacity(cube_dims);
        for pair in u.chunks(2) {
            let u1 = 1.0 - pair[0]; // (0, 1]
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * pair[1];
            g.push(r * theta.cos());
            g.push(r * theta.sin());
        }
        g.truncate(dim);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(g.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

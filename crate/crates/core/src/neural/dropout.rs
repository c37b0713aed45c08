use rand::Rng;

/// Inverted dropout mask: each entry is `1/keep` with probability `keep`,
/// otherwise `0`.
pub fn dropout_mask(rng: &mut impl Rng, n: usize, keep: f64) -> Vec<f64> {
    let scale = 1.0 / keep;
    (0..n)
        .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
        .collect()
}

/// Applies a freshly sampled mask in place and returns it.
pub fn apply_dropout(rng: &mut impl Rng, x: &mut [f64], keep: f64) -> Vec<f64> {
    let mask = dropout_mask(rng, x.len(), keep);
    x.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
    mask
}

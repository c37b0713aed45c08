/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of `softmax(scores)` against `gold`, and its gradient with
/// respect to the scores (`softmax - one_hot`).
pub fn softmax_xent(scores: &[f64], gold: usize) -> (f64, Vec<f64>) {
    assert!(
        gold < scores.len(),
        "gold label {gold} out of {} labels",
        scores.len()
    );
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let loss = log_z - scores[gold];
    let mut grad: Vec<f64> = scores.iter().map(|s| (s - log_z).exp()).collect();
    grad[gold] -= 1.0;
    (loss.max(0.0), grad)
}

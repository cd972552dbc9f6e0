//! Binary cross-entropy.

/// `-[y log p + (1 - y) log(1 - p)]` with `p = sigmoid(logit)`, evaluated as
/// `softplus(logit) - y * logit` so it never takes `log(0)`.
pub fn bce_with_logit(logit: f64, label: u8) -> f64 {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    softplus - f64::from(label) * logit
}

/// Log loss of a probability; converted to a logit first.
pub fn loss(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    bce_with_logit(p.ln() - (-p).ln_1p(), label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_half_costs_ln_two() {
        assert!((loss(0.5, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(0.5, 1) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn saturated_correct_prediction_is_nearly_free() {
        assert!(bce_with_logit(20.0, 1) < 1e-8);
        assert!(bce_with_logit(-20.0, 0) < 1e-8);
        assert!(bce_with_logit(1000.0, 0).is_finite());
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let p: f64 = rng.random_range(1e-6..1.0 - 1e-6);
            let y: u8 = rng.random_range(0..2);
            let direct = -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln());
            assert!((loss(p, y) - direct).abs() < 1e-9, "p={p} y={y}");
        }
    }
}

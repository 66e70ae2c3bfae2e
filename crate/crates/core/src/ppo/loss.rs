/// Per-sample surrogate objective (to be maximized). Positive advantages use
/// the standard clipped form; negative advantages clamp the ratio to
/// `[1 - eps, 1 + beta]`, so the contribution can never exceed
/// `(1 + beta) * |A|` in magnitude.
pub fn clipped_loss(r: f64, a: f64, eps: f64, beta: f64) -> f64 {
    if a >= 0.0 {
        (r * a).min(r.clamp(1.0 - eps, 1.0 + eps) * a)
    } else {
        r.clamp(1.0 - eps, 1.0 + beta) * a
    }
}

/// Derivative of [`clipped_loss`] with respect to the ratio.
pub fn clipped_loss_grad(r: f64, a: f64, eps: f64, beta: f64) -> f64 {
    if a >= 0.0 {
        if r < 1.0 + eps {
            a
        } else {
            0.0
        }
    } else if r > 1.0 - eps && r < 1.0 + beta {
        a
    } else {
        0.0
    }
}

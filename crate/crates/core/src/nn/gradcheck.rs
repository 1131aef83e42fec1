use super::Tensor;

/// Finite-difference step for 64-bit central differences.
pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(1, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1.0)
}

/// Compares `analytic` gradients against central differences of `loss`
/// evaluated at perturbed copies of `point`, and returns the largest
/// relative error over every component.
pub fn grad_check<F>(point: &[Tensor], analytic: &[Tensor], mut loss: F) -> f64
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut probe = point.to_vec();
    let mut worst = 0.0f64;
    for t in 0..probe.len() {
        for j in 0..probe[t].data.len() {
            let orig = probe[t].data[j];
            probe[t].data[j] = orig + FD_STEP;
            let up = loss(&probe);
            probe[t].data[j] = orig - FD_STEP;
            let down = loss(&probe);
            probe[t].data[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[t].data[j], numeric));
        }
    }
    worst
}

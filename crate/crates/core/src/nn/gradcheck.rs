use super::Parameters;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub worst_relative_error: f64,
    /// `(tensor, coordinate)` of the worst disagreement.
    pub worst_coordinate: Option<(usize, usize)>,
    pub checked: usize,
}

/// `|a - n| / max(1, |a|, |n|)`
#[inline]
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares `analytic` against central differences of `loss` on every
/// coordinate of `params`.
pub fn grad_check<P, F>(params: &P, analytic: &P, loss: F, tolerance: f64) -> GradCheckReport
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let mut probe = params.clone();
    let analytic: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let shapes: Vec<usize> = probe.tensors().iter().map(|t| t.len()).collect();

    let mut worst = 0.0f64;
    let mut worst_at = None;
    let mut checked = 0;
    for (t, &len) in shapes.iter().enumerate() {
        for c in 0..len {
            let orig = probe.tensors()[t][c];
            probe.tensors_mut()[t][c] = orig + FD_STEP;
            let up = loss(&probe);
            probe.tensors_mut()[t][c] = orig - FD_STEP;
            let down = loss(&probe);
            probe.tensors_mut()[t][c] = orig;

            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.get(t).and_then(|v| v.get(c)).copied().unwrap_or(f64::NAN);
            let err = relative_error(a, numeric);
            if err > worst || err.is_nan() {
                worst = if err.is_nan() { f64::INFINITY } else { err };
                worst_at = Some((t, c));
            }
            checked += 1;
        }
    }
    GradCheckReport {
        passed: worst <= tolerance,
        worst_relative_error: worst,
        worst_coordinate: worst_at,
        checked,
    }
}

use crate::error::Result;
use crate::numerics::Matrix;

/// Compare an analytic gradient against central finite differences.
///
/// `f` evaluates the scalar objective at a parameter list; `analytic` is the
/// gradient to verify, one matrix per parameter. Returns the maximum over all
/// coordinates of `|g_analytic - g_fd| / max(1, |g_fd|)`.
pub fn finite_diff_check<F>(
    mut f: F,
    params: &[Matrix],
    analytic: &[Matrix],
    step: f64,
) -> Result<f64>
where
    F: FnMut(&[Matrix]) -> Result<f64>,
{
    let mut work: Vec<Matrix> = params.to_vec();
    let mut worst: f64 = 0.0;
    for (pi, grad) in analytic.iter().enumerate() {
        for i in 0..work[pi].len() {
            let original = work[pi].data()[i];
            work[pi].data_mut()[i] = original + step;
            let plus = f(&work)?;
            work[pi].data_mut()[i] = original - step;
            let minus = f(&work)?;
            work[pi].data_mut()[i] = original;
            let fd = (plus - minus) / (2.0 * step);
            let rel = (grad.data()[i] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

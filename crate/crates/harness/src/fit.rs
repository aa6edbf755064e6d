//! Log-log least squares for regret growth exponents.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub horizons: Vec<usize>,
    pub mean_regrets: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log-space residuals.
    pub residual: f64,
}

/// Fits `log regret = intercept + slope · log T`.
///
/// Returns the reason when the fit is skipped: fewer than three horizons,
/// horizons not strictly increasing, or a nonpositive regret.
pub fn fit_exponent(horizons: &[usize], regrets: &[f64]) -> Result<ExponentFit, String> {
    if horizons.len() != regrets.len() {
        return Err(format!("{} horizons but {} regrets", horizons.len(), regrets.len()));
    }
    if horizons.len() < 3 {
        return Err(format!("exponent fit needs at least 3 horizons, got {}", horizons.len()));
    }
    if horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err("horizons must be strictly increasing".into());
    }
    if let Some((t, r)) = horizons.iter().zip(regrets).find(|(_, &r)| r.is_nan() || r <= 0.0) {
        return Err(format!("nonpositive mean regret {r} at T = {t}; fit skipped"));
    }
    let xs: Vec<f64> = horizons.iter().map(|&t| (t as f64).ln()).collect();
    let ys: Vec<f64> = regrets.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExponentFit { horizons: horizons.to_vec(), mean_regrets: regrets.to_vec(), slope, intercept, residual })
}

//! Summary statistics over training curves and evaluation traces.

/// Trailing moving average; the first `window - 1` entries average over
/// what is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (m, var.sqrt())
}

/// Mean of the last `fraction` of the values (at least one).
pub fn tail_mean(values: &[f64], fraction: f64) -> f64 {
    let n = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len().max(1));
    mean(&values[values.len().saturating_sub(n)..])
}

pub fn final_quarter_mean(values: &[f64]) -> f64 {
    tail_mean(values, 0.25)
}

/// Least-squares slope of `values` against their index.
pub fn slope(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = mean(values);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in values.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Convergence speed of a loss curve given as `(step, loss)` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    /// Mean of the last 10% of the smoothed curve.
    pub plateau: f64,
    /// First step at which the smoothed loss is at or below
    /// `factor * plateau`.
    pub step: Option<u64>,
}

pub const PLATEAU_FRACTION: f64 = 0.1;
/// Moving-average window (in logged steps) applied to loss curves.
pub const LOSS_SMOOTHING_WINDOW: usize = 1000;
pub const THRESHOLD_FACTOR: f64 = 1.5;

pub fn steps_to_threshold(points: &[(u64, f64)], window: usize, factor: f64) -> Convergence {
    let losses: Vec<f64> = points.iter().map(|p| p.1).collect();
    let smooth = moving_average(&losses, window);
    let plateau = tail_mean(&smooth, PLATEAU_FRACTION);
    let step = smooth
        .iter()
        .position(|&l| l <= factor * plateau)
        .map(|i| points[i].0);
    Convergence { plateau, step }
}

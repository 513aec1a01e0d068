//! Order-independent reductions and number formatting shared by the
//! ensemble, strategy and output code.

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation over a slice in index order.
///
/// The split points depend only on the length, so the result is identical
/// however the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean taken about the first value, so a constant sequence returns that
/// value exactly.
pub fn shifted_mean(values: &[f64]) -> f64 {
    let Some(&pivot) = values.first() else {
        return f64::NAN;
    };
    let shifted: Vec<f64> = values.iter().map(|v| v - pivot).collect();
    pivot + pairwise_sum(&shifted) / values.len() as f64
}

/// Sample mean and standard error of the mean (`s / √n`, with `s` the
/// `n − 1` sample standard deviation). The error is zero for a single value.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = shifted_mean(values);
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Population mean and standard deviation `√(⟨x²⟩ − ⟨x⟩²)`.
pub fn mean_and_std_dev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = shifted_mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, (pairwise_sum(&sq) / n).sqrt())
}

/// Formats with 17 significant digits, positional where that stays readable.
pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.16e}")
    }
}

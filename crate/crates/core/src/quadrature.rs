//! Composite Newton–Cotes weights on uniform grids.

/// Composite Simpson weights for `n` equally spaced nodes with spacing `h`.
///
/// An even number of intervals uses plain composite Simpson. With an odd
/// number of intervals the last three are covered by Simpson's 3/8 rule.
/// Two nodes fall back to the trapezoid rule.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 => {}
        1 => {}
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let intervals = n - 1;
            let simpson_end = if intervals.is_multiple_of(2) { n - 1 } else { n - 4 };
            let mut i = 0;
            while i + 2 <= simpson_end {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
                i += 2;
            }
            if intervals % 2 == 1 {
                let c = 3.0 * h / 8.0;
                w[n - 4] += c;
                w[n - 3] += 3.0 * c;
                w[n - 2] += 3.0 * c;
                w[n - 1] += c;
            }
        }
    }
    w
}

/// Integrates uniformly sampled `values` with spacing `h`.
pub fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    simpson_weights(values.len(), h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

//! Series tails and extrapolation helpers.

/// `sum_{k > K} 1/k^2`, the trigamma function at `K + 1`.
pub fn inverse_square_tail(k: usize) -> f64 {
    // sum directly up to M, then sum_{j > M} j^-2 =
    // 1/M - 1/(2M^2) + 1/(6M^3) - 1/(30M^5) + 1/(42M^7) - 1/(30M^9) + ...
    let m = k.max(32);
    let direct: f64 = ((k + 1)..=m).rev().map(|j| 1.0 / (j as f64).powi(2)).sum();
    let inv = 1.0 / m as f64;
    let inv2 = inv * inv;
    direct + inv - 0.5 * inv2 + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

/// `sum_{k=1}^{K} 1/k^2`, accumulated from the small end of the terms.
pub fn inverse_square_partial(k: usize) -> f64 {
    (1..=k).rev().map(|j| 1.0 / (j as f64).powi(2)).sum()
}

/// Richardson tableau for samples `f(h_j)` with `h_{j+1} = h_j / ratio` and
/// an error expansion in integer powers `h, h^2, ...`.
///
/// Row `m` of the result eliminates the first `m` powers.
pub fn richardson_tableau(values: &[f64], ratio: f64) -> Vec<Vec<f64>> {
    let mut table = vec![values.to_vec()];
    let mut factor = 1.0;
    while table.last().map_or(0, Vec::len) > 1 {
        factor *= ratio;
        let prev = table.last().unwrap();
        let next: Vec<f64> = prev
            .windows(2)
            .map(|w| (factor * w[1] - w[0]) / (factor - 1.0))
            .collect();
        table.push(next);
    }
    table
}

/// Least-squares slope of `y` against `x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

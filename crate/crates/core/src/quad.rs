//! Uniform grids and trapezoid-rule quadrature shared by the objective and
//! the simulation harness.

/// `n` equally spaced points covering `[a, b]`, endpoints included.
///
/// Requires `n >= 2` and `a < b`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    assert!(a < b, "empty interval");
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

/// Trapezoid-rule weights for [`uniform_grid`]; they sum to `b - a`.
pub fn trapezoid_weights(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * step } else { step })
        .collect()
}

/// Trapezoid rule over values sampled on a uniform grid spanning `[a, b]`.
pub fn trapezoid_integral(values: &[f64], a: f64, b: f64) -> f64 {
    assert!(values.len() >= 2, "need at least two samples");
    let step = (b - a) / (values.len() - 1) as f64;
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    step * (0.5 * (values[0] + values[values.len() - 1]) + interior)
}

/// Composite Simpson rule with `intervals` subdivisions (rounded up to even).
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = if intervals % 2 == 0 { intervals } else { intervals + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

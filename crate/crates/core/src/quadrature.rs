//! Quadrature on sampled grids and adaptive grid construction.

/// Composite Simpson rule on a nonuniform grid. Consecutive interval pairs are
/// integrated with the three-point rule; a trailing odd interval uses the trapezoid.
pub fn simpson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "simpson: unequal lengths");
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let hs = h0 + h1;
        acc += hs / 6.0
            * ((2.0 - h1 / h0) * y[i]
                + hs * hs / (h0 * h1) * y[i + 1]
                + (2.0 - h0 / h1) * y[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        acc += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
    }
    acc
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "trapezoid: unequal lengths");
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Integral of a power-law tail beyond the last two samples, `y ~ c |x|^(-k)`.
/// Returns `None` when the samples do not decay faster than 1/|x|.
pub fn power_law_tail(x_inner: f64, y_inner: f64, x_end: f64, y_end: f64) -> Option<f64> {
    if y_end == 0.0 {
        return Some(0.0);
    }
    if !(y_inner > 0.0 && y_end > 0.0) || x_inner.abs() >= x_end.abs() || x_inner == 0.0 {
        return None;
    }
    let k = (y_inner / y_end).ln() / (x_end.abs() / x_inner.abs()).ln();
    if k <= 1.0 {
        return None;
    }
    Some(y_end * x_end.abs() / (k - 1.0))
}

/// Build a grid on `[breaks[0], breaks[last]]` by adaptive Simpson refinement of `f`.
///
/// Every accepted cell contributes two equal-width interval pairs, so the returned
/// grid has an odd number of points and [`simpson`] reproduces the adaptive sum.
pub fn adaptive_grid<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    rtol: f64,
    max_depth: u32,
) -> Vec<f64> {
    assert!(
        breaks.len() >= 2,
        "adaptive_grid: need at least two breakpoints"
    );
    // rough magnitude of the integral sets the absolute tolerance
    let mut scale = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        for j in 0..8 {
            let xa = a + (b - a) * j as f64 / 8.0;
            let xb = a + (b - a) * (j + 1) as f64 / 8.0;
            let xm = 0.5 * (xa + xb);
            scale += (xb - xa) / 6.0 * (f(xa).abs() + 4.0 * f(xm).abs() + f(xb).abs());
        }
    }
    let span = breaks[breaks.len() - 1] - breaks[0];
    let tol = (rtol * scale).max(f64::MIN_POSITIVE);

    let mut grid = vec![breaks[0]];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        // start from eight cells so a narrow feature cannot hide between samples
        for j in 0..8 {
            let xa = a + (b - a) * j as f64 / 8.0;
            let xb = if j == 7 {
                b
            } else {
                a + (b - a) * (j + 1) as f64 / 8.0
            };
            let m = 0.5 * (xa + xb);
            let (fa, fm, fb) = (f(xa), f(m), f(xb));
            refine(
                &f,
                xa,
                m,
                xb,
                fa,
                fm,
                fb,
                tol * (xb - xa) / span,
                max_depth,
                &mut grid,
            );
        }
    }
    grid
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    tol: f64,
    depth: u32,
    out: &mut Vec<f64>,
) {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        out.extend_from_slice(&[lm, m, rm, b]);
        return;
    }
    refine(f, a, lm, m, fa, flm, fm, 0.5 * tol, depth - 1, out);
    refine(f, m, rm, b, fm, frm, fb, 0.5 * tol, depth - 1, out);
}

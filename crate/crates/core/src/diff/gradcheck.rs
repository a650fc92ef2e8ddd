//! Finite-difference helpers shared by gradient tests.

/// Central difference of `f` at `x` along direction `v`.
pub fn central_difference<F>(mut f: F, x: &[f64], v: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Result of a directional-derivative check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// False when the estimates at `h` and `h/2` disagree, which indicates a
    /// kink (ReLU, clamp, projection switch) inside the stencil.
    pub smooth: bool,
}

pub fn check_directional<F>(mut f: F, x: &[f64], v: &[f64], analytic: f64, h: f64) -> DirectionalCheck
where
    F: FnMut(&[f64]) -> f64,
{
    let n1 = central_difference(&mut f, x, v, h);
    let n2 = central_difference(&mut f, x, v, h / 2.0);
    let smooth = relative_error(n1, n2, 1e-6) < 1e-6;
    DirectionalCheck {
        analytic,
        numeric: n2,
        rel_error: relative_error(analytic, n2, 1e-8),
        smooth,
    }
}

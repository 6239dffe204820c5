//! Adaptive Gauss–Kronrod quadrature (7/15-point pair).
//!
//! This is the numerical side of the dual-route convolution check: it
//! shares no code with the analytic tissue responses. Panels are bisected
//! until the Kronrod-vs-Gauss discrepancy meets the requested relative
//! target (with a generous safety margin) or a depth cap is hit.

/// Positive Kronrod abscissae (the 15-point rule is symmetric; the
/// center node is listed implicitly). Odd indices are the embedded
/// 7-point Gauss nodes.
const XGK: [f64; 7] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
];

/// Kronrod weights for `XGK`, center weight last.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the embedded 7-point rule (nodes XGK[1], XGK[3],
/// XGK[5] and the center).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod panel: returns (K15 estimate, |K15 − G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut result_gauss = WG[3] * f_center;
    let mut result_kronrod = WGK[7] * f_center;
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let sum = f(center - half * x) + f(center + half * x);
        result_kronrod += wk * sum;
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * sum;
        }
    }
    result_kronrod *= half;
    result_gauss *= half;
    (result_kronrod, (result_kronrod - result_gauss).abs())
}

fn refine<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol_density: f64, depth: u32) -> f64 {
    let (estimate, err) = gk15(f, a, b);
    if err <= tol_density * (b - a) || depth >= 48 {
        return estimate;
    }
    let mid = 0.5 * (a + b);
    refine(f, a, mid, tol_density, depth + 1) + refine(f, mid, b, tol_density, depth + 1)
}

/// Integrate `f` over `[a, b]` to roughly `rel_tol` relative accuracy.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (rough, err) = gk15(f, a, b);
    // A tenth of the target as panel budget gives margin against the
    // error estimator being optimistic on smooth integrands.
    let tol_abs = (0.1 * rel_tol * rough.abs()).max(1e-300);
    if err <= tol_abs {
        return rough;
    }
    refine(f, a, b, tol_abs / (b - a), 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        // K15 integrates low-order polynomials exactly.
        let got = integrate(&|x: f64| 3.0 * x * x, 0.0, 2.0, 1e-10);
        assert!((got - 8.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_matches_closed_form() {
        let got = integrate(&f64::exp, 0.0, 1.0, 1e-12);
        let want = 1.0_f64.exp() - 1.0;
        assert!((got - want).abs() / want < 1e-13, "got {got}");
    }

    #[test]
    fn oscillatory_needs_subdivision() {
        // ∫0^10 sin x dx = 1 − cos 10
        let got = integrate(&f64::sin, 0.0, 10.0, 1e-11);
        let want = 1.0 - 10.0_f64.cos();
        assert!((got - want).abs() / want.abs() < 1e-11, "got {got}");
    }

    #[test]
    fn zero_function_and_empty_interval() {
        assert_eq!(integrate(&|_| 0.0, 0.0, 5.0, 1e-10), 0.0);
        assert_eq!(integrate(&f64::exp, 2.0, 2.0, 1e-10), 0.0);
    }

    #[test]
    fn sharp_peak() {
        // Narrow Gaussian: forces deep refinement but stays accurate.
        let f = |x: f64| (-(x - 0.3) * (x - 0.3) / 2e-6).exp();
        let got = integrate(&f, 0.0, 1.0, 1e-10);
        let want = (2e-6 * std::f64::consts::PI).sqrt(); // full line ≈ clipped
        assert!((got - want).abs() / want < 1e-10, "got {got}");
    }
}
